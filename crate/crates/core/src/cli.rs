//! Command-line front end: config parsing, subcommand dispatch and CSV output.
//!
//! Exit codes: 0 on success, 1 for configuration or input errors, 2 for
//! numerical failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_config, Experiment};
use crate::distances::{
    bernoulli_aggregate_bound, continuous_kernel_aggregate_bound, discrete_kernel_aggregate_bound, BoundReport,
    JumpCase,
};
use crate::error::{Error, Result};
use crate::experiments::{default_drift_estimator, run_convergence, run_risk_transfer, ConvergenceOptions};
use crate::kernels::{apply_round_kernel, truncate_resample, TruncateResampleParams};
use crate::model::build_increment_summaries;
use crate::rng::{stream_id, RngStream};
use crate::simulate::sample_path;

#[derive(Debug, Parser)]
#[command(name = "lecam", version, about = "Jump-diffusion simulation, jump-filtering kernels and distance bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    Round,
    Truncate,
    Bernoulli,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path and print its increments.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Apply a jump-filtering kernel to an increment CSV.
    Filter {
        #[command(flatten)]
        common: Common,
        /// CSV with an `increment` column (as written by `simulate`).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kernel: Option<KernelKind>,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Per-increment and aggregate closed-form bounds.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kernel: Option<KernelKind>,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Bound-versus-oracle sweep over n.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Comma-separated increasing list of n.
        #[arg(long = "n-list", value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Risk of the default drift estimator on white-noise, transferred and raw jump data.
    RiskTransfer {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n-list", value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Parse and validate a config; prints nothing.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const DEFAULT_N_LIST: [usize; 5] = [16, 32, 64, 128, 256];

fn open_out<'a>(out: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(stdout),
    })
}

fn seed_of(common: &Common, exp: &Experiment) -> u64 {
    common.seed.or(exp.run.seed).unwrap_or(0)
}

fn default_kernel(exp: &Experiment, flag: Option<KernelKind>) -> Result<KernelKind> {
    if let Some(k) = flag {
        return Ok(k);
    }
    if let Some(name) = &exp.run.kernel {
        return KernelKind::from_str(name, true).map_err(|_| Error::config("run.kernel", format!("unknown kernel {name}")));
    }
    Ok(if exp.spec.jump_law.is_lattice() {
        KernelKind::Round
    } else {
        KernelKind::Truncate
    })
}

fn kernel_l(exp: &Experiment, flag: Option<f64>, ms: impl Iterator<Item = f64>) -> f64 {
    flag.or(exp.run.l).unwrap_or_else(|| ms.map(f64::abs).fold(0.0, f64::max))
}

fn kernel_epsilon(exp: &Experiment, flag: Option<f64>) -> f64 {
    flag.or(exp.run.epsilon).unwrap_or(0.5)
}

fn simulate(common: &Common, stdout: &mut dyn Write) -> Result<()> {
    let (_, exp) = parse_config(&common.config)?;
    let sums = build_increment_summaries(&exp.spec, &exp.grid)?;
    let mut rng = RngStream::new(seed_of(common, &exp), stream_id(0, 0, 0));
    let path = sample_path(&exp.spec, &exp.grid, &sums, &mut rng)?;
    let counts = path.jump_counts();
    let mut w = csv::Writer::from_writer(open_out(&common.out, stdout)?);
    w.write_record(["t_i", "increment", "gaussian_part", "n_jumps_in_interval"])?;
    for i in 0..exp.grid.n() {
        w.write_record([
            exp.grid.times()[i + 1].to_string(),
            path.increments[i].to_string(),
            path.gaussian_parts[i].to_string(),
            counts[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_increments(path: &PathBuf) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let col = r
        .headers()?
        .iter()
        .position(|h| h == "increment")
        .ok_or_else(|| Error::config("input", "no `increment` column"))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let v = rec
            .get(col)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::config("input", format!("row {}: bad increment", line + 1)))?;
        out.push(v);
    }
    Ok(out)
}

fn filter(
    common: &Common,
    input: &PathBuf,
    kernel: Option<KernelKind>,
    l: Option<f64>,
    epsilon: Option<f64>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let (_, exp) = parse_config(&common.config)?;
    let incs = read_increments(input)?;
    if incs.len() != exp.grid.n() {
        return Err(Error::LengthMismatch {
            expected: exp.grid.n(),
            actual: incs.len(),
        });
    }
    let filtered = match default_kernel(&exp, kernel)? {
        KernelKind::Round => apply_round_kernel(&incs),
        KernelKind::Truncate => {
            let sums = build_increment_summaries(&exp.spec, &exp.grid)?;
            let l = kernel_l(&exp, l, sums.iter().map(|s| s.m));
            let eps = kernel_epsilon(&exp, epsilon);
            let mut rng = RngStream::new(seed_of(common, &exp), stream_id(3, 0, 0));
            incs.iter()
                .zip(sums.iter())
                .map(|(&x, s)| Ok(truncate_resample(x, &TruncateResampleParams::new(l, eps, s.sd())?, &mut rng)))
                .collect::<Result<Vec<f64>>>()?
        }
        KernelKind::Bernoulli => return Err(Error::config("kernel", "filter supports round or truncate")),
    };
    let mut w = csv::Writer::from_writer(open_out(&common.out, stdout)?);
    w.write_record(["t_i", "increment", "filtered"])?;
    for i in 0..incs.len() {
        w.write_record([
            exp.grid.times()[i + 1].to_string(),
            incs[i].to_string(),
            filtered[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn bounds(
    common: &Common,
    kernel: Option<KernelKind>,
    l: Option<f64>,
    epsilon: Option<f64>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let (_, exp) = parse_config(&common.config)?;
    let sums = build_increment_summaries(&exp.spec, &exp.grid)?;
    let report: BoundReport = match default_kernel(&exp, kernel)? {
        KernelKind::Round => discrete_kernel_aggregate_bound(&sums),
        KernelKind::Bernoulli => bernoulli_aggregate_bound(&sums),
        KernelKind::Truncate => {
            let l = kernel_l(&exp, l, sums.iter().map(|s| s.m));
            continuous_kernel_aggregate_bound(&sums, l, kernel_epsilon(&exp, epsilon), &exp.spec.jump_law)?
        }
    };
    for warning in &report.warnings {
        writeln!(stderr, "warning: {warning}")?;
    }
    let mut w = csv::Writer::from_writer(open_out(&common.out, stdout)?);
    w.write_record(["i", "lambda_i", "sigma_i", "m_i", "per_increment_bound", "formula_name"])?;
    for (i, (s, b)) in sums.iter().zip(&report.per_increment).enumerate() {
        w.write_record([
            (i + 1).to_string(),
            s.lambda.to_string(),
            s.sd().to_string(),
            s.m.to_string(),
            b.to_string(),
            report.formula_name.clone(),
        ])?;
    }
    w.write_record([
        "aggregate".to_string(),
        String::new(),
        String::new(),
        String::new(),
        report.aggregate.to_string(),
        report.formula_name.clone(),
    ])?;
    w.flush()?;
    Ok(())
}

fn n_list(exp: &Experiment, flag: &Option<Vec<usize>>) -> Result<Vec<usize>> {
    let list = flag
        .clone()
        .or_else(|| exp.run.n_list.clone())
        .unwrap_or_else(|| DEFAULT_N_LIST.to_vec());
    if list.is_empty() || list.contains(&0) {
        return Err(Error::config("n-list", "needs positive entries"));
    }
    if list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("n-list", "must be strictly increasing"));
    }
    Ok(list)
}

fn convergence(
    common: &Common,
    list: &Option<Vec<usize>>,
    l: Option<f64>,
    epsilon: Option<f64>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let (_, exp) = parse_config(&common.config)?;
    let ns = n_list(&exp, list)?;
    let mut opts = ConvergenceOptions::new(JumpCase::of(&exp.spec.jump_law));
    opts.l = l.or(exp.run.l);
    opts.epsilon = kernel_epsilon(&exp, epsilon);
    opts.holder = exp.holder;
    let rows = run_convergence(&exp.spec, &ns, &opts)?;
    let mut w = csv::Writer::from_writer(open_out(&common.out, stdout)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn risk_transfer(common: &Common, list: &Option<Vec<usize>>, reps: Option<usize>, stdout: &mut dyn Write) -> Result<()> {
    let (_, exp) = parse_config(&common.config)?;
    let ns = n_list(&exp, list)?;
    let reps = reps.or(exp.run.reps).unwrap_or(100);
    if reps == 0 {
        return Err(Error::config("reps", "must be at least 1"));
    }
    let rows = run_risk_transfer(&exp.spec, &default_drift_estimator, &ns, reps, seed_of(common, &exp))?;
    let mut w = csv::Writer::from_writer(open_out(&common.out, stdout)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Simulate { common } => simulate(common, stdout),
        Command::Filter {
            common,
            input,
            kernel,
            l,
            epsilon,
        } => filter(common, input, *kernel, *l, *epsilon, stdout),
        Command::Bounds {
            common,
            kernel,
            l,
            epsilon,
        } => bounds(common, *kernel, *l, *epsilon, stdout, stderr),
        Command::Convergence {
            common,
            n_list,
            l,
            epsilon,
        } => convergence(common, n_list, *l, *epsilon, stdout),
        Command::RiskTransfer { common, n_list, reps } => risk_transfer(common, n_list, *reps, stdout),
        Command::Validate { config } => parse_config(config).map(|_| ()),
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_config_error() {
                1
            } else {
                2
            }
        }
    }
}

/// Runs against the process's standard streams.
pub fn main_with_std_streams() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    run(std::env::args_os(), &mut out, &mut err)
}
