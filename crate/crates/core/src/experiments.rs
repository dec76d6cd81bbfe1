//! Desk-scale studies: bound-versus-oracle convergence sweeps with log-log
//! slope fits, and the risk-transfer comparison of drift estimators.

use rayon::prelude::*;
use serde::Serialize;

use crate::distances::{
    bernoulli_aggregate_bound, continuous_kernel_aggregate_bound, discrete_kernel_aggregate_bound,
    drift_discretization_error, hellinger_product_tv_bound, theorem_rate, JumpCase,
};
use crate::error::{Error, Result};
use crate::kernels::{fold_density_to_lattice_cell, transfer_estimator, truncate_resample_density, TruncateResampleParams};
use crate::laws::{bernoulli_density, gaussian_density, increment_density_exact, DEFAULT_TAIL_TOL};
use crate::model::{build_increment_summaries, Grid, HolderClassParams, IncrementSummary, JumpLaw, ModelSpec};
use crate::oracle::tv_quadrature;
use crate::rng::{stream_id, RngStream};
use crate::simulate::{sample_path, sample_white_noise_increments};

/// One row of a convergence sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub delta_n: f64,
    /// Bernoulli bound + kernel bound + drift discretisation error.
    pub aggregate_bound: f64,
    /// √(Σ 2 TVᵢ) over the per-increment oracle TVs.
    pub oracle_product_bound: f64,
    pub rate_prediction: f64,
}

/// Columns of [`ConvergenceRow`] that can be regressed on Δₙ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateColumn {
    AggregateBound,
    OracleProductBound,
    RatePrediction,
}

impl RateColumn {
    fn get(&self, row: &ConvergenceRow) -> f64 {
        match self {
            RateColumn::AggregateBound => row.aggregate_bound,
            RateColumn::OracleProductBound => row.oracle_product_bound,
            RateColumn::RatePrediction => row.rate_prediction,
        }
    }
}

/// Settings for [`run_convergence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceOptions {
    pub jump_case: JumpCase,
    /// Bound L on |mᵢ| for the truncate-resample kernel; defaults to max |mᵢ|.
    pub l: Option<f64>,
    /// Kernel exponent of the truncate-resample kernel.
    pub epsilon: f64,
    pub holder: HolderClassParams,
}

impl ConvergenceOptions {
    pub fn new(jump_case: JumpCase) -> Self {
        Self {
            jump_case,
            l: None,
            epsilon: 0.5,
            holder: HolderClassParams::default(),
        }
    }
}

/// Oracle TV for the two steps on one interval: exact law vs single-jump
/// law, then the kernel image of the single-jump law vs the Gaussian law.
/// In the lattice case both sides of the second step are folded to the
/// cell, so it vanishes for integer jumps.
pub fn per_increment_oracle_tv(
    summary: &IncrementSummary,
    law: &JumpLaw,
    jump_case: JumpCase,
    kernel: Option<&TruncateResampleParams>,
) -> Result<(f64, f64)> {
    let exact = increment_density_exact(summary, law, DEFAULT_TAIL_TOL)?;
    let bern = bernoulli_density(summary, law);
    let gauss = gaussian_density(summary.m, summary.sigma2)?;
    let step1 = tv_quadrature(&exact, &bern)?;
    let step2 = match jump_case {
        JumpCase::Lattice => tv_quadrature(&fold_density_to_lattice_cell(&bern), &fold_density_to_lattice_cell(&gauss))?,
        JumpCase::Continuous => {
            let params = kernel.ok_or_else(|| Error::invalid("kernel", "continuous case needs kernel parameters"))?;
            tv_quadrature(&truncate_resample_density(&bern, params)?, &gauss)?
        }
    };
    Ok((step1, step2))
}

/// Sweeps n, comparing the closed-form chain of bounds with oracle TVs.
pub fn run_convergence(spec: &ModelSpec, n_values: &[usize], options: &ConvergenceOptions) -> Result<Vec<ConvergenceRow>> {
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n_values", "must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let grid = Grid::uniform(spec.horizon, n)?;
        let sums = build_increment_summaries(spec, &grid)?;
        let max_m = sums.iter().map(|s| s.m.abs()).fold(0.0, f64::max);
        let l = options.l.unwrap_or(max_m);
        let bern = bernoulli_aggregate_bound(&sums);
        let kernel_bound = match options.jump_case {
            JumpCase::Lattice => discrete_kernel_aggregate_bound(&sums),
            JumpCase::Continuous => continuous_kernel_aggregate_bound(&sums, l, options.epsilon, &spec.jump_law)?,
        };
        let drift = drift_discretization_error(|t| spec.drift.eval(t), spec, &grid)?;
        let per: Vec<f64> = with_thread_cap(|| {
            sums.items
                .par_iter()
                .map(|s| {
                    let params = match options.jump_case {
                        JumpCase::Continuous => Some(TruncateResampleParams::new(l, options.epsilon, s.sd())?),
                        JumpCase::Lattice => None,
                    };
                    let (a, b) = per_increment_oracle_tv(s, &spec.jump_law, options.jump_case, params.as_ref())?;
                    Ok((a + b).clamp(0.0, 1.0))
                })
                .collect::<Result<Vec<f64>>>()
        })?;
        let delta_n = grid.mesh();
        rows.push(ConvergenceRow {
            n,
            delta_n,
            aggregate_bound: bern.aggregate + kernel_bound.aggregate + drift,
            oracle_product_bound: hellinger_product_tv_bound(&per)?,
            rate_prediction: theorem_rate(delta_n, spec.horizon, spec.epsilon_n, &options.holder, options.jump_case),
        });
    }
    Ok(rows)
}

/// Least-squares slope of log(y) on log(x).
pub fn fit_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 4 {
        return Err(Error::invalid("rows", "need at least 4 rows"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("column", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// Slope of log(column) against log(Δₙ).
pub fn fit_rate_slope(rows: &[ConvergenceRow], column: RateColumn) -> Result<f64> {
    let x: Vec<f64> = rows.iter().map(|r| r.delta_n).collect();
    let y: Vec<f64> = rows.iter().map(|r| column.get(r)).collect();
    fit_log_slope(&x, &y)
}

/// One row of the risk-transfer study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskRow {
    pub n: usize,
    pub mise_direct_gaussian: f64,
    pub mise_transferred: f64,
    pub mise_naive_on_jumps: f64,
    pub replications: usize,
}

/// A drift estimator: increments on a grid to estimated values f̂(tⱼ),
/// j = 0..=n.
pub type DriftEstimator = dyn Fn(&[f64], &Grid) -> Vec<f64> + Sync;

/// Window length ⌈n^{1/3}⌉ of the default estimator.
pub fn default_window(n: usize) -> usize {
    let w = (n as f64).cbrt().ceil() as usize;
    // guard against cbrt rounding just above an integer cube
    let w = if (w - 1).pow(3) >= n { w - 1 } else { w };
    w.max(1)
}

/// Increment over interval length, smoothed by a centred moving average over
/// ⌈n^{1/3}⌉ intervals; f̂(tⱼ) takes the value of the interval starting at tⱼ
/// (the last point reuses the last interval).
pub fn default_drift_estimator(increments: &[f64], grid: &Grid) -> Vec<f64> {
    let n = increments.len();
    let raw: Vec<f64> = increments
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let (a, b) = grid.interval(i);
            d / (b - a)
        })
        .collect();
    let w = default_window(n);
    let left = (w - 1) / 2;
    let right = w - 1 - left;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + raw[i];
    }
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect();
    (0..=n).map(|j| smooth[j.min(n - 1)]).collect()
}

/// Trapezoid rule for ∫(f̂ − f)² on the grid.
pub fn integrated_squared_error(estimate: &[f64], f: impl Fn(f64) -> f64, grid: &Grid) -> f64 {
    let t = grid.times();
    let e: Vec<f64> = t.iter().zip(estimate).map(|(&ti, &v)| (v - f(ti)).powi(2)).collect();
    t.windows(2).zip(e.windows(2)).map(|(tt, ee)| 0.5 * (tt[1] - tt[0]) * (ee[0] + ee[1])).sum()
}

/// Worker count from `LECAM_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("LECAM_THREADS").ok()?.trim().parse().ok().filter(|&k: &usize| k > 0)
}

/// Runs `f` inside a pool limited by `LECAM_THREADS` when set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match thread_cap() {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Paired Monte Carlo comparison of δ on white-noise data, γₙ = δ∘rounding on
/// jump data, and δ applied to raw jump data.
pub fn run_risk_transfer(
    spec: &ModelSpec,
    delta: &DriftEstimator,
    n_values: &[usize],
    replications: usize,
    seed: u64,
) -> Result<Vec<RiskRow>> {
    if replications == 0 {
        return Err(Error::invalid("replications", "must be at least 1"));
    }
    if !spec.jump_law.is_lattice() {
        return Err(Error::invalid("jump_law", "risk transfer needs integer-valued jumps"));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for (idx, &n) in n_values.iter().enumerate() {
        let grid = Grid::uniform(spec.horizon, n)?;
        let sums = build_increment_summaries(spec, &grid)?;
        let f = |t: f64| spec.drift.eval(t);
        let per_rep: Vec<(f64, f64, f64)> = with_thread_cap(|| {
            (0..replications)
                .into_par_iter()
                .map(|r| {
                    let mut path_rng = RngStream::new(seed, stream_id(1, idx as u32, r as u32));
                    let mut noise_rng = RngStream::new(seed, stream_id(2, idx as u32, r as u32));
                    let path = sample_path(spec, &grid, &sums, &mut path_rng)?;
                    let white = sample_white_noise_increments(&grid, &sums, &mut noise_rng)?;
                    let direct = integrated_squared_error(&delta(&white, &grid), f, &grid);
                    let transferred = transfer_estimator(|x| delta(x, &grid), &path.observations(), n)?;
                    let transferred = integrated_squared_error(&transferred, f, &grid);
                    let naive = integrated_squared_error(&delta(&path.increments, &grid), f, &grid);
                    Ok((direct, transferred, naive))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let k = replications as f64;
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for (x, y, z) in &per_rep {
            a += x;
            b += y;
            c += z;
        }
        rows.push(RiskRow {
            n,
            mise_direct_gaussian: a / k,
            mise_transferred: b / k,
            mise_naive_on_jumps: c / k,
            replications,
        });
    }
    Ok(rows)
}
