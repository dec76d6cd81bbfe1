//! TOML experiment configuration.
//!
//! ```toml
//! horizon = 1.0
//! n = 64
//! epsilon_n = 1.0
//! # initial = 0.0
//! # C1 = 0.5          # optional bound on |d/dt ln sigma|
//!
//! [grid]
//! kind = "uniform"    # or "explicit" with times = [0.0, ..., horizon]
//!
//! [drift]
//! kind = "sine"       # constant | affine | sine | exponential | power
//! amplitude = 1.0
//! frequency = 1.0
//!
//! [sigma]
//! kind = "constant"
//! value = 1.0
//!
//! [intensity]
//! kind = "constant"
//! value = 0.5
//!
//! [jump_law]
//! kind = "dirac"      # dirac | lattice | uniform | normal
//! point = 1.0
//!
//! [holder]            # optional
//! alpha = 1.0
//! M = 1.0
//! B = 1.0
//!
//! [run]               # optional defaults for CLI flags
//! seed = 0
//! n_list = [16, 32, 64]
//! reps = 100
//! kernel = "round"
//! L = 0.5
//! epsilon = 0.5
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    check_sigma_log_derivative, ContinuousJump, Grid, HolderClassParams, JumpLaw, JumpShape, LatticeLaw, ModelSpec,
    TimeFunction,
};

/// Observation grid layout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    #[default]
    Uniform,
    Explicit { times: Vec<f64> },
}

fn default_n1() -> f64 {
    1.0
}

/// Jump law as written in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLawConfig {
    Dirac {
        point: f64,
    },
    Lattice {
        values: Vec<i64>,
        probs: Vec<f64>,
    },
    Uniform {
        lo: f64,
        hi: f64,
        #[serde(default = "default_n1")]
        n1: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
        #[serde(default = "default_n1")]
        n1: f64,
    },
}

impl JumpLawConfig {
    pub fn build(&self) -> Result<JumpLaw> {
        Ok(match self {
            JumpLawConfig::Dirac { point } => {
                if !point.is_finite() {
                    return Err(Error::config("jump_law.point", "must be finite"));
                }
                JumpLaw::dirac(*point)
            }
            JumpLawConfig::Lattice { values, probs } => {
                if values.len() != probs.len() {
                    return Err(Error::config("jump_law.probs", "must have the same length as jump_law.values"));
                }
                JumpLaw::Lattice(LatticeLaw::new(values.iter().copied().zip(probs.iter().copied()).collect())?)
            }
            JumpLawConfig::Uniform { lo, hi, n1 } => {
                JumpLaw::Continuous(ContinuousJump::new(JumpShape::Uniform { lo: *lo, hi: *hi }, *n1)?)
            }
            JumpLawConfig::Normal { mean, sd, n1 } => {
                JumpLaw::Continuous(ContinuousJump::new(JumpShape::Normal { mean: *mean, sd: *sd }, *n1)?)
            }
        })
    }
}

/// Optional defaults for command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Whole config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub horizon: f64,
    pub n: usize,
    pub epsilon_n: f64,
    #[serde(default)]
    pub initial: f64,
    #[serde(default, rename = "C1", skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    pub drift: TimeFunction,
    pub sigma: TimeFunction,
    pub intensity: TimeFunction,
    pub jump_law: JumpLawConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderClassParams>,
    #[serde(default)]
    pub run: RunConfig,
}

/// Validated model, grid and options from a config.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub spec: ModelSpec,
    pub grid: Grid,
    pub holder: HolderClassParams,
    pub run: RunConfig,
}

fn as_config_error(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config { key: name, reason },
        other => other,
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| {
            let msg = e.message().to_string();
            let key = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "config".to_string());
            Error::config(key, msg)
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Builds and validates the model spec, grid and options.
    pub fn build(&self) -> Result<Experiment> {
        self.build_inner().map_err(as_config_error)
    }

    fn build_inner(&self) -> Result<Experiment> {
        let spec = ModelSpec::new(
            self.drift.clone(),
            self.sigma.clone(),
            self.epsilon_n,
            self.intensity.clone(),
            self.jump_law.build()?,
            self.horizon,
        )?
        .with_initial(self.initial);
        spec.validate()?;
        let grid = match &self.grid {
            GridConfig::Uniform => Grid::uniform(self.horizon, self.n)?,
            GridConfig::Explicit { times } => {
                let g = Grid::new(times.clone()).map_err(|e| match e {
                    Error::InvalidParameter { reason, .. } => Error::config("grid.times", reason),
                    other => other,
                })?;
                if g.n() != self.n {
                    return Err(Error::config("n", format!("grid has {} intervals but n = {}", g.n(), self.n)));
                }
                if (g.horizon() - self.horizon).abs() > 1e-12 * self.horizon {
                    return Err(Error::config("grid.times", "last time must equal horizon"));
                }
                g
            }
        };
        if let Some(c1) = self.c1 {
            if !check_sigma_log_derivative(|t| self.sigma.eval(t), c1, &grid)? {
                return Err(Error::config("C1", format!("|d/dt ln sigma| exceeds C1 = {c1}")));
            }
        }
        let holder = match self.holder {
            Some(h) => HolderClassParams::new(h.alpha, h.m, h.b).map_err(|e| match e {
                Error::InvalidParameter { reason, .. } => Error::config("holder", reason),
                other => other,
            })?,
            None => HolderClassParams::default(),
        };
        Ok(Experiment {
            spec,
            grid,
            holder,
            run: self.run.clone(),
        })
    }
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<(Config, Experiment)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    let cfg = Config::from_toml_str(&text)?;
    let exp = cfg.build()?;
    Ok((cfg, exp))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
horizon = 1.0
n = 8
epsilon_n = 0.5

[drift]
kind = "constant"
value = 0.0

[sigma]
kind = "constant"
value = 1

[intensity]
kind = "constant"
value = 0.0

[jump_law]
kind = "dirac"
point = 1.0
"#;

    const EXAMPLE_ONE: &str = r#"
horizon = 1.0
n = 64
epsilon_n = 1.0
C1 = 0.0

[drift]
kind = "sine"
amplitude = 1.0
frequency = 1.0

[sigma]
kind = "constant"
value = 1.0

[intensity]
kind = "constant"
value = 0.5

[jump_law]
kind = "dirac"
point = 1.0

[run]
seed = 7
n_list = [16, 32]
"#;

    #[test]
    fn minimal_config_is_valid() {
        let cfg = Config::from_toml_str(MINIMAL).unwrap();
        let exp = cfg.build().unwrap();
        assert_eq!(exp.grid.n(), 8);
        assert_eq!(exp.spec.sigma.eval(0.3), 1.0);
    }

    #[test]
    fn negative_epsilon_names_key() {
        let text = MINIMAL.replace("epsilon_n = 0.5", "epsilon_n = -0.5");
        let err = Config::from_toml_str(&text).unwrap().build().unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("epsilon_n"), "{err}");
    }

    #[test]
    fn missing_and_unknown_keys_are_named() {
        let text = MINIMAL.replace("epsilon_n = 0.5\n", "");
        let err = Config::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("epsilon_n"), "{err}");
        let text = MINIMAL.replace("kind = \"dirac\"", "kind = \"cauchy\"");
        let err = Config::from_toml_str(&text).unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("cauchy"), "{err}");
    }

    #[test]
    fn example_one_round_trips() {
        let cfg = Config::from_toml_str(EXAMPLE_ONE).unwrap();
        let first = cfg.build().unwrap();
        let text = cfg.to_toml_string().unwrap();
        let again = Config::from_toml_str(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.build().unwrap(), first);
    }

    #[test]
    fn c1_check_is_applied() {
        let text = EXAMPLE_ONE.replace("kind = \"constant\"\nvalue = 1.0", "kind = \"exponential\"\nscale = 1.0\nrate = 2.0");
        let err = Config::from_toml_str(&text).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("C1"), "{err}");
    }

    #[test]
    fn explicit_grid() {
        let text = MINIMAL.replace("n = 8", "n = 3") + "\n[grid]\nkind = \"explicit\"\ntimes = [0.0, 0.2, 0.7, 1.0]\n";
        let exp = Config::from_toml_str(&text).unwrap().build().unwrap();
        assert!((exp.grid.mesh() - 0.5).abs() < 1e-15);
        let bad = MINIMAL.to_string() + "\n[grid]\nkind = \"explicit\"\ntimes = [0.0, 0.7, 0.2, 1.0]\n";
        assert!(Config::from_toml_str(&bad).unwrap().build().is_err());
    }

    #[test]
    fn continuous_and_lattice_laws() {
        let text = MINIMAL.replace("kind = \"dirac\"\npoint = 1.0", "kind = \"uniform\"\nlo = -10.0\nhi = 10.0");
        let exp = Config::from_toml_str(&text).unwrap().build().unwrap();
        assert!(!exp.spec.jump_law.is_lattice());
        let text = MINIMAL.replace("kind = \"dirac\"\npoint = 1.0", "kind = \"lattice\"\nvalues = [1, 2]\nprobs = [0.5, 0.6]");
        let err = Config::from_toml_str(&text).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("pmf") || err.to_string().contains("jump_law"), "{err}");
    }
}
