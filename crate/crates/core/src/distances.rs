//! Closed-form distances between Gaussian laws and the per-increment and
//! aggregate bounds for the Bernoulli approximation and the two kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Grid, IncrementSummaries, JumpLaw, ModelSpec};
use crate::quad::{integrate_with, QuadOptions};
use crate::special::{norm_cdf, norm_pdf};

/// Lattice (integer) jumps or jumps with a density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpCase {
    Lattice,
    Continuous,
}

impl JumpCase {
    pub fn of(law: &JumpLaw) -> Self {
        if law.is_lattice() {
            JumpCase::Lattice
        } else {
            JumpCase::Continuous
        }
    }
}

/// Per-increment bounds and their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub per_increment: Vec<f64>,
    /// Raw aggregate, possibly above the trivial ceiling 1.
    pub aggregate: f64,
    pub formula_name: String,
    pub warnings: Vec<String>,
}

impl BoundReport {
    fn from_terms(per_increment: Vec<f64>, formula_name: &str, aggregate: f64) -> Self {
        let mut warnings = Vec::new();
        if aggregate > 1.0 {
            warnings.push(format!("aggregate {aggregate} exceeds 1: bound is vacuous"));
        }
        Self {
            per_increment,
            aggregate,
            formula_name: formula_name.to_string(),
            warnings,
        }
    }

    /// Aggregate clamped to the TV ceiling 1.
    pub fn clamped(&self) -> f64 {
        self.aggregate.min(1.0)
    }

    pub fn is_vacuous(&self) -> bool {
        self.aggregate > 1.0
    }
}

fn check_sd(name: &str, s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(name, format!("standard deviation {s} must be positive")));
    }
    Ok(())
}

/// √((1 − s/S)² + (μ₁ − μ₂)²/(2S²)) with s ≤ S the two standard deviations:
/// the smaller of the two orderings. Raw value, not clamped.
pub fn tv_gaussians_bound(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<f64> {
    check_sd("sigma1", sigma1)?;
    check_sd("sigma2", sigma2)?;
    let one = |s1: f64, s2: f64| {
        let d = mu1 - mu2;
        ((1.0 - s1 / s2).powi(2) + d * d / (2.0 * s2 * s2)).sqrt()
    };
    Ok(one(sigma1, sigma2).min(one(sigma2, sigma1)))
}

/// [`tv_gaussians_bound`] clamped to [0, 1].
pub fn tv_gaussians_bound_clamped(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<f64> {
    tv_gaussians_bound(mu1, sigma1, mu2, sigma2).map(|v| v.clamp(0.0, 1.0))
}

/// ln(σ₂/σ₁) + (σ₁²/σ₂² − 1)/2 + (μ₁ − μ₂)²/(2σ₁²).
pub fn kl_gaussians(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<f64> {
    check_sd("sigma1", sigma1)?;
    check_sd("sigma2", sigma2)?;
    let d = mu1 - mu2;
    Ok((sigma2 / sigma1).ln() + 0.5 * (sigma1 * sigma1 / (sigma2 * sigma2) - 1.0) + d * d / (2.0 * sigma1 * sigma1))
}

/// L1 distance between N(μ₁, σ²) and N(μ₂, σ²): 2(1 − 2Φ(−|μ₂ − μ₁|/(2σ))).
pub fn l1_gaussians_same_var(mu1: f64, mu2: f64, sigma: f64) -> Result<f64> {
    check_sd("sigma", sigma)?;
    Ok(2.0 * (1.0 - 2.0 * norm_cdf(-(mu2 - mu1).abs() / (2.0 * sigma))))
}

/// L1 distance between two Gaussian processes with drifts m₁, m₂ and common
/// diffusion σ observed on [0, t]: 2(1 − 2Φ(−D/2)), D² = ∫₀ᵗ (m₁ − m₂)²/σ².
pub fn l1_gaussian_processes(
    m1: impl Fn(f64) -> f64,
    m2: impl Fn(f64) -> f64,
    sigma: impl Fn(f64) -> f64,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", "must be positive"));
    }
    let d2 = integrate_with(
        &|s| {
            let d = m1(s) - m2(s);
            let v = sigma(s);
            d * d / (v * v)
        },
        0.0,
        t,
        &[],
        QuadOptions::abs(1e-12),
        "(m1 - m2)^2 / sigma^2",
    )?
    .value;
    Ok(2.0 * (1.0 - 2.0 * norm_cdf(-0.5 * d2.max(0.0).sqrt())))
}

/// √(Σ 2 TVᵢ): TV bound for product laws from per-coordinate TVs.
pub fn hellinger_product_tv_bound(per_increment_tv: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (i, &v) in per_increment_tv.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid("per_increment_tv", format!("entry {i} = {v} is outside [0, 1]")));
        }
        s += 2.0 * v;
    }
    Ok(s.sqrt())
}

/// Single-jump approximation: 2λᵢ² per increment, 2√(Σλᵢ²) overall.
pub fn bernoulli_aggregate_bound(summaries: &IncrementSummaries) -> BoundReport {
    let per: Vec<f64> = summaries.iter().map(|s| 2.0 * s.lambda * s.lambda).collect();
    let agg = 2.0 * summaries.iter().map(|s| s.lambda * s.lambda).sum::<f64>().sqrt();
    BoundReport::from_terms(per, "bernoulli", agg)
}

/// (6/σ) ϕ(1/(6σ)) + 4Φ(−1/(6σ)).
pub fn lattice_rounding_term(sigma: f64) -> f64 {
    let z = 1.0 / (6.0 * sigma);
    6.0 / sigma * norm_pdf(z) + 4.0 * norm_cdf(-z)
}

/// Rounding kernel: per-increment [`lattice_rounding_term`], aggregate
/// √(2Σ). Increments with |mᵢ| > 1/3 are flagged.
pub fn discrete_kernel_aggregate_bound(summaries: &IncrementSummaries) -> BoundReport {
    let per: Vec<f64> = summaries.iter().map(|s| lattice_rounding_term(s.sd())).collect();
    let agg = (2.0 * per.iter().sum::<f64>()).sqrt();
    let mut report = BoundReport::from_terms(per, "lattice_rounding", agg);
    for (i, s) in summaries.iter().enumerate() {
        if s.m.abs() > 1.0 / 3.0 {
            report
                .warnings
                .push(format!("interval {}: |m_i| = {} > 1/3, bound not guaranteed", i + 1, s.m.abs()));
        }
    }
    report
}

/// 8Φ(−σ^{−ε}) + α|m|/(√2 σ) + 2α ∫_{−2β}^{2β} h with β = L + σ^{1−ε}.
pub fn truncate_resample_term(m: f64, sigma: f64, alpha: f64, l: f64, epsilon: f64, mass: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let beta = l + sigma.powf(1.0 - epsilon);
    let h_mass = mass(beta)?;
    Ok(8.0 * norm_cdf(-sigma.powf(-epsilon)) + alpha * m.abs() / (std::f64::consts::SQRT_2 * sigma) + 2.0 * alpha * h_mass)
}

/// Truncate-and-resample kernel bound, aggregate √(2Σ).
pub fn continuous_kernel_aggregate_bound(
    summaries: &IncrementSummaries,
    l: f64,
    epsilon: f64,
    jump_law: &JumpLaw,
) -> Result<BoundReport> {
    let JumpLaw::Continuous(c) = jump_law else {
        return Err(Error::invalid("jump_law", "truncate-resample bound needs a jump density"));
    };
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::invalid("epsilon", "must lie in (0, 0.5]"));
    }
    if !(l >= 0.0) {
        return Err(Error::invalid("L", "must be nonnegative"));
    }
    let mut per = Vec::with_capacity(summaries.len());
    for (i, s) in summaries.iter().enumerate() {
        if s.m.abs() > l {
            return Err(Error::invalid(
                "L",
                format!("interval {}: |m_i| = {} exceeds L = {l}", i + 1, s.m.abs()),
            ));
        }
        per.push(truncate_resample_term(s.m, s.sd(), s.alpha, l, epsilon, |beta| {
            c.mass_between(-2.0 * beta, 2.0 * beta)
        })?);
    }
    let agg = (2.0 * per.iter().sum::<f64>()).sqrt();
    Ok(BoundReport::from_terms(per, "truncate_resample", agg))
}

/// ∫₀^{Tₙ} (f − f̄ₙ)²/σₙ², integrated interval by interval.
pub fn drift_discretization_error(f: impl Fn(f64) -> f64, spec: &ModelSpec, grid: &Grid) -> Result<f64> {
    let mut total = 0.0;
    let opts = QuadOptions::abs(1e-12 / grid.n() as f64);
    for i in 0..grid.n() {
        let (a, b) = grid.interval(i);
        let fb = f(b);
        total += integrate_with(
            &|t| {
                let d = f(t) - fb;
                let s = spec.sigma_n(t);
                d * d / (s * s)
            },
            a,
            b,
            &[],
            opts,
            &format!("(f - f_bar)^2 / sigma_n^2 on interval {}", i + 1),
        )?
        .value;
    }
    Ok(total)
}

/// Rate shape √Δ (lattice) or Δ^{1/4} (continuous) + TΔ^{2α}ε⁻² + TΔ.
pub fn theorem_rate(delta_n: f64, t_n: f64, epsilon_n: f64, holder: &crate::model::HolderClassParams, jump_case: JumpCase) -> f64 {
    let lead = match jump_case {
        JumpCase::Lattice => delta_n.sqrt(),
        JumpCase::Continuous => delta_n.sqrt().sqrt(),
    };
    lead + t_n * delta_n.powf(2.0 * holder.alpha) / (epsilon_n * epsilon_n) + t_n * delta_n
}

/// The truncation radius B(tᵢ − tᵢ₋₁) + √σᵢ appearing in the rate statement
/// for the continuous case (the kernel itself uses L + σᵢ^{1−ε}).
pub fn rate_statement_beta(b: f64, dt: f64, sigma_i: f64) -> f64 {
    b * dt + sigma_i.sqrt()
}
