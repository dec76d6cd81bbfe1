//! Exact-law sampling of the jump-diffusion increments, the white-noise
//! increments, and the single-jump (Bernoulli) approximation.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::model::{Grid, IncrementSummaries, ModelSpec};
use crate::rng::RngStream;

/// One simulated path observed on a grid, with its jump bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub increments: Vec<f64>,
    pub gaussian_parts: Vec<f64>,
    pub jump_times: Vec<f64>,
    pub jump_sizes: Vec<f64>,
    /// Interval index (0-based) of every jump.
    pub jump_intervals: Vec<usize>,
    pub times: Vec<f64>,
    pub initial: f64,
}

impl PathSample {
    /// X_{t₀}, …, X_{tₙ}.
    pub fn observations(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut x = self.initial;
        out.push(x);
        for d in &self.increments {
            x += d;
            out.push(x);
        }
        out
    }

    /// Number of jumps in every interval.
    pub fn jump_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.increments.len()];
        for &i in &self.jump_intervals {
            c[i] += 1;
        }
        c
    }

    /// Sum of jump sizes in every interval.
    pub fn jump_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.increments.len()];
        for (&i, &y) in self.jump_intervals.iter().zip(&self.jump_sizes) {
            s[i] += y;
        }
        s
    }
}

/// Inhomogeneous Poisson arrival times on (0, horizon] by thinning a
/// homogeneous process of rate `lambda_max`.
pub fn sample_inhomogeneous_poisson(
    intensity: impl Fn(f64) -> f64,
    lambda_max: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
        return Err(Error::invalid("lambda_max", "must be finite and nonnegative"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    let mut out = Vec::new();
    if lambda_max == 0.0 {
        return Ok(out);
    }
    let gap = Exp::new(lambda_max).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t > horizon {
            break;
        }
        let value = intensity(t);
        if value > lambda_max * (1.0 + 1e-12) {
            return Err(Error::DominationViolated { t, value, lambda_max });
        }
        let u: f64 = rng.random();
        if u * lambda_max < value {
            out.push(t);
        }
    }
    Ok(out)
}

fn check_lengths(grid: &Grid, summaries: &IncrementSummaries) -> Result<()> {
    if grid.n() != summaries.len() {
        return Err(Error::LengthMismatch {
            expected: grid.n(),
            actual: summaries.len(),
        });
    }
    Ok(())
}

fn gaussian_draws(summaries: &IncrementSummaries, rng: &mut RngStream) -> Vec<f64> {
    summaries
        .iter()
        .map(|s| Normal::new(s.m, s.sd()).expect("positive variance").sample(rng))
        .collect()
}

/// Increments of the jump-diffusion: Normal(mᵢ, σᵢ²) continuous parts plus the
/// compound-Poisson jumps falling in (tᵢ₋₁, tᵢ].
pub fn sample_path(
    spec: &ModelSpec,
    grid: &Grid,
    summaries: &IncrementSummaries,
    rng: &mut RngStream,
) -> Result<PathSample> {
    check_lengths(grid, summaries)?;
    let gaussian_parts = gaussian_draws(summaries, rng);
    let jump_times = sample_inhomogeneous_poisson(
        |t| spec.intensity.eval(t),
        spec.intensity_bound(),
        grid.horizon(),
        rng,
    )?;
    let jump_sizes: Vec<f64> = jump_times.iter().map(|_| spec.jump_law.sample(rng)).collect();
    let jump_intervals: Vec<usize> = jump_times.iter().map(|&t| grid.interval_of(t)).collect();
    let mut increments = gaussian_parts.clone();
    for (&i, &y) in jump_intervals.iter().zip(&jump_sizes) {
        increments[i] += y;
    }
    Ok(PathSample {
        increments,
        gaussian_parts,
        jump_times,
        jump_sizes,
        jump_intervals,
        times: grid.times().to_vec(),
        initial: spec.initial,
    })
}

/// Independent Normal(mᵢ, σᵢ²) increments of the white-noise model.
pub fn sample_white_noise_increments(
    grid: &Grid,
    summaries: &IncrementSummaries,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_lengths(grid, summaries)?;
    Ok(gaussian_draws(summaries, rng))
}

/// Normal(mᵢ, σᵢ²) + Bᵢ Y with Bᵢ ~ Bernoulli(αᵢ) and Y from the jump law.
pub fn sample_bernoulli_approx(
    spec: &ModelSpec,
    grid: &Grid,
    summaries: &IncrementSummaries,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_lengths(grid, summaries)?;
    let mut out = gaussian_draws(summaries, rng);
    for (x, s) in out.iter_mut().zip(summaries.iter()) {
        let u: f64 = rng.random();
        if u < s.alpha {
            *x += spec.jump_law.sample(rng);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{bernoulli_density, increment_cf};
    use crate::model::{build_increment_summaries, ContinuousJump, JumpLaw, TimeFunction};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn spec(lambda: TimeFunction, law: JumpLaw, eps: f64) -> ModelSpec {
        ModelSpec::new(
            TimeFunction::constant(0.0),
            TimeFunction::constant(1.0),
            eps,
            lambda,
            law,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_intensity_gives_no_jumps() {
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            assert!(sample_inhomogeneous_poisson(|_| 0.0, 0.0, 1.0, &mut rng).unwrap().is_empty());
            assert!(sample_inhomogeneous_poisson(|_| 0.0, 3.0, 1.0, &mut rng).unwrap().is_empty());
        }
        let s = spec(TimeFunction::constant(0.0), JumpLaw::dirac(1.0), 1.0);
        let grid = Grid::uniform(1.0, 5).unwrap();
        let sums = build_increment_summaries(&s, &grid).unwrap();
        let p = sample_path(&s, &grid, &sums, &mut rng).unwrap();
        assert!(p.jump_times.is_empty());
        assert_eq!(p.increments, p.gaussian_parts);
    }

    #[test]
    fn poisson_counts() {
        let reps = 100_000;
        let mut rng = RngStream::new(7, 1);
        let mut total = 0usize;
        for _ in 0..reps {
            let t = sample_inhomogeneous_poisson(|_| 2.0, 2.0, 1.0, &mut rng).unwrap();
            assert!(t.windows(2).all(|w| w[0] <= w[1]));
            total += t.len();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 2.0).abs() < 3.0 * 2f64.sqrt() / (reps as f64).sqrt(), "{mean}");

        let mut total = 0usize;
        for _ in 0..reps {
            total += sample_inhomogeneous_poisson(|t| t, 1.05, 1.0, &mut rng).unwrap().len();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 0.5).abs() < 3.0 * 0.5f64.sqrt() / (reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn domination_violation_is_reported() {
        let mut rng = RngStream::new(3, 0);
        let err = sample_inhomogeneous_poisson(|_| 5.0, 1.0, 10.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::DominationViolated { .. }));
    }

    #[test]
    fn compound_poisson_terminal_mean() {
        let s = spec(TimeFunction::constant(10.0), JumpLaw::dirac(1.0), 0.01);
        let grid = Grid::uniform(1.0, 10).unwrap();
        let sums = build_increment_summaries(&s, &grid).unwrap();
        let mut rng = RngStream::new(11, 0);
        let reps = 10_000;
        let mut acc = 0.0;
        for _ in 0..reps {
            let p = sample_path(&s, &grid, &sums, &mut rng).unwrap();
            acc += p.observations()[10];
        }
        let mean = acc / reps as f64;
        assert!((mean - 10.0).abs() < 3.0 * 10f64.sqrt() / 100.0, "{mean}");
    }

    #[test]
    fn path_bookkeeping() {
        let s = spec(TimeFunction::sine(2.0, 1.0, 6.0, 0.0), JumpLaw::dirac(1.0), 0.3);
        let grid = Grid::uniform(1.0, 7).unwrap();
        let sums = build_increment_summaries(&s, &grid).unwrap();
        let mut rng = RngStream::new(5, 9);
        for _ in 0..200 {
            let p = sample_path(&s, &grid, &sums, &mut rng).unwrap();
            let js = p.jump_sums();
            for i in 0..7 {
                assert!((p.increments[i] - p.gaussian_parts[i] - js[i]).abs() < 1e-12);
            }
            for (&t, &i) in p.jump_times.iter().zip(&p.jump_intervals) {
                let (a, b) = grid.interval(i);
                assert!(t > a && t <= b);
            }
            assert!(p.jump_times.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn white_noise_moments() {
        let s = spec(TimeFunction::constant(0.0), JumpLaw::dirac(1.0), 1.0);
        let grid = Grid::uniform(1.0, 4).unwrap();
        let sums = build_increment_summaries(&s, &grid).unwrap();
        let mut rng = RngStream::new(21, 0);
        let reps = 100_000;
        let mut sum = [0.0; 4];
        let mut sq = [0.0; 4];
        for _ in 0..reps {
            let x = sample_white_noise_increments(&grid, &sums, &mut rng).unwrap();
            for i in 0..4 {
                sum[i] += x[i];
                sq[i] += x[i] * x[i];
            }
        }
        let r = reps as f64;
        for i in 0..4 {
            let mean = sum[i] / r;
            let var = sq[i] / r - mean * mean;
            assert!(mean.abs() < 3.0 * 0.5 / r.sqrt());
            assert!((var - 0.25).abs() < 3.0 * 0.25 * 2f64.sqrt() / r.sqrt());
        }
    }

    #[test]
    fn sd_scales_with_epsilon() {
        let grid = Grid::uniform(1.0, 4).unwrap();
        let mut sds = Vec::new();
        for eps in [0.1, 0.01] {
            let s = spec(TimeFunction::constant(0.0), JumpLaw::dirac(1.0), eps);
            let sums = build_increment_summaries(&s, &grid).unwrap();
            let mut rng = RngStream::new(2, 0);
            let xs: Vec<f64> = (0..20_000)
                .map(|_| sample_white_noise_increments(&grid, &sums, &mut rng).unwrap()[0])
                .collect();
            let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
            sds.push(var.sqrt());
        }
        assert!((sds[0] / sds[1] - 10.0).abs() < 0.5);
    }

    #[test]
    fn bernoulli_frequency_and_dkw() {
        let s = spec(TimeFunction::constant(0.0), JumpLaw::dirac(1.0), 0.05);
        let grid = Grid::uniform(1.0, 1).unwrap();
        let mut sums = build_increment_summaries(&s, &grid).unwrap();
        sums.items[0].alpha = 0.1;
        let mut rng = RngStream::new(8, 0);
        let reps = 100_000;
        let xs: Vec<f64> = (0..reps)
            .map(|_| sample_bernoulli_approx(&s, &grid, &sums, &mut rng).unwrap()[0])
            .collect();
        let far = xs.iter().filter(|x| x.abs() > 0.5).count() as f64 / reps as f64;
        assert!((far - 0.1).abs() < 3.0 * (0.09f64 / reps as f64).sqrt(), "{far}");

        let d = bernoulli_density(&sums[0], &s.jump_law);
        let mut sorted = xs;
        sorted.sort_by(f64::total_cmp);
        let band = ((2.0f64 / 0.01).ln() / (2.0 * reps as f64)).sqrt();
        for q in [0.05, 0.3, 0.5, 0.85, 0.92, 0.99] {
            let idx = (q * reps as f64) as usize;
            let x = sorted[idx];
            let cdf = d.mass_between(-10.0, x).unwrap();
            assert!((cdf - q).abs() < band, "q = {q}");
        }
    }

    #[test]
    fn empirical_cf_matches_formula() {
        let law = JumpLaw::Continuous(ContinuousJump::uniform(-1.0, 2.0).unwrap());
        let s = spec(TimeFunction::constant(2.0), law.clone(), 0.5);
        let grid = Grid::uniform(1.0, 2).unwrap();
        let sums = build_increment_summaries(&s, &grid).unwrap();
        let mut rng = RngStream::new(4, 4);
        let reps = 40_000;
        let xs: Vec<f64> = (0..reps)
            .map(|_| sample_path(&s, &grid, &sums, &mut rng).unwrap().increments[1])
            .collect();
        for k in -6..=6 {
            let u = 0.5 * k as f64;
            let emp: Complex64 = xs.iter().map(|&x| Complex64::new(0.0, u * x).exp()).sum::<Complex64>() / reps as f64;
            let th = increment_cf(&sums[1], &law, u);
            assert!((emp - th).norm() < 5.0 / (reps as f64).sqrt(), "u = {u}");
        }
    }

    proptest! {
        #[test]
        fn reproducible(seed in any::<u64>(), stream in any::<u64>()) {
            let s = spec(TimeFunction::constant(3.0), JumpLaw::dirac(1.0), 0.2);
            let grid = Grid::uniform(1.0, 6).unwrap();
            let sums = build_increment_summaries(&s, &grid).unwrap();
            let a = sample_path(&s, &grid, &sums, &mut RngStream::new(seed, stream)).unwrap();
            let b = sample_path(&s, &grid, &sums, &mut RngStream::new(seed, stream)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
