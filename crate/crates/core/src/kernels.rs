//! Jump-erasing Markov kernels and the statistics used to pass between the
//! discrete and continuous experiments.
//!
//! * lattice rounding x ↦ x − [x] for integer-valued jumps,
//! * truncate-and-resample for jumps with a density,
//! * the estimator transfer built on rounding,
//! * the continuous-part and weighted-integral statistics.

use std::cell::Cell;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::laws::{Density, Part, Term, Window};
use crate::model::Grid;
use crate::quad::{integrate_with, QuadOptions};
use crate::rng::RngStream;
use crate::simulate::PathSample;

/// x − [x], with [x] the nearest integer and half-integers going to the even
/// neighbour. The result lies in [−½, ½].
#[inline]
pub fn round_to_lattice(x: f64) -> f64 {
    x - x.round_ties_even()
}

/// Coordinatewise [`round_to_lattice`].
pub fn apply_round_kernel(samples: &[f64]) -> Vec<f64> {
    samples.iter().map(|&x| round_to_lattice(x)).collect()
}

/// Pushforward of `d` under x ↦ x − [x]: Σₗ d(x + l) on [−½, ½).
pub fn fold_density_to_lattice_cell(d: &Density) -> Density {
    d.fold_to_cell()
}

/// Parameters of the truncate-and-resample kernel on one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncateResampleParams {
    /// Uniform bound L on |mᵢ|.
    pub l: f64,
    /// Kernel exponent ε in (0, 0.5].
    pub epsilon: f64,
    pub sigma_i: f64,
}

impl TruncateResampleParams {
    pub fn new(l: f64, epsilon: f64, sigma_i: f64) -> Result<Self> {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::invalid("L", "must be finite and nonnegative"));
        }
        if !(epsilon > 0.0 && epsilon <= 0.5) {
            return Err(Error::invalid("epsilon", "must lie in (0, 0.5]"));
        }
        if !(sigma_i > 0.0 && sigma_i.is_finite()) {
            return Err(Error::invalid("sigma_i", "must be positive"));
        }
        Ok(Self { l, epsilon, sigma_i })
    }

    /// βᵢ = L + σᵢ^{1−ε}.
    pub fn beta(&self) -> f64 {
        self.l + self.sigma_i.powf(1.0 - self.epsilon)
    }
}

/// Keeps x when |x| ≤ βᵢ, otherwise replaces it by a fresh N(0, σᵢ²) draw.
pub fn truncate_resample(x: f64, params: &TruncateResampleParams, rng: &mut RngStream) -> f64 {
    if x.abs() <= params.beta() {
        x
    } else {
        Normal::new(0.0, params.sigma_i).expect("positive sd").sample(rng)
    }
}

/// Pushforward of `d` under the truncate-and-resample kernel: `d` restricted
/// to [−βᵢ, βᵢ] plus the outside mass spread as N(0, σᵢ²).
pub fn truncate_resample_density(d: &Density, params: &TruncateResampleParams) -> Result<Density> {
    let beta = params.beta();
    let mut parts = Vec::with_capacity(d.parts().len() + 1);
    for p in d.parts() {
        if p.folded {
            return Err(Error::invalid("density", "cannot truncate a folded density"));
        }
        let window = match p.window {
            Window::Line => Window::Interval(-beta, beta),
            Window::Interval(a, b) => Window::Interval(a.max(-beta), b.min(beta)),
        };
        parts.push(Part {
            weight: p.weight,
            term: p.term.clone(),
            window,
            folded: false,
        });
    }
    let inside = d.mass_between(-beta, beta)?;
    let outside = (1.0 - inside).max(0.0);
    parts.push(Part::line(
        outside,
        Term::Gauss {
            base: 0.0,
            shift: 0,
            sd: params.sigma_i,
        },
    ));
    let atoms = d.atoms().iter().copied().filter(|(x, _)| x.abs() <= beta).collect();
    let s = 12.0 * params.sigma_i;
    Ok(Density::new(parts, atoms, (-(beta.max(s)), beta.max(s))))
}

/// γₙ: differences the observations, rounds every increment onto the lattice
/// cell and hands the result to `delta`.
pub fn transfer_estimator<T>(delta: impl FnOnce(&[f64]) -> T, observations: &[f64], n: usize) -> Result<T> {
    if observations.len() != n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            actual: observations.len(),
        });
    }
    let rounded: Vec<f64> = observations.windows(2).map(|w| round_to_lattice(w[1] - w[0])).collect();
    Ok(delta(&rounded))
}

/// Increments with the simulated jumps removed.
pub fn continuous_part(path: &PathSample) -> Vec<f64> {
    let sums = path.jump_sums();
    path.increments.iter().zip(sums).map(|(x, j)| x - j).collect()
}

fn inverse_variance_integral(sigma_n2: &impl Fn(f64) -> f64, a: f64, b: f64, i: usize) -> Result<f64> {
    let bad = Cell::new(None);
    let v = integrate_with(
        &|t| {
            let s = sigma_n2(t);
            if !(s > 0.0) {
                bad.set(Some(t));
                return 0.0;
            }
            1.0 / s
        },
        a,
        b,
        &[],
        QuadOptions::abs(1e-12),
        &format!("1/sigma_n^2 on interval {}", i + 1),
    )?
    .value;
    if let Some(t) = bad.get() {
        return Err(Error::invalid("sigma_n", format!("non-positive variance at t = {t}")));
    }
    Ok(v)
}

/// Per interval, the increment divided by σₙ²(ξᵢ), where ξᵢ is the
/// mean-value point with ∫ dt/σₙ² = (tᵢ − tᵢ₋₁)/σₙ²(ξᵢ).
pub fn weighted_integral_statistic(
    increments: &[f64],
    sigma_n2: impl Fn(f64) -> f64,
    grid: &Grid,
) -> Result<Vec<f64>> {
    if increments.len() != grid.n() {
        return Err(Error::LengthMismatch {
            expected: grid.n(),
            actual: increments.len(),
        });
    }
    (0..grid.n())
        .map(|i| {
            let (a, b) = grid.interval(i);
            let integral = inverse_variance_integral(&sigma_n2, a, b, i)?;
            Ok(increments[i] * integral / (b - a))
        })
        .collect()
}

/// The point ξ in [a, b] with σₙ²(ξ) = (b − a)/∫ₐᵇ dt/σₙ², found by bisection.
pub fn mean_value_point(sigma_n2: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let integral = inverse_variance_integral(&sigma_n2, a, b, 0)?;
    let target = (b - a) / integral;
    let g = |t: f64| sigma_n2(t) - target;
    let (mut lo, mut hi) = (a, b);
    let (glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 || glo.signum() == ghi.signum() {
        // constant variance, or the mean value is attained at an endpoint
        return Ok(if glo.abs() <= ghi.abs() { lo } else { hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid).signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{bernoulli_density, gaussian_density, increment_density_exact, DEFAULT_TAIL_TOL};
    use crate::model::{IncrementSummary, JumpLaw};
    use crate::oracle::tv_quadrature;
    use crate::special::{norm_cdf, norm_pdf};
    use proptest::prelude::*;

    #[test]
    fn rounding_examples() {
        assert!((round_to_lattice(0.4) - 0.4).abs() < 1e-15);
        assert!((round_to_lattice(1.7) + 0.3).abs() < 1e-15);
        assert_eq!(round_to_lattice(0.5), 0.5);
        assert_eq!(round_to_lattice(1.5), -0.5);
        assert_eq!(round_to_lattice(-0.5), -0.5);
        for x in [0.0, 0.25, 0.49] {
            for k in -3..=3 {
                assert!((round_to_lattice(x + k as f64) - round_to_lattice(x)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn round_kernel_examples() {
        assert_eq!(apply_round_kernel(&[0.0; 3]), vec![0.0; 3]);
        let r = apply_round_kernel(&[1.3, -0.9, 0.2]);
        for (a, b) in r.iter().zip([0.3, 0.1, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(apply_round_kernel(&r), r);
    }

    #[test]
    fn folding_examples() {
        let g = gaussian_density(0.0, 1e-4).unwrap();
        let f = fold_density_to_lattice_cell(&g);
        assert!(tv_quadrature(&f, &g).unwrap() < 1e-12);

        let mut s = IncrementSummary::new(0.0, 1e-4, 1.0).unwrap();
        s.alpha = 0.1;
        let mix = bernoulli_density(&s, &JumpLaw::dirac(1.0));
        let f = fold_density_to_lattice_cell(&mix);
        assert!(2.0 * tv_quadrature(&f, &g).unwrap() < 1e-9);
        assert!((f.total_mass().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn folding_commutes_with_integer_translation() {
        let s = IncrementSummary::new(0.17, 0.09, 0.7).unwrap();
        let d = increment_density_exact(&s, &JumpLaw::dirac(1.0), DEFAULT_TAIL_TOL).unwrap();
        let a = fold_density_to_lattice_cell(&d);
        let b = fold_density_to_lattice_cell(&d.translate_integer(3));
        for k in 0..50 {
            let x = -0.5 + k as f64 / 50.0;
            assert!((a.eval(x) - b.eval(x)).abs() < 1e-12);
        }
        assert!((a.total_mass().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn truncate_examples() {
        let p = TruncateResampleParams::new(0.1, 0.5, 0.01).unwrap();
        let beta = p.beta();
        assert!((beta - 0.2).abs() < 1e-15);
        let mut rng = RngStream::new(1, 0);
        assert_eq!(truncate_resample(0.0, &p, &mut rng), 0.0);
        assert_eq!(truncate_resample(beta, &p, &mut rng), beta);
        assert_eq!(truncate_resample(-beta, &p, &mut rng), -beta);

        // resample branch: Kolmogorov–Smirnov against N(0, σ²)
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| truncate_resample(10.0 * beta, &p, &mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = norm_cdf(x / 0.01);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.63 / (n as f64).sqrt(), "KS = {d}");
    }

    #[test]
    fn truncate_pushforward_has_unit_mass() {
        let s = IncrementSummary::new(0.05, 0.0025, 0.3).unwrap();
        let law = JumpLaw::Continuous(crate::model::ContinuousJump::uniform(-10.0, 10.0).unwrap());
        let b = bernoulli_density(&s, &law);
        let p = TruncateResampleParams::new(1.0 / 3.0, 0.5, 0.05).unwrap();
        let k = truncate_resample_density(&b, &p).unwrap();
        assert!((k.total_mass().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn transfer_examples() {
        let obs = [0.0, 1.3, 1.1];
        let got = transfer_estimator(|x| x.to_vec(), &obs, 2).unwrap();
        assert!((got[0] - 0.3).abs() < 1e-12 && (got[1] + 0.2).abs() < 1e-12);
        let obs = [0.0, 0.1, -0.2, 0.1];
        let raw: Vec<f64> = obs.windows(2).map(|w| w[1] - w[0]).collect();
        assert_eq!(transfer_estimator(|x| x.to_vec(), &obs, 3).unwrap(), raw);
        assert!(matches!(
            transfer_estimator(|x| x.len(), &obs, 5),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn continuous_part_bookkeeping() {
        let path = PathSample {
            increments: vec![0.1, 0.2, 2.3, -0.1],
            gaussian_parts: vec![0.1, 0.2, 0.3, -0.1],
            jump_times: vec![0.6],
            jump_sizes: vec![2.0],
            jump_intervals: vec![2],
            times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            initial: 0.0,
        };
        let c = continuous_part(&path);
        assert!((c[2] - 0.3).abs() < 1e-15);
        assert_eq!(c[0], 0.1);
        assert_eq!(c[3], -0.1);
    }

    #[test]
    fn weighted_statistic_examples() {
        let grid = Grid::uniform(1.0, 4).unwrap();
        let x = [0.4, -1.0, 2.0, 0.0];
        let y = weighted_integral_statistic(&x, |_| 1.0, &grid).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
        let y = weighted_integral_statistic(&x, |_| 4.0, &grid).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a / 4.0 - b).abs() < 1e-12);
        }
        let xi = mean_value_point(|t| (1.0 + t) * (1.0 + t), 0.0, 1.0).unwrap();
        assert!((xi - (2f64.sqrt() - 1.0)).abs() < 1e-9);
        let one = Grid::uniform(1.0, 1).unwrap();
        let y = weighted_integral_statistic(&[1.0], |t| (1.0 + t) * (1.0 + t), &one).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-10);
        assert!(weighted_integral_statistic(&[1.0], |t| t - 0.5, &one).is_err());
    }

    #[test]
    fn kernel_erases_dirac_jumps_within_bound() {
        // both sides folded: the kernel removes every trace of integer jumps
        for &sd in &[0.05, 0.1, 0.15] {
            for &m in &[0.0, 0.2, 1.0 / 3.0] {
                let s = IncrementSummary::new(m, sd * sd, 0.3).unwrap();
                let fb = fold_density_to_lattice_cell(&bernoulli_density(&s, &JumpLaw::dirac(1.0)));
                let fg = fold_density_to_lattice_cell(&gaussian_density(m, sd * sd).unwrap());
                let tv = tv_quadrature(&fb, &fg).unwrap();
                let z = 1.0 / (6.0 * sd);
                let bound = 6.0 / sd * norm_pdf(z) + 4.0 * norm_cdf(-z);
                assert!(tv <= bound + 1e-12, "sd {sd} m {m}: {tv} > {bound}");
            }
        }
    }

    proptest! {
        #[test]
        fn rounding_is_bounded_and_periodic(x in -1e6f64..1e6, k in -50i64..50) {
            let r = round_to_lattice(x);
            prop_assert!(r.abs() <= 0.5);
            let shifted = round_to_lattice(x + k as f64);
            prop_assert!((shifted - r).abs() < 1e-9 || (shifted - r).abs() > 1.0 - 1e-9);
        }

        #[test]
        fn truncate_is_identity_inside(x in -0.2f64..0.2, seed in any::<u64>()) {
            let p = TruncateResampleParams::new(0.1, 0.5, 0.01).unwrap();
            let mut rng = RngStream::new(seed, 0);
            let before = rand::RngCore::next_u64(&mut rng.clone());
            prop_assert_eq!(truncate_resample(x, &p, &mut rng), x);
            prop_assert_eq!(rand::RngCore::next_u64(&mut rng), before);
        }

        #[test]
        fn transfer_is_identity_inside_cell(incs in proptest::collection::vec(-0.49f64..0.49, 1..20)) {
            let mut obs = vec![0.0];
            for d in &incs {
                let last = *obs.last().unwrap();
                obs.push(last + d);
            }
            let direct: Vec<f64> = obs.windows(2).map(|w| w[1] - w[0]).collect();
            let via = transfer_estimator(|x| x.to_vec(), &obs, incs.len()).unwrap();
            prop_assert_eq!(via, direct);
        }
    }
}
