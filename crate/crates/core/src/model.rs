//! Experiment parameterisation: drift, diffusion scale, jump intensity, jump
//! law, observation grid, and the per-interval summaries (mᵢ, σᵢ², λᵢ, αᵢ)
//! that every downstream law and bound is written in terms of.

use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::PiecewiseLinear;
use crate::quad::{integrate_with, QuadOptions};
use crate::special::norm_mass;

/// Absolute tolerance for every interval integral.
pub const QUAD_TOL: f64 = 1e-10;

/// Number of probe points used by invariant checks on [0, horizon].
const PROBES: usize = 1001;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied function of time with an optional antiderivative.
#[derive(Clone)]
pub struct CustomFn {
    pub name: String,
    pub f: RealFn,
    pub antiderivative: Option<RealFn>,
}

impl CustomFn {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            antiderivative: None,
        }
    }

    pub fn with_antiderivative(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.antiderivative = Some(Arc::new(g));
        self
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Custom({})", self.name)
    }
}

/// Real function of time. Constant and affine functions integrate in closed
/// form; everything else goes through adaptive quadrature unless a custom
/// antiderivative is supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFunction {
    Constant {
        value: f64,
    },
    Affine {
        intercept: f64,
        slope: f64,
    },
    /// `offset + amplitude * sin(frequency * t + phase)`
    Sine {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `scale * exp(rate * t)`
    Exponential {
        scale: f64,
        rate: f64,
    },
    /// `scale * |t - center|^exponent`
    Power {
        scale: f64,
        #[serde(default)]
        center: f64,
        exponent: f64,
    },
    #[serde(skip)]
    Custom(CustomFn),
}

impl PartialEq for TimeFunction {
    fn eq(&self, other: &Self) -> bool {
        use TimeFunction::*;
        match (self, other) {
            (Constant { value: a }, Constant { value: b }) => a == b,
            (
                Affine {
                    intercept: a0,
                    slope: a1,
                },
                Affine {
                    intercept: b0,
                    slope: b1,
                },
            ) => a0 == b0 && a1 == b1,
            (
                Sine {
                    offset: a0,
                    amplitude: a1,
                    frequency: a2,
                    phase: a3,
                },
                Sine {
                    offset: b0,
                    amplitude: b1,
                    frequency: b2,
                    phase: b3,
                },
            ) => a0 == b0 && a1 == b1 && a2 == b2 && a3 == b3,
            (Exponential { scale: a0, rate: a1 }, Exponential { scale: b0, rate: b1 }) => {
                a0 == b0 && a1 == b1
            }
            (
                Power {
                    scale: a0,
                    center: a1,
                    exponent: a2,
                },
                Power {
                    scale: b0,
                    center: b1,
                    exponent: b2,
                },
            ) => a0 == b0 && a1 == b1 && a2 == b2,
            (Custom(a), Custom(b)) => Arc::ptr_eq(&a.f, &b.f),
            _ => false,
        }
    }
}

impl TimeFunction {
    pub fn constant(value: f64) -> Self {
        TimeFunction::Constant { value }
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        TimeFunction::Affine { intercept, slope }
    }

    pub fn sine(offset: f64, amplitude: f64, frequency: f64, phase: f64) -> Self {
        TimeFunction::Sine {
            offset,
            amplitude,
            frequency,
            phase,
        }
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeFunction::Custom(CustomFn::new(name, f))
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant { value } => *value,
            TimeFunction::Affine { intercept, slope } => intercept + slope * t,
            TimeFunction::Sine {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (frequency * t + phase).sin(),
            TimeFunction::Exponential { scale, rate } => scale * (rate * t).exp(),
            TimeFunction::Power {
                scale,
                center,
                exponent,
            } => scale * (t - center).abs().powf(*exponent),
            TimeFunction::Custom(c) => (c.f)(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeFunction::Constant { .. })
    }

    pub fn label(&self) -> String {
        match self {
            TimeFunction::Constant { .. } => "constant".into(),
            TimeFunction::Affine { .. } => "affine".into(),
            TimeFunction::Sine { .. } => "sine".into(),
            TimeFunction::Exponential { .. } => "exponential".into(),
            TimeFunction::Power { .. } => "power".into(),
            TimeFunction::Custom(c) => c.name.clone(),
        }
    }

    /// ∫ₐᵇ f(t) dt.
    pub fn integral(&self, a: f64, b: f64, what: &str) -> Result<f64> {
        match self {
            TimeFunction::Constant { value } => Ok(value * (b - a)),
            TimeFunction::Affine { intercept, slope } => {
                Ok(intercept * (b - a) + 0.5 * slope * (b * b - a * a))
            }
            TimeFunction::Custom(CustomFn {
                antiderivative: Some(g),
                ..
            }) => Ok(g(b) - g(a)),
            _ => self.quadrature(|t| self.eval(t), a, b, what),
        }
    }

    /// ∫ₐᵇ f(t)² dt.
    pub fn integral_of_square(&self, a: f64, b: f64, what: &str) -> Result<f64> {
        match self {
            TimeFunction::Constant { value } => Ok(value * value * (b - a)),
            TimeFunction::Affine { intercept, slope } if *slope != 0.0 => {
                let cube = |t: f64| (intercept + slope * t).powi(3);
                Ok((cube(b) - cube(a)) / (3.0 * slope))
            }
            TimeFunction::Affine { intercept, .. } => Ok(intercept * intercept * (b - a)),
            _ => self.quadrature(
                |t| {
                    let v = self.eval(t);
                    v * v
                },
                a,
                b,
                what,
            ),
        }
    }

    fn quadrature(&self, g: impl Fn(f64) -> f64, a: f64, b: f64, what: &str) -> Result<f64> {
        let mut breaks = Vec::new();
        if let TimeFunction::Power { center, .. } = self {
            breaks.push(*center);
        }
        integrate_with(&g, a, b, &breaks, QuadOptions::abs(QUAD_TOL), what).map(|r| r.value)
    }

    /// Maximum over a dense scan of [lo, hi].
    pub fn scan_max(&self, lo: f64, hi: f64, points: usize) -> f64 {
        if let TimeFunction::Constant { value } = self {
            return *value;
        }
        let points = points.max(2);
        (0..points)
            .map(|k| self.eval(lo + (hi - lo) * k as f64 / (points - 1) as f64))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimum over a dense scan of [lo, hi].
    pub fn scan_min(&self, lo: f64, hi: f64, points: usize) -> f64 {
        if let TimeFunction::Constant { value } = self {
            return *value;
        }
        let points = points.max(2);
        (0..points)
            .map(|k| self.eval(lo + (hi - lo) * k as f64 / (points - 1) as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Integer-valued jump law given by its probability mass function.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLaw {
    pmf: Vec<(i64, f64)>,
}

impl LatticeLaw {
    pub fn new(mut pmf: Vec<(i64, f64)>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::invalid("jump_law.pmf", "empty mass function"));
        }
        if pmf.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("jump_law.pmf", "masses must be finite and nonnegative"));
        }
        let total: f64 = pmf.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "jump_law.pmf",
                format!("masses sum to {total}, expected 1 within 1e-12"),
            ));
        }
        pmf.sort_by_key(|(k, _)| *k);
        for w in pmf.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid("jump_law.pmf", format!("duplicate value {}", w[0].0)));
            }
        }
        Ok(Self { pmf })
    }

    pub fn pmf(&self) -> &[(i64, f64)] {
        &self.pmf
    }
}

/// Shape of an absolutely continuous jump density.
#[derive(Clone)]
pub enum JumpShape {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Custom { name: String, density: RealFn, lo: f64, hi: f64 },
}

impl fmt::Debug for JumpShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpShape::Uniform { lo, hi } => write!(f, "Uniform({lo}, {hi})"),
            JumpShape::Normal { mean, sd } => write!(f, "Normal({mean}, {sd})"),
            JumpShape::Custom { name, lo, hi, .. } => write!(f, "Custom({name}, [{lo}, {hi}])"),
        }
    }
}

/// Absolutely continuous jump law with density h and the neighbourhood bound
/// h ≤ N₂ on [−1/N₁, 1/N₁].
#[derive(Clone)]
pub struct ContinuousJump {
    shape: JumpShape,
    n1: f64,
    n2: f64,
    // k-fold self-convolutions of the density, index k − 1.
    kfold: Arc<Mutex<Vec<Arc<PiecewiseLinear>>>>,
    // tabulated density for custom shapes
    table: Option<Arc<PiecewiseLinear>>,
}

impl fmt::Debug for ContinuousJump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousJump")
            .field("shape", &self.shape)
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .finish()
    }
}

impl PartialEq for ContinuousJump {
    fn eq(&self, other: &Self) -> bool {
        let same_shape = match (&self.shape, &other.shape) {
            (JumpShape::Uniform { lo: a, hi: b }, JumpShape::Uniform { lo: c, hi: d }) => a == c && b == d,
            (JumpShape::Normal { mean: a, sd: b }, JumpShape::Normal { mean: c, sd: d }) => a == c && b == d,
            (JumpShape::Custom { density: a, .. }, JumpShape::Custom { density: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        };
        same_shape && self.n1 == other.n1 && self.n2 == other.n2
    }
}

impl ContinuousJump {
    /// Builds the law and derives N₂ = sup h on [−1/N₁, 1/N₁] by a dense scan.
    pub fn new(shape: JumpShape, n1: f64) -> Result<Self> {
        if !(n1 > 0.0 && n1.is_finite()) {
            return Err(Error::invalid("jump_law.n1", "must be positive"));
        }
        match &shape {
            JumpShape::Uniform { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                return Err(Error::invalid("jump_law", "uniform needs lo < hi"));
            }
            JumpShape::Normal { sd, .. } if !(*sd > 0.0) => {
                return Err(Error::invalid("jump_law.sd", "must be positive"));
            }
            JumpShape::Custom { lo, hi, .. } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                return Err(Error::invalid("jump_law", "custom density needs a finite support lo < hi"));
            }
            _ => {}
        }
        let table = match &shape {
            JumpShape::Custom { density, lo, hi, .. } => {
                let mass = integrate_with(&|y| density(y), *lo, *hi, &[], QuadOptions::abs(1e-9), "jump density")?
                    .value;
                if (mass - 1.0).abs() > 1e-6 {
                    return Err(Error::invalid(
                        "jump_law",
                        format!("custom density integrates to {mass}, expected 1"),
                    ));
                }
                Some(Arc::new(PiecewiseLinear::tabulate(|y| density(y), *lo, *hi, 2000, true)))
            }
            _ => None,
        };
        let mut law = Self {
            shape,
            n1,
            n2: 0.0,
            kfold: Arc::new(Mutex::new(Vec::new())),
            table,
        };
        let r = 1.0 / n1;
        law.n2 = (0..=2000)
            .map(|k| law.density(-r + 2.0 * r * k as f64 / 2000.0))
            .fold(0.0, f64::max);
        Ok(law)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(JumpShape::Uniform { lo, hi }, 1.0)
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(JumpShape::Normal { mean, sd }, 1.0)
    }

    pub fn shape(&self) -> &JumpShape {
        &self.shape
    }

    pub fn n1(&self) -> f64 {
        self.n1
    }

    pub fn n2(&self) -> f64 {
        self.n2
    }

    pub fn density(&self, y: f64) -> f64 {
        match &self.shape {
            JumpShape::Uniform { lo, hi } => {
                if y >= *lo && y <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            JumpShape::Normal { mean, sd } => crate::special::gauss_pdf(y, *mean, *sd),
            JumpShape::Custom { density, lo, hi, .. } => {
                if y >= *lo && y <= *hi {
                    density(y)
                } else {
                    0.0
                }
            }
        }
    }

    /// Interval outside which the density is (numerically) zero.
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            JumpShape::Uniform { lo, hi } => (*lo, *hi),
            JumpShape::Normal { mean, sd } => (mean - 12.0 * sd, mean + 12.0 * sd),
            JumpShape::Custom { lo, hi, .. } => (*lo, *hi),
        }
    }

    /// ∫ₐᵇ h(y) dy.
    pub fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        match &self.shape {
            JumpShape::Uniform { lo, hi } => Ok(((b.min(*hi) - a.max(*lo)).max(0.0)) / (hi - lo)),
            JumpShape::Normal { mean, sd } => Ok(norm_mass((a - mean) / sd, (b - mean) / sd)),
            JumpShape::Custom { lo, hi, .. } => {
                let (a, b) = (a.max(*lo), b.min(*hi));
                if b <= a {
                    return Ok(0.0);
                }
                integrate_with(&|y| self.density(y), a, b, &[], QuadOptions::abs(1e-12), "jump density mass")
                    .map(|r| r.value)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.shape {
            JumpShape::Uniform { lo, hi } => 0.5 * (lo + hi),
            JumpShape::Normal { mean, .. } => *mean,
            JumpShape::Custom { .. } => self.table.as_ref().map(|t| t.first_moment()).unwrap_or(0.0),
        }
    }

    /// Characteristic function ĝ(u) = E[e^{iuY}].
    pub fn cf(&self, u: f64) -> Complex64 {
        match &self.shape {
            JumpShape::Uniform { lo, hi } => {
                if u == 0.0 {
                    return Complex64::new(1.0, 0.0);
                }
                let num = Complex64::new(0.0, u * hi).exp() - Complex64::new(0.0, u * lo).exp();
                num / Complex64::new(0.0, u * (hi - lo))
            }
            JumpShape::Normal { mean, sd } => Complex64::new(-0.5 * u * u * sd * sd, u * mean).exp(),
            JumpShape::Custom { lo, hi, .. } => {
                let re = integrate_with(&|y| self.density(y) * (u * y).cos(), *lo, *hi, &[], QuadOptions::abs(1e-12), "jump cf")
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN);
                let im = integrate_with(&|y| self.density(y) * (u * y).sin(), *lo, *hi, &[], QuadOptions::abs(1e-12), "jump cf")
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN);
                Complex64::new(re, im)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.shape {
            JumpShape::Uniform { lo, hi } => Uniform::new_inclusive(*lo, *hi)
                .expect("validated uniform bounds")
                .sample(rng),
            JumpShape::Normal { mean, sd } => Normal::new(*mean, *sd).expect("validated sd").sample(rng),
            JumpShape::Custom { .. } => {
                let u: f64 = rng.random();
                self.table.as_ref().expect("custom table").quantile(u)
            }
        }
    }

    /// Piecewise-linear representation of the density (exact for uniform).
    pub(crate) fn base_table(&self) -> Arc<PiecewiseLinear> {
        match &self.shape {
            JumpShape::Uniform { lo, hi } => Arc::new(PiecewiseLinear::constant(*lo, *hi, 1.0 / (hi - lo))),
            JumpShape::Normal { mean, sd } => Arc::new(PiecewiseLinear::tabulate(
                |y| crate::special::gauss_pdf(y, *mean, *sd),
                mean - 12.0 * sd,
                mean + 12.0 * sd,
                2000,
                true,
            )),
            JumpShape::Custom { .. } => self.table.clone().expect("custom table"),
        }
    }

    /// Density of Y₁ + … + Y_k as a piecewise-linear table (cached).
    pub(crate) fn kfold_table(&self, k: usize) -> Arc<PiecewiseLinear> {
        assert!(k >= 1);
        let mut cache = self.kfold.lock().expect("k-fold cache poisoned");
        if cache.is_empty() {
            cache.push(self.base_table());
        }
        while cache.len() < k {
            let next = PiecewiseLinear::convolve(&cache[cache.len() - 1], &cache[0], 200 * (cache.len() + 1));
            cache.push(Arc::new(next));
        }
        cache[k - 1].clone()
    }
}

/// Jump-size law G.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    /// Integer-supported law.
    Lattice(LatticeLaw),
    /// Point mass at `point`.
    Dirac { point: f64 },
    /// Law with a Lebesgue density.
    Continuous(ContinuousJump),
}

impl JumpLaw {
    pub fn dirac(point: f64) -> Self {
        JumpLaw::Dirac { point }
    }

    /// True when every jump is an integer (lattice or integer Dirac).
    pub fn is_lattice(&self) -> bool {
        match self {
            JumpLaw::Lattice(_) => true,
            JumpLaw::Dirac { point } => point.fract() == 0.0,
            JumpLaw::Continuous(_) => false,
        }
    }

    /// Integer mass function for lattice-valued laws.
    pub fn integer_pmf(&self) -> Option<Vec<(i64, f64)>> {
        match self {
            JumpLaw::Lattice(l) => Some(l.pmf().to_vec()),
            JumpLaw::Dirac { point } if point.fract() == 0.0 => Some(vec![(*point as i64, 1.0)]),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            JumpLaw::Lattice(_) => "lattice",
            JumpLaw::Dirac { .. } => "dirac",
            JumpLaw::Continuous(_) => "continuous",
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Lattice(l) => l.pmf().iter().map(|(k, p)| *k as f64 * p).sum(),
            JumpLaw::Dirac { point } => *point,
            JumpLaw::Continuous(c) => c.mean(),
        }
    }

    pub fn cf(&self, u: f64) -> Complex64 {
        match self {
            JumpLaw::Lattice(l) => l
                .pmf()
                .iter()
                .map(|(k, p)| Complex64::new(0.0, u * *k as f64).exp() * p)
                .sum(),
            JumpLaw::Dirac { point } => Complex64::new(0.0, u * point).exp(),
            JumpLaw::Continuous(c) => c.cf(u),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::Lattice(l) => {
                let idx = WeightedIndex::new(l.pmf().iter().map(|(_, p)| *p))
                    .expect("validated mass function")
                    .sample(rng);
                l.pmf()[idx].0 as f64
            }
            JumpLaw::Dirac { point } => *point,
            JumpLaw::Continuous(c) => c.sample(rng),
        }
    }
}

/// Hölder class parameters: |f| ≤ B and |f(x) − f(y)| ≤ M|x − y|^α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderClassParams {
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

impl HolderClassParams {
    pub fn new(alpha: f64, m: f64, b: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("holder.alpha", "must lie in (0, 1]"));
        }
        if !(m >= 0.0) || !(b >= 0.0) {
            return Err(Error::invalid("holder", "M and B must be nonnegative"));
        }
        Ok(Self { alpha, m, b })
    }
}

impl Default for HolderClassParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            m: 1.0,
            b: 1.0,
        }
    }
}

/// Observation times 0 = t₀ < t₁ < … < tₙ.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    times: Vec<f64>,
}

impl Grid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::invalid("grid", "needs at least two times"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("grid", "must start at 0"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("grid", "times must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid", "times must be strictly increasing"));
        }
        Ok(Self { times })
    }

    /// Uniform grid of `n` intervals on [0, horizon].
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        let mut times: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
        times[n] = horizon;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Δₙ = max (tᵢ − tᵢ₋₁).
    pub fn mesh(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Endpoints of interval `i` (0-based, i.e. [tᵢ, tᵢ₊₁]).
    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.times[i], self.times[i + 1])
    }

    /// Index of the interval (tᵢ₋₁, tᵢ] containing `t`, 0-based; times at or
    /// before 0 go to the first interval.
    pub fn interval_of(&self, t: f64) -> usize {
        let j = self.times.partition_point(|&x| x < t);
        j.clamp(1, self.n()) - 1
    }

    /// Merges intervals `i` and `i + 1` into one.
    pub fn merge_adjacent(&self, i: usize) -> Result<Self> {
        if i + 1 >= self.n() {
            return Err(Error::invalid("i", "no interval to merge with"));
        }
        let mut times = self.times.clone();
        times.remove(i + 1);
        Self::new(times)
    }
}

/// Full parameterisation of the jump-diffusion and white-noise experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub drift: TimeFunction,
    /// The σ(·) factor; the diffusion coefficient is εₙ·σ(·).
    pub sigma: TimeFunction,
    pub epsilon_n: f64,
    pub intensity: TimeFunction,
    pub jump_law: JumpLaw,
    pub horizon: f64,
    pub initial: f64,
}

impl ModelSpec {
    /// Validates and builds a spec with zero initial condition.
    pub fn new(
        drift: TimeFunction,
        sigma: TimeFunction,
        epsilon_n: f64,
        intensity: TimeFunction,
        jump_law: JumpLaw,
        horizon: f64,
    ) -> Result<Self> {
        let spec = Self {
            drift,
            sigma,
            epsilon_n,
            intensity,
            jump_law,
            horizon,
            initial: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_initial(mut self, initial: f64) -> Self {
        self.initial = initial;
        self
    }

    /// Checks the parameter invariants on a dense probe grid.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_n > 0.0 && self.epsilon_n.is_finite()) {
            return Err(Error::invalid("epsilon_n", "must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        if !self.initial.is_finite() {
            return Err(Error::invalid("initial", "must be finite"));
        }
        for k in 0..PROBES {
            let t = self.horizon * k as f64 / (PROBES - 1) as f64;
            let s = self.sigma.eval(t);
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("sigma", format!("sigma({t}) = {s} is not positive")));
            }
            let l = self.intensity.eval(t);
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::invalid("intensity", format!("intensity({t}) = {l} is negative")));
            }
            let f = self.drift.eval(t);
            if !f.is_finite() {
                return Err(Error::invalid("drift", format!("drift({t}) is not finite")));
            }
        }
        Ok(())
    }

    /// σₙ(t) = εₙ σ(t).
    #[inline]
    pub fn sigma_n(&self, t: f64) -> f64 {
        self.epsilon_n * self.sigma.eval(t)
    }

    /// Dominating rate for thinning: the exact constant for constant
    /// intensities, otherwise 1.05 × a dense-scan maximum.
    pub fn intensity_bound(&self) -> f64 {
        match self.intensity {
            TimeFunction::Constant { value } => value,
            _ => 1.05 * self.intensity.scan_max(0.0, self.horizon, 10_001).max(0.0),
        }
    }
}

/// (mᵢ, σᵢ², λᵢ, αᵢ) for one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementSummary {
    pub m: f64,
    pub sigma2: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl IncrementSummary {
    pub fn new(m: f64, sigma2: f64, lambda: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid("sigma2", format!("{sigma2} is not positive")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("{lambda} is negative")));
        }
        if !m.is_finite() {
            return Err(Error::invalid("m", "must be finite"));
        }
        Ok(Self {
            m,
            sigma2,
            lambda,
            alpha: lambda * (-lambda).exp(),
        })
    }

    /// σᵢ = √σᵢ².
    pub fn sd(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Per-interval summaries for a whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSummaries {
    pub items: Vec<IncrementSummary>,
}

impl IncrementSummaries {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &IncrementSummary> {
        self.items.iter()
    }
}

impl std::ops::Index<usize> for IncrementSummaries {
    type Output = IncrementSummary;
    fn index(&self, i: usize) -> &IncrementSummary {
        &self.items[i]
    }
}

/// Integrates drift, σₙ² and intensity over every grid interval.
pub fn build_increment_summaries(spec: &ModelSpec, grid: &Grid) -> Result<IncrementSummaries> {
    if grid.horizon() > spec.horizon * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "grid",
            format!("last time {} exceeds horizon {}", grid.horizon(), spec.horizon),
        ));
    }
    let eps2 = spec.epsilon_n * spec.epsilon_n;
    let items = (0..grid.n())
        .map(|i| {
            let (a, b) = grid.interval(i);
            let m = spec.drift.integral(a, b, &format!("drift on interval {}", i + 1))?;
            let s2 = eps2 * spec.sigma.integral_of_square(a, b, &format!("sigma_n^2 on interval {}", i + 1))?;
            let lambda = spec
                .intensity
                .integral(a, b, &format!("intensity on interval {}", i + 1))?
                .max(0.0);
            IncrementSummary::new(m, s2, lambda)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IncrementSummaries { items })
}

/// The piecewise-constant drift f̄ₙ: f(tᵢ) on [tᵢ₋₁, tᵢ), f(Tₙ) at Tₙ.
#[derive(Debug, Clone)]
pub struct PiecewiseDrift {
    times: Vec<f64>,
    // values[i] = f(t_i)
    values: Vec<f64>,
}

impl PiecewiseDrift {
    pub fn eval(&self, t: f64) -> f64 {
        // first index with time > t
        let j = self.times.partition_point(|&x| x <= t);
        let n = self.times.len() - 1;
        self.values[j.clamp(1, n)]
    }

    /// f(tᵢ) for i = 0..=n.
    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }
}

pub fn piecewise_drift(f: impl Fn(f64) -> f64, grid: &Grid) -> PiecewiseDrift {
    PiecewiseDrift {
        times: grid.times().to_vec(),
        values: grid.times().iter().map(|&t| f(t)).collect(),
    }
}

/// True iff |d/dt ln σ(t)| ≤ C₁ (+1e−8) at every interval midpoint, using a
/// central difference with step Δₙ/100.
pub fn check_sigma_log_derivative(sigma: impl Fn(f64) -> f64, c1: f64, grid: &Grid) -> Result<bool> {
    let h = grid.mesh() / 100.0;
    let mut ok = true;
    for i in 0..grid.n() {
        let (a, b) = grid.interval(i);
        let mid = 0.5 * (a + b);
        let (lo, hi) = (sigma(mid - h), sigma(mid + h));
        if !(lo > 0.0 && hi > 0.0 && sigma(mid) > 0.0) {
            return Err(Error::invalid("sigma", format!("non-positive value near t = {mid}")));
        }
        let d = (hi.ln() - lo.ln()) / (2.0 * h);
        if d.abs() > c1 + 1e-8 {
            ok = false;
        }
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn spec(drift: TimeFunction, sigma: f64, lambda: f64) -> ModelSpec {
        ModelSpec::new(
            drift,
            TimeFunction::constant(sigma),
            1.0,
            TimeFunction::constant(lambda),
            JumpLaw::dirac(1.0),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn constant_summaries() {
        let s = spec(TimeFunction::constant(2.0), 1.0, 0.5);
        let grid = Grid::uniform(1.0, 4).unwrap();
        let sums = build_increment_summaries(&s, &grid).unwrap();
        for it in sums.iter() {
            assert!((it.m - 0.5).abs() < 1e-15);
            assert!((it.sigma2 - 0.25).abs() < 1e-15);
            assert!((it.lambda - 0.125).abs() < 1e-15);
            assert!((it.alpha - 0.110_312).abs() < 1e-6);
        }
    }

    #[test]
    fn affine_drift_single_interval() {
        let s = spec(TimeFunction::affine(0.0, 1.0), 1.0, 0.0);
        let grid = Grid::uniform(1.0, 1).unwrap();
        let sums = build_increment_summaries(&s, &grid).unwrap();
        assert!((sums[0].m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sine_drift_matches_antiderivative() {
        let s = spec(TimeFunction::sine(0.0, 1.0, 2.0 * PI, 0.0), 1.0, 0.0);
        let grid = Grid::uniform(1.0, 10).unwrap();
        let sums = build_increment_summaries(&s, &grid).unwrap();
        for (i, it) in sums.iter().enumerate() {
            let (a, b) = grid.interval(i);
            let exact = ((2.0 * PI * a).cos() - (2.0 * PI * b).cos()) / (2.0 * PI);
            assert!((it.m - exact).abs() < 1e-10, "interval {i}");
        }
    }

    #[test]
    fn sigma2_uses_epsilon() {
        let mut s = spec(TimeFunction::constant(0.0), 2.0, 0.0);
        s.epsilon_n = 0.1;
        let grid = Grid::uniform(1.0, 2).unwrap();
        let sums = build_increment_summaries(&s, &grid).unwrap();
        assert!((sums[0].sigma2 - 0.01 * 4.0 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadrature_failure_names_interval() {
        let wild = TimeFunction::custom("wild", |t: f64| if t > 0.0 { 1.0 / t.powf(1.5) } else { 0.0 });
        let s = ModelSpec {
            drift: wild,
            sigma: TimeFunction::constant(1.0),
            epsilon_n: 1.0,
            intensity: TimeFunction::constant(0.0),
            jump_law: JumpLaw::dirac(1.0),
            horizon: 1.0,
            initial: 0.0,
        };
        let grid = Grid::uniform(1.0, 2).unwrap();
        let err = build_increment_summaries(&s, &grid).unwrap_err().to_string();
        assert!(err.contains("drift on interval 1"), "{err}");
    }

    #[test]
    fn alpha_bounded_by_inverse_e() {
        for &l in &[0.0, 0.1, 1.0, 2.0, 50.0] {
            let s = IncrementSummary::new(0.0, 1.0, l).unwrap();
            assert!(s.alpha <= (-1.0f64).exp() + 1e-16);
            assert_eq!(s.alpha, l * (-l).exp());
        }
    }

    #[test]
    fn piecewise_drift_definition() {
        let grid = Grid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let fb = piecewise_drift(|t| t, &grid);
        assert_eq!(fb.eval(0.0), 0.5);
        assert_eq!(fb.eval(0.49), 0.5);
        assert_eq!(fb.eval(0.5), 1.0);
        assert_eq!(fb.eval(0.75), 1.0);
        assert_eq!(fb.eval(1.0), 1.0);
        let fc = piecewise_drift(|_| 3.0, &grid);
        assert_eq!(fc.eval(0.3), 3.0);
    }

    #[test]
    fn piecewise_drift_twice_shifts_by_one_interval() {
        // f̄ₙ(tᵢ) is the value of the interval starting at tᵢ, so resampling
        // f̄ₙ picks up the next interval's value.
        let grid = Grid::uniform(1.0, 8).unwrap();
        let f = |t: f64| (3.0 * t).sin();
        let fb = piecewise_drift(f, &grid);
        let fbb = piecewise_drift(|t| fb.eval(t), &grid);
        let times = grid.times();
        for k in 0..1000 {
            let t = k as f64 / 1000.0;
            let j = (times.partition_point(|&x| x <= t) - 1).min(7);
            assert_eq!(fb.eval(t), f(times[j + 1]), "t = {t}");
            assert_eq!(fbb.eval(t), f(times[(j + 2).min(8)]), "t = {t}");
        }
    }

    #[test]
    fn sigma_log_derivative_examples() {
        let grid = Grid::uniform(1.0, 50).unwrap();
        assert!(check_sigma_log_derivative(|_| 1.0, 0.0, &grid).unwrap());
        assert!(!check_sigma_log_derivative(|t: f64| (2.0 * t).exp(), 1.0, &grid).unwrap());
        let wide = Grid::uniform(2.0 * PI, 200).unwrap();
        assert!(check_sigma_log_derivative(|t: f64| 1.0 + 0.1 * t.sin(), 0.12, &wide).unwrap());
        // dense-scan oracle for the true maximum
        let max = (0..100_000)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 100_000.0;
                (0.1 * t.cos() / (1.0 + 0.1 * t.sin())).abs()
            })
            .fold(0.0, f64::max);
        assert!(max <= 0.1 / 0.9);
        assert!(!check_sigma_log_derivative(|t: f64| 1.0 + 0.1 * t.sin(), max * 0.9, &wide).unwrap());
        assert!(check_sigma_log_derivative(|t: f64| t - 0.5, 1.0, &grid).is_err());
    }

    #[test]
    fn spec_validation() {
        let bad = ModelSpec::new(
            TimeFunction::constant(0.0),
            TimeFunction::constant(1.0),
            -1.0,
            TimeFunction::constant(0.0),
            JumpLaw::dirac(1.0),
            1.0,
        );
        assert!(bad.unwrap_err().to_string().contains("epsilon_n"));
        let bad = ModelSpec::new(
            TimeFunction::constant(0.0),
            TimeFunction::affine(1.0, -2.0),
            1.0,
            TimeFunction::constant(0.0),
            JumpLaw::dirac(1.0),
            1.0,
        );
        assert!(bad.unwrap_err().to_string().contains("sigma"));
        let bad = ModelSpec::new(
            TimeFunction::constant(0.0),
            TimeFunction::constant(1.0),
            1.0,
            TimeFunction::constant(-0.1),
            JumpLaw::dirac(1.0),
            1.0,
        );
        assert!(bad.unwrap_err().to_string().contains("intensity"));
    }

    #[test]
    fn lattice_law_validation() {
        assert!(LatticeLaw::new(vec![(1, 0.5), (2, 0.5)]).is_ok());
        assert!(LatticeLaw::new(vec![(1, 0.5), (2, 0.4)]).is_err());
        assert!(LatticeLaw::new(vec![(1, 0.5), (1, 0.5)]).is_err());
    }

    #[test]
    fn continuous_jump_bounds() {
        let u = ContinuousJump::new(JumpShape::Uniform { lo: -10.0, hi: 10.0 }, 2.0).unwrap();
        assert!((u.n2() - 0.05).abs() < 1e-15);
        assert!((u.mass_between(-0.4, 0.4).unwrap() - 0.04).abs() < 1e-15);
        let c = ContinuousJump::new(
            JumpShape::Custom {
                name: "tri".into(),
                density: Arc::new(|y: f64| 1.0 - y.abs()),
                lo: -1.0,
                hi: 1.0,
            },
            1.0,
        )
        .unwrap();
        assert!((c.n2() - 1.0).abs() < 1e-12);
        assert!((c.mass_between(0.0, 1.0).unwrap() - 0.5).abs() < 1e-10);
        assert!(ContinuousJump::new(
            JumpShape::Custom {
                name: "bad".into(),
                density: Arc::new(|_| 2.0),
                lo: 0.0,
                hi: 1.0
            },
            1.0
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn summaries_are_additive(i in 0usize..5, amp in -2.0f64..2.0, freq in 0.1f64..10.0, s1 in 0.0f64..1.0) {
            let s = ModelSpec::new(
                TimeFunction::sine(0.3, amp, freq, 0.2),
                TimeFunction::affine(1.0, s1),
                0.7,
                TimeFunction::sine(1.0, 0.5, freq, 0.0),
                JumpLaw::dirac(1.0),
                1.0,
            ).unwrap();
            let grid = Grid::uniform(1.0, 6).unwrap();
            let merged = grid.merge_adjacent(i).unwrap();
            let a = build_increment_summaries(&s, &grid).unwrap();
            let b = build_increment_summaries(&s, &merged).unwrap();
            prop_assert!((a[i].m + a[i + 1].m - b[i].m).abs() < 1e-9);
            prop_assert!((a[i].sigma2 + a[i + 1].sigma2 - b[i].sigma2).abs() < 1e-9);
            prop_assert!((a[i].lambda + a[i + 1].lambda - b[i].lambda).abs() < 1e-9);
        }

        #[test]
        fn alpha_never_exceeds_inverse_e(l in 0.0f64..100.0) {
            let s = IncrementSummary::new(0.0, 1.0, l).unwrap();
            prop_assert!(s.alpha <= (-1.0f64).exp() + 1e-16);
        }
    }
}
