//! Exact one-dimensional increment laws: the pure Gaussian law, the full
//! compound-Poisson convolution, and the single-jump (Bernoulli) mixture,
//! plus the increment characteristic function.
//!
//! A [`Density`] is a finite weighted sum of structured terms. Gaussian
//! components keep their integer lattice shift apart from the real base
//! mean, so that folding onto the unit cell and comparing two lattice
//! mixtures cancels exactly instead of through floating-point subtraction.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{IncrementSummary, JumpLaw};
use crate::quad::{integrate_with, QuadOptions};
use crate::special::{norm_mass, norm_pdf};

/// Gaussian terms are treated as zero beyond this many standard deviations.
pub(crate) const GAUSS_REACH: f64 = 40.0;

/// Largest Poisson series length accepted by [`increment_density_exact`].
pub const MAX_SERIES_TERMS: usize = 200;

/// Default Poisson-tail tolerance for the series truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Piecewise-linear function with compact support, possibly discontinuous
/// at its knots. Segment `j` spans `[xs[j], xs[j + 1]]` and runs linearly
/// from `ys[j].0` to `ys[j].1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<(f64, f64)>,
    // cumulative mass up to the start of each segment
    cum: Vec<f64>,
}

impl PiecewiseLinear {
    fn from_parts(xs: Vec<f64>, ys: Vec<(f64, f64)>) -> Self {
        debug_assert_eq!(xs.len(), ys.len() + 1);
        let mut cum = Vec::with_capacity(ys.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for (j, (a, b)) in ys.iter().enumerate() {
            acc += 0.5 * (a + b) * (xs[j + 1] - xs[j]);
            cum.push(acc);
        }
        Self { xs, ys, cum }
    }

    /// Constant `value` on `[lo, hi]`.
    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        Self::from_parts(vec![lo, hi], vec![(value, value)])
    }

    /// Samples `f` at `segments + 1` equispaced knots on `[lo, hi]`.
    pub fn tabulate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, segments: usize, normalize: bool) -> Self {
        let segments = segments.max(1);
        let xs: Vec<f64> = (0..=segments)
            .map(|k| lo + (hi - lo) * k as f64 / segments as f64)
            .collect();
        let vals: Vec<f64> = xs.iter().map(|&x| f(x).max(0.0)).collect();
        let ys = vals.windows(2).map(|w| (w[0], w[1])).collect();
        let mut t = Self::from_parts(xs, ys);
        if normalize {
            let m = t.total_mass();
            if m > 0.0 {
                t.scale(1.0 / m);
            }
        }
        t
    }

    fn scale(&mut self, c: f64) {
        for y in &mut self.ys {
            y.0 *= c;
            y.1 *= c;
        }
        for m in &mut self.cum {
            *m *= c;
        }
    }

    pub fn lo(&self) -> f64 {
        self.xs[0]
    }

    pub fn hi(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn total_mass(&self) -> f64 {
        self.cum[self.cum.len() - 1]
    }

    pub fn first_moment(&self) -> f64 {
        self.ys
            .iter()
            .enumerate()
            .map(|(j, (a, b))| {
                let (x0, x1) = (self.xs[j], self.xs[j + 1]);
                let h = x1 - x0;
                // ∫ (a + (b − a)(x − x0)/h) x dx
                h * (a * (2.0 * x0 + x1) + b * (x0 + 2.0 * x1)) / 6.0
            })
            .sum()
    }

    #[inline]
    fn segment_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo() && x <= self.hi()) {
            return None;
        }
        let j = self.xs.partition_point(|&k| k <= x);
        Some(j.clamp(1, self.ys.len()) - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.segment_of(x) {
            None => 0.0,
            Some(j) => {
                let (x0, x1) = (self.xs[j], self.xs[j + 1]);
                let (a, b) = self.ys[j];
                a + (b - a) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// ∫ₐᵇ of the table, exactly.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.lo()), b.min(self.hi()));
        if b <= a {
            return 0.0;
        }
        self.cdf(b) - self.cdf(a)
    }

    fn cdf(&self, x: f64) -> f64 {
        match self.segment_of(x) {
            None if x < self.lo() => 0.0,
            None => self.total_mass(),
            Some(j) => {
                let (x0, x1) = (self.xs[j], self.xs[j + 1]);
                let (a, b) = self.ys[j];
                let t = x - x0;
                self.cum[j] + a * t + 0.5 * (b - a) / (x1 - x0) * t * t
            }
        }
    }

    /// Inverse of the normalised distribution function.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.total_mass();
        let j = (self.cum.partition_point(|&c| c <= target).clamp(1, self.ys.len())) - 1;
        let (x0, x1) = (self.xs[j], self.xs[j + 1]);
        let (a, b) = self.ys[j];
        let slope = (b - a) / (x1 - x0);
        let r = target - self.cum[j];
        // solve a t + slope t²/2 = r
        let disc = (a * a + 2.0 * slope * r).max(0.0);
        let denom = a + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        (x0 + t).clamp(x0, x1)
    }

    /// (table(· − offset) ⊛ N(0, sd²))(x), exact per segment.
    pub fn conv_gauss(&self, x: f64, offset: f64, sd: f64) -> f64 {
        let xr = x - offset;
        let (from, to) = (xr - GAUSS_REACH * sd, xr + GAUSS_REACH * sd);
        if to < self.lo() || from > self.hi() {
            return 0.0;
        }
        let start = self.xs.partition_point(|&k| k <= from).saturating_sub(1);
        let end = self.xs.partition_point(|&k| k < to).min(self.ys.len());
        let mut acc = 0.0;
        for j in start..end {
            let (x0, x1) = (self.xs[j], self.xs[j + 1]);
            let (a, b) = self.ys[j];
            let slope = (b - a) / (x1 - x0);
            // y = xr + sd z on the segment; integrand (A + B sd z) ϕ(z)
            let za = (x0 - xr) / sd;
            let zb = (x1 - xr) / sd;
            let big_a = a + slope * (xr - x0);
            acc += big_a * norm_mass(za, zb) + slope * sd * (norm_pdf(za) - norm_pdf(zb));
        }
        acc.max(0.0)
    }

    /// Tabulated convolution `self ⊛ other` on `segments` equal segments.
    pub fn convolve(&self, other: &PiecewiseLinear, segments: usize) -> Self {
        let lo = self.lo() + other.lo();
        let hi = self.hi() + other.hi();
        let eval = |x: f64| {
            // ∫ other(y) self(x − y) dy; both factors are linear between the
            // merged breakpoints, so GK15 is exact on every panel.
            let a = other.lo().max(x - self.hi());
            let b = other.hi().min(x - self.lo());
            if b <= a {
                return 0.0;
            }
            let mut breaks: Vec<f64> = other.xs.iter().copied().filter(|&k| k > a && k < b).collect();
            breaks.extend(self.xs.iter().map(|&k| x - k).filter(|&k| k > a && k < b));
            integrate_with(
                &|y| other.eval(y) * self.eval(x - y),
                a,
                b,
                &breaks,
                QuadOptions::abs(1e-13),
                "jump density convolution",
            )
            .map(|r| r.value)
            .unwrap_or(0.0)
        };
        Self::tabulate(eval, lo, hi, segments, true)
    }
}

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Shape of one mixture component.
#[derive(Clone)]
pub enum Term {
    /// N(shift + base, sd²); `shift` is the integer lattice displacement.
    Gauss { base: f64, shift: i64, sd: f64 },
    /// table(· − offset) ⊛ N(0, sd²).
    Smooth {
        table: Arc<PiecewiseLinear>,
        offset: f64,
        sd: f64,
    },
    /// table(· − offset).
    Table { table: Arc<PiecewiseLinear>, offset: f64 },
    /// Arbitrary density supported on [lo, hi].
    Func { f: DensityFn, lo: f64, hi: f64 },
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Gauss { base, shift, sd } => write!(f, "Gauss({shift} + {base}, {sd})"),
            Term::Smooth { offset, sd, table } => {
                write!(f, "Smooth([{}, {}] + {offset}, {sd})", table.lo(), table.hi())
            }
            Term::Table { offset, table } => write!(f, "Table([{}, {}] + {offset})", table.lo(), table.hi()),
            Term::Func { lo, hi, .. } => write!(f, "Func([{lo}, {hi}])"),
        }
    }
}

impl Term {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Term::Gauss { base, shift, sd } => norm_pdf(((x - *shift as f64) - base) / sd) / sd,
            Term::Smooth { table, offset, sd } => table.conv_gauss(x, *offset, *sd),
            Term::Table { table, offset } => table.eval(x - offset),
            Term::Func { f, lo, hi } => {
                if x >= *lo && x <= *hi {
                    f(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Interval outside which the term is negligible.
    pub fn reach(&self) -> (f64, f64) {
        match self {
            Term::Gauss { base, shift, sd } => {
                let c = *shift as f64 + base;
                (c - GAUSS_REACH * sd, c + GAUSS_REACH * sd)
            }
            Term::Smooth { table, offset, sd } => (
                table.lo() + offset - GAUSS_REACH * sd,
                table.hi() + offset + GAUSS_REACH * sd,
            ),
            Term::Table { table, offset } => (table.lo() + offset, table.hi() + offset),
            Term::Func { lo, hi, .. } => (*lo, *hi),
        }
    }

    /// Interval carrying all but ~1e−30 of the mass.
    fn core(&self) -> (f64, f64) {
        match self {
            Term::Gauss { base, shift, sd } => {
                let c = *shift as f64 + base;
                (c - 12.0 * sd, c + 12.0 * sd)
            }
            Term::Smooth { table, offset, sd } => {
                (table.lo() + offset - 12.0 * sd, table.hi() + offset + 12.0 * sd)
            }
            _ => self.reach(),
        }
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Term::Gauss { base, shift, sd } => {
                let c = *shift as f64 + base;
                for k in [0.0, 1.0, 2.0, 4.0, 6.0, 9.0, 12.0] {
                    out.push(c - k * sd);
                    out.push(c + k * sd);
                }
            }
            Term::Smooth { table, offset, sd } => {
                let (lo, hi) = (table.lo() + offset, table.hi() + offset);
                for k in [0.0, 2.0, 6.0, 12.0] {
                    out.push(lo - k * sd);
                    out.push(lo + k * sd);
                    out.push(hi - k * sd);
                    out.push(hi + k * sd);
                }
            }
            Term::Table { table, offset } => {
                if table.knots().len() <= 4097 {
                    out.extend(table.knots().iter().map(|k| k + offset));
                } else {
                    out.push(table.lo() + offset);
                    out.push(table.hi() + offset);
                }
            }
            Term::Func { lo, hi, .. } => {
                out.push(*lo);
                out.push(*hi);
            }
        }
    }

    fn translated(&self, k: i64) -> Term {
        match self {
            Term::Gauss { base, shift, sd } => Term::Gauss {
                base: *base,
                shift: shift + k,
                sd: *sd,
            },
            Term::Smooth { table, offset, sd } => Term::Smooth {
                table: table.clone(),
                offset: offset + k as f64,
                sd: *sd,
            },
            Term::Table { table, offset } => Term::Table {
                table: table.clone(),
                offset: offset + k as f64,
            },
            Term::Func { f, lo, hi } => {
                let f = f.clone();
                let kf = k as f64;
                Term::Func {
                    f: Arc::new(move |x| f(x - kf)),
                    lo: lo + kf,
                    hi: hi + kf,
                }
            }
        }
    }
}

/// Restriction applied to a term before (optional) folding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Line,
    /// Closed interval [lo, hi].
    Interval(f64, f64),
}

/// `weight · term`, restricted to `window`, and wrapped onto [−½, ½) when
/// `folded`.
#[derive(Debug, Clone)]
pub struct Part {
    pub weight: f64,
    pub term: Term,
    pub window: Window,
    pub folded: bool,
}

impl Part {
    pub fn line(weight: f64, term: Term) -> Self {
        Self {
            weight,
            term,
            window: Window::Line,
            folded: false,
        }
    }

    #[inline]
    fn unfolded(&self, x: f64) -> f64 {
        if let Window::Interval(lo, hi) = self.window {
            if x < lo || x > hi {
                return 0.0;
            }
        }
        self.term.eval(x)
    }

    /// Points where the unfolded part can be nonzero.
    pub fn reach(&self) -> (f64, f64) {
        let (lo, hi) = self.term.reach();
        match self.window {
            Window::Line => (lo, hi),
            Window::Interval(a, b) => (lo.max(a), hi.min(b)),
        }
    }

    /// Integer offsets j such that x + j may fall within reach, for x in the cell.
    pub(crate) fn wrap_range(&self, x: f64) -> (i64, i64) {
        let (lo, hi) = self.reach();
        ((lo - x).ceil() as i64, (hi - x).floor() as i64)
    }

    /// The part's own contribution (without weight) at `x`.
    #[inline]
    pub fn shape_at(&self, x: f64) -> f64 {
        if !self.folded {
            return self.unfolded(x);
        }
        if !(-0.5..0.5).contains(&x) {
            return 0.0;
        }
        let (j0, j1) = self.wrap_range(x);
        (j0..=j1).map(|j| self.unfolded(x + j as f64)).sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.weight * self.shape_at(x)
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        let mut raw = Vec::new();
        self.term.breakpoints(&mut raw);
        if let Window::Interval(a, b) = self.window {
            raw.push(a);
            raw.push(b);
        }
        if self.folded {
            out.push(-0.5);
            out.push(0.5);
            for p in raw {
                let w = p - p.round_ties_even();
                out.push(w);
            }
        } else {
            out.extend(raw);
        }
    }

    /// ∫ₐᵇ of the (unweighted) part.
    fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        let (mut a, mut b) = (a, b);
        if self.folded {
            a = a.max(-0.5);
            b = b.min(0.5);
        } else if let Window::Interval(lo, hi) = self.window {
            a = a.max(lo);
            b = b.min(hi);
        }
        if b <= a {
            return Ok(0.0);
        }
        if !self.folded {
            match &self.term {
                Term::Gauss { base, shift, sd } => {
                    let c = *shift as f64 + base;
                    return Ok(norm_mass((a - c) / sd, (b - c) / sd));
                }
                Term::Table { table, offset } => return Ok(table.mass_between(a - offset, b - offset)),
                _ => {}
            }
        }
        let mut breaks = Vec::new();
        self.breakpoints(&mut breaks);
        integrate_with(&|x| self.shape_at(x), a, b, &breaks, QuadOptions::abs(1e-13), "part mass").map(|r| r.value)
    }
}

/// One-dimensional probability law: a mixture of structured parts plus
/// optional point masses.
#[derive(Debug, Clone)]
pub struct Density {
    parts: Vec<Part>,
    atoms: Vec<(f64, f64)>,
    support: (f64, f64),
}

impl Density {
    /// Builds a density from parts and atoms; `support` is where the mass
    /// outside is below 1e−12.
    pub fn new(parts: Vec<Part>, atoms: Vec<(f64, f64)>, support: (f64, f64)) -> Self {
        Self { parts, atoms, support }
    }

    /// Density with support taken as the union of the parts' 12σ cores.
    pub fn from_parts(parts: Vec<Part>) -> Self {
        let support = parts_support(&parts);
        Self {
            parts,
            atoms: Vec::new(),
            support,
        }
    }

    /// Density given by an arbitrary function on [lo, hi].
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static, lo: f64, hi: f64) -> Self {
        Self::new(
            vec![Part::line(
                1.0,
                Term::Func {
                    f: Arc::new(f),
                    lo,
                    hi,
                },
            )],
            Vec::new(),
            (lo, hi),
        )
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Absolutely continuous part of the density at x.
    pub fn eval(&self, x: f64) -> f64 {
        self.parts.iter().map(|p| p.eval(x)).sum()
    }

    /// Kink and peak locations for quadrature subdivision.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in &self.parts {
            p.breakpoints(&mut out);
        }
        out.extend(self.atoms.iter().map(|a| a.0));
        out.push(self.support.0);
        out.push(self.support.1);
        out.retain(|x| x.is_finite());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Interval on which any part can be nonzero.
    pub fn reach(&self) -> (f64, f64) {
        let mut lo = self.support.0;
        let mut hi = self.support.1;
        for p in &self.parts {
            let (a, b) = if p.folded { (-0.5, 0.5) } else { p.reach() };
            lo = lo.min(a);
            hi = hi.max(b);
        }
        for a in &self.atoms {
            lo = lo.min(a.0);
            hi = hi.max(a.0);
        }
        (lo, hi)
    }

    /// P([a, b]) including atoms.
    pub fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        let mut m = 0.0;
        for p in &self.parts {
            m += p.weight * p.mass_between(a, b)?;
        }
        m += self.atoms.iter().filter(|(x, _)| *x >= a && *x <= b).map(|(_, w)| w).sum::<f64>();
        Ok(m)
    }

    /// Total mass, continuous part by quadrature over the support.
    pub fn total_mass(&self) -> Result<f64> {
        let (lo, hi) = self.support;
        let breaks = self.breakpoints();
        let cont = integrate_with(&|x| self.eval(x), lo, hi, &breaks, QuadOptions::abs(1e-12), "density mass")?.value;
        Ok(cont + self.atoms.iter().map(|a| a.1).sum::<f64>())
    }

    /// Wraps the law onto the lattice cell [−½, ½): x ↦ x − [x].
    pub fn fold_to_cell(&self) -> Density {
        let parts = self
            .parts
            .iter()
            .map(|p| Part {
                folded: true,
                ..p.clone()
            })
            .collect();
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for &(x, w) in &self.atoms {
            let y = crate::kernels::round_to_lattice(x);
            match atoms.iter_mut().find(|a| a.0 == y) {
                Some(a) => a.1 += w,
                None => atoms.push((y, w)),
            }
        }
        Density {
            parts,
            atoms,
            support: (-0.5, 0.5),
        }
    }

    /// The law of X + k for an integer k.
    pub fn translate_integer(&self, k: i64) -> Density {
        let kf = k as f64;
        let parts = self
            .parts
            .iter()
            .map(|p| {
                let window = match p.window {
                    Window::Line => Window::Line,
                    Window::Interval(a, b) => Window::Interval(a + kf, b + kf),
                };
                if p.folded {
                    // folding forgets integer translations
                    p.clone()
                } else {
                    Part {
                        weight: p.weight,
                        term: p.term.translated(k),
                        window,
                        folded: false,
                    }
                }
            })
            .collect();
        let folded = self.parts.iter().all(|p| p.folded) && !self.parts.is_empty();
        let atoms = self
            .atoms
            .iter()
            .map(|&(x, w)| if folded { (x, w) } else { (x + kf, w) })
            .collect();
        let support = if folded {
            self.support
        } else {
            (self.support.0 + kf, self.support.1 + kf)
        };
        Density { parts, atoms, support }
    }
}

fn parts_support(parts: &[Part]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in parts {
        if p.weight == 0.0 {
            continue;
        }
        let (a, b) = if p.folded {
            (-0.5, 0.5)
        } else {
            let (a, b) = p.term.core();
            match p.window {
                Window::Line => (a, b),
                Window::Interval(l, h) => (a.max(l), b.min(h)),
            }
        };
        lo = lo.min(a);
        hi = hi.max(b);
    }
    if lo > hi {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

/// N(m, s2) with support m ± 12√s2.
pub fn gaussian_density(m: f64, s2: f64) -> Result<Density> {
    if !(s2 > 0.0 && s2.is_finite()) {
        return Err(Error::invalid("s2", format!("variance {s2} must be positive")));
    }
    let sd = s2.sqrt();
    Ok(Density::new(
        vec![Part::line(
            1.0,
            Term::Gauss {
                base: m,
                shift: 0,
                sd,
            },
        )],
        Vec::new(),
        (m - 12.0 * sd, m + 12.0 * sd),
    ))
}

/// Parts of N(m, σ²) ⊛ G^{⊛k}, each scaled by `weight`.
fn jump_convolution_parts(summary: &IncrementSummary, law: &JumpLaw, k: usize, weight: f64) -> Vec<Part> {
    let m = summary.m;
    let sd = summary.sd();
    if k == 0 {
        return vec![Part::line(weight, Term::Gauss { base: m, shift: 0, sd })];
    }
    match law {
        JumpLaw::Dirac { point } if point.fract() == 0.0 => vec![Part::line(
            weight,
            Term::Gauss {
                base: m,
                shift: (*point as i64) * k as i64,
                sd,
            },
        )],
        JumpLaw::Dirac { point } => vec![Part::line(
            weight,
            Term::Gauss {
                base: m + k as f64 * point,
                shift: 0,
                sd,
            },
        )],
        JumpLaw::Lattice(l) => lattice_kfold(l.pmf(), k)
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(j, p)| Part::line(weight * p, Term::Gauss { base: m, shift: j, sd }))
            .collect(),
        JumpLaw::Continuous(c) => match c.shape() {
            crate::model::JumpShape::Normal { mean, sd: tau } => vec![Part::line(
                weight,
                Term::Gauss {
                    base: m + k as f64 * mean,
                    shift: 0,
                    sd: (summary.sigma2 + k as f64 * tau * tau).sqrt(),
                },
            )],
            _ => vec![Part::line(
                weight,
                Term::Smooth {
                    table: c.kfold_table(k),
                    offset: m,
                    sd,
                },
            )],
        },
    }
}

/// k-fold self-convolution of an integer mass function.
fn lattice_kfold(pmf: &[(i64, f64)], k: usize) -> Vec<(i64, f64)> {
    let mut acc: Vec<(i64, f64)> = vec![(0, 1.0)];
    for _ in 0..k {
        let lo = acc[0].0 + pmf[0].0;
        let hi = acc[acc.len() - 1].0 + pmf[pmf.len() - 1].0;
        let mut next = vec![0.0; (hi - lo + 1) as usize];
        for &(a, pa) in &acc {
            for &(b, pb) in pmf {
                next[(a + b - lo) as usize] += pa * pb;
            }
        }
        acc = next
            .into_iter()
            .enumerate()
            .map(|(i, p)| (lo + i as i64, p))
            .filter(|(_, p)| *p != 0.0)
            .collect();
    }
    acc
}

/// Poisson weights e^{−λ}λᵏ/k! for k = 0..=K, with K the smallest index
/// whose remaining tail is below `tail_tol`.
pub fn poisson_series(lambda: f64, tail_tol: f64) -> Result<Vec<f64>> {
    let mut w = vec![(-lambda).exp()];
    let mut sum = w[0];
    while 1.0 - sum >= tail_tol {
        let k = w.len();
        if k > MAX_SERIES_TERMS {
            return Err(Error::SeriesTooLong {
                lambda,
                max_terms: MAX_SERIES_TERMS,
            });
        }
        let next = w[k - 1] * lambda / k as f64;
        if next == 0.0 && lambda > 0.0 && w[k - 1] == 0.0 {
            return Err(Error::SeriesTooLong {
                lambda,
                max_terms: MAX_SERIES_TERMS,
            });
        }
        w.push(next);
        sum += next;
    }
    Ok(w)
}

fn jump_reach(law: &JumpLaw) -> (f64, f64) {
    match law {
        JumpLaw::Dirac { point } => (*point, *point),
        JumpLaw::Lattice(l) => (l.pmf()[0].0 as f64, l.pmf()[l.pmf().len() - 1].0 as f64),
        JumpLaw::Continuous(c) => c.support(),
    }
}

fn mixture_support(summary: &IncrementSummary, law: &JumpLaw, kmax: usize) -> (f64, f64) {
    let pad = 12.0 * summary.sd();
    let (jl, jh) = jump_reach(law);
    let mut lo = summary.m - pad;
    let mut hi = summary.m + pad;
    for k in 1..=kmax {
        lo = lo.min(summary.m + k as f64 * jl - pad);
        hi = hi.max(summary.m + k as f64 * jh + pad);
    }
    (lo, hi)
}

/// Law of one increment: Σₖ e^{−λ}λᵏ/k! · N(m, σ²) ⊛ G^{⊛k}, truncated where
/// the Poisson tail drops below `tail_tol`.
pub fn increment_density_exact(summary: &IncrementSummary, law: &JumpLaw, tail_tol: f64) -> Result<Density> {
    if !(summary.lambda >= 0.0) {
        return Err(Error::invalid("lambda", "must be nonnegative"));
    }
    let weights = poisson_series(summary.lambda, tail_tol)?;
    let mut parts = Vec::new();
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        parts.extend(jump_convolution_parts(summary, law, k, w));
    }
    let support = mixture_support(summary, law, weights.len() - 1);
    Ok(Density::new(parts, Vec::new(), support))
}

/// Single-jump approximation (1 − α) N(m, σ²) + α N(m, σ²) ⊛ G.
pub fn bernoulli_density(summary: &IncrementSummary, law: &JumpLaw) -> Density {
    let alpha = summary.alpha;
    let mut parts = jump_convolution_parts(summary, law, 0, 1.0 - alpha);
    if alpha > 0.0 {
        parts.extend(jump_convolution_parts(summary, law, 1, alpha));
    }
    let kmax = usize::from(alpha > 0.0);
    Density::new(parts, Vec::new(), mixture_support(summary, law, kmax))
}

/// exp(i u m − u²σ²/2 + λ(ĝ(u) − 1)).
pub fn increment_cf(summary: &IncrementSummary, law: &JumpLaw, u: f64) -> Complex64 {
    let g = law.cf(u);
    let exponent = Complex64::new(-0.5 * u * u * summary.sigma2, u * summary.m) + summary.lambda * (g - 1.0);
    exponent.exp()
}
