//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! The integrator keeps a heap of panels ordered by their error estimate and
//! bisects the worst one until the summed error drops below the tolerance.
//! Callers may seed the panel list with breakpoints (mixture peaks, kinks,
//! window edges) so that narrow features are never straddled by a single
//! panel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_panels: 20_000,
        }
    }
}

impl QuadOptions {
    pub fn abs(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Panel {
        lo,
        hi,
        value,
        error,
    }
}

/// Integrates `f` over `[lo, hi]` with default options.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, what: &str) -> Result<f64> {
    integrate_with(&f, lo, hi, &[], QuadOptions::default(), what).map(|r| r.value)
}

/// Integrates `f` over `[lo, hi]`, first splitting at the interior points of
/// `breaks`.
///
/// `what` names the integrand in the error raised on non-convergence.
pub fn integrate_with<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    opts: QuadOptions,
    what: &str,
) -> Result<QuadResult> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("quadrature bounds", format!("[{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };

    let mut points: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    points.push(a);
    points.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut heap = BinaryHeap::with_capacity(points.len() * 4);
    let mut settled_value = 0.0;
    let mut settled_error = 0.0;
    let mut total_value = 0.0;
    let mut total_error = 0.0;
    for w in points.windows(2) {
        let p = gk15(f, w[0], w[1]);
        total_value += p.value;
        total_error += p.error;
        heap.push(p);
    }
    let mut panels = heap.len();

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total_value.abs());
        if total_error <= tol {
            // Running totals lose digits after a huge panel is replaced; confirm.
            total_value = heap.iter().map(|p| p.value).sum::<f64>() + settled_value;
            total_error = heap.iter().map(|p| p.error).sum::<f64>() + settled_error;
            if total_error <= opts.abs_tol.max(opts.rel_tol * total_value.abs()) {
                break;
            }
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        // Panel too narrow to split further in floating point: freeze it.
        if mid <= worst.lo || mid >= worst.hi || (worst.hi - worst.lo) < 1e-15 * worst.lo.abs().max(1.0)
        {
            settled_value += worst.value;
            settled_error += worst.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        if panels >= opts.max_panels {
            heap.push(worst);
            let est = total_error;
            return Err(Error::Quadrature {
                what: what.to_string(),
                lo,
                hi,
                error: est,
            });
        }
        let left = gk15(f, worst.lo, mid);
        let right = gk15(f, mid, worst.hi);
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        panels += 1;
    }

    // Re-sum to shed the drift of the running totals.
    let value: f64 = heap.iter().map(|p| p.value).sum::<f64>() + settled_value;
    let error: f64 = heap.iter().map(|p| p.error).sum::<f64>() + settled_error;
    Ok(QuadResult {
        value: sign * value,
        error,
        panels,
    })
}
