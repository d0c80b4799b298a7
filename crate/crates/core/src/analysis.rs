//! Curve fitting and optimum location for the window-size trade-off.
//!
//! The pixel-cost trend over window multiples is fitted with a fifth-order
//! polynomial and the distance-error trend with an exponential `a*e^(b*x)`;
//! the optimum window multiple is read off where the two normalized curves
//! intersect, with the grid argmin of their sum reported alongside.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("series must contain at least two distinct values")]
    ConstantSeries,
    #[error("underdetermined fit: {points} point(s) for {unknowns} unknown(s)")]
    Underdetermined { points: usize, unknowns: usize },
    #[error("xs and ys differ in length ({xs} vs {ys})")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("singular least-squares system (column {column} has no pivot)")]
    SingularSystem { column: usize },
    #[error("exponential fit requires non-negative data (y[{index}] = {value})")]
    NegativeData { index: usize, value: f64 },
}

/// Polynomial `a0 + a1*x + ... + an*x^n`; `coeffs[i]` multiplies `x^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyModel {
    pub coeffs: Vec<f64>,
}

impl PolyModel {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Exponential `a * e^(b*x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpModel {
    pub a: f64,
    pub b: f64,
}

impl ExpModel {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * (self.b * x).exp()
    }
}

/// A located optimum: abscissa and curve value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumPoint {
    pub x: f64,
    pub value: f64,
}

pub fn euclidean_distance(p: (f64, f64), q: (f64, f64)) -> f64 {
    let dx = q.0 - p.0;
    let dy = q.1 - p.1;
    (dx * dx + dy * dy).sqrt()
}

/// Min-max scale a series onto `[0, 1]`.
pub fn normalize(series: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(AnalysisError::ConstantSeries);
    }
    Ok(series.iter().map(|v| (v - min) / (max - min)).collect())
}

/// Least-squares solve of an `n x m` system by Householder QR.
///
/// Orthogonalizing instead of forming normal equations keeps the
/// ill-conditioned Vandermonde columns of high-degree fits tractable.
fn lstsq_qr(
    rows: usize,
    cols: usize,
    a: &mut [f64],
    y: &mut [f64],
) -> Result<Vec<f64>, AnalysisError> {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(y.len(), rows);
    for k in 0..cols {
        // Householder vector for column k, rows k..
        let mut norm = 0.0;
        for i in k..rows {
            norm += a[i * cols + k] * a[i * cols + k];
        }
        let norm = norm.sqrt();
        if norm <= f64::EPSILON * rows as f64 {
            return Err(AnalysisError::SingularSystem { column: k });
        }
        let alpha = if a[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v = vec![0.0; rows - k];
        v[0] = a[k * cols + k] - alpha;
        for i in k + 1..rows {
            v[i - k] = a[i * cols + k];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        a[k * cols + k] = alpha;
        for i in k + 1..rows {
            a[i * cols + k] = 0.0;
        }
        if vtv <= 0.0 {
            continue;
        }
        // reflect the remaining columns and the right-hand side
        for j in k + 1..cols {
            let mut dot = 0.0;
            for i in k..rows {
                dot += v[i - k] * a[i * cols + j];
            }
            let scale = 2.0 * dot / vtv;
            for i in k..rows {
                a[i * cols + j] -= scale * v[i - k];
            }
        }
        let mut dot = 0.0;
        for i in k..rows {
            dot += v[i - k] * y[i];
        }
        let scale = 2.0 * dot / vtv;
        for i in k..rows {
            y[i] -= scale * v[i - k];
        }
    }
    // back-substitute the upper-triangular system
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut acc = y[k];
        for j in k + 1..cols {
            acc -= a[k * cols + j] * x[j];
        }
        let pivot = a[k * cols + k];
        if pivot.abs() <= f64::EPSILON * rows as f64 {
            return Err(AnalysisError::SingularSystem { column: k });
        }
        x[k] = acc / pivot;
    }
    Ok(x)
}

/// Least-squares polynomial fit of the given degree.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<PolyModel, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    let unknowns = degree + 1;
    if xs.len() <= degree {
        return Err(AnalysisError::Underdetermined {
            points: xs.len(),
            unknowns,
        });
    }
    let rows = xs.len();
    let mut a = vec![0.0; rows * unknowns];
    for (i, &x) in xs.iter().enumerate() {
        let mut pow = 1.0;
        for j in 0..unknowns {
            a[i * unknowns + j] = pow;
            pow *= x;
        }
    }
    let mut rhs = ys.to_vec();
    let coeffs = lstsq_qr(rows, unknowns, &mut a, &mut rhs)?;
    Ok(PolyModel { coeffs })
}

/// Floor applied to error data before the exponential fit; the model is
/// strictly positive, but measured errors can be exactly zero.
pub const EXP_FIT_FLOOR: f64 = 1e-4;

/// Fit `y = a*e^(b*x)`: log-linear least squares for the initial guess,
/// then Gauss-Newton refinement on the untransformed residuals.
pub fn expfit(xs: &[f64], ys: &[f64]) -> Result<ExpModel, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(AnalysisError::Underdetermined {
            points: xs.len(),
            unknowns: 2,
        });
    }
    if let Some((index, &value)) = ys.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(AnalysisError::NegativeData { index, value });
    }
    let ys: Vec<f64> = ys.iter().map(|&y| y.max(EXP_FIT_FLOOR)).collect();

    // linearized start: ln(y) = ln(a) + b*x
    let ln_ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let line = polyfit(xs, &ln_ys, 1)?;
    let mut a = line.coeffs[0].exp();
    let mut b = line.coeffs[1];

    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = a * (b * x).exp() - y;
                r * r
            })
            .sum()
    };
    let mut best = sse(a, b);
    for _ in 0..50 {
        let n = xs.len();
        let mut jac = vec![0.0; n * 2];
        let mut rhs = vec![0.0; n];
        for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
            let e = (b * x).exp();
            jac[i * 2] = e;
            jac[i * 2 + 1] = a * x * e;
            rhs[i] = y - a * e;
        }
        let step = match lstsq_qr(n, 2, &mut jac, &mut rhs) {
            Ok(s) => s,
            Err(_) => break,
        };
        // damped acceptance: halve the step until the residual improves
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let na = a + lambda * step[0];
            let nb = b + lambda * step[1];
            let ns = sse(na, nb);
            if ns.is_finite() && ns <= best {
                a = na;
                b = nb;
                best = ns;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        if (lambda * step[0]).hypot(lambda * step[1]) < 1e-10 {
            break;
        }
    }
    Ok(ExpModel { a, b })
}

/// Smallest root of `F(x) - G(x)` on `[lo, hi]`, located by scanning for a
/// sign change and bisecting to an interval below 1e-6. Returns `None`
/// when the curves do not cross in range.
pub fn find_intersection(f: &PolyModel, g: &ExpModel, lo: f64, hi: f64) -> Option<OptimumPoint> {
    debug_assert!(hi > lo);
    let diff = |x: f64| f.eval(x) - g.eval(x);
    let steps = (((hi - lo) / 1e-3).ceil() as usize).clamp(1, 1_000_000);
    let dx = (hi - lo) / steps as f64;

    let mut x_prev = lo;
    let mut d_prev = diff(lo);
    if d_prev == 0.0 {
        return Some(OptimumPoint {
            x: lo,
            value: f.eval(lo),
        });
    }
    for i in 1..=steps {
        let x = if i == steps { hi } else { lo + i as f64 * dx };
        let d = diff(x);
        if d == 0.0 {
            return Some(OptimumPoint {
                x,
                value: f.eval(x),
            });
        }
        if d_prev.signum() != d.signum() {
            // bisect [x_prev, x]
            let (mut a, mut b) = (x_prev, x);
            let mut da = d_prev;
            while b - a > 1e-6 {
                let mid = 0.5 * (a + b);
                let dm = diff(mid);
                if dm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if da.signum() != dm.signum() {
                    b = mid;
                } else {
                    a = mid;
                    da = dm;
                }
            }
            let root = 0.5 * (a + b);
            return Some(OptimumPoint {
                x: root,
                value: f.eval(root),
            });
        }
        x_prev = x;
        d_prev = d;
    }
    None
}

/// Minimizer of `F(x) + G(x)` on `[lo, hi]`: scan an even grid, then refine
/// the best bracket by golden-section search. The result is never worse
/// than the best grid point.
pub fn argmin_sum(f: &PolyModel, g: &ExpModel, lo: f64, hi: f64, grid_step: f64) -> OptimumPoint {
    debug_assert!(grid_step > 0.0 && hi > lo);
    let h = |x: f64| f.eval(x) + g.eval(x);
    let steps = (((hi - lo) / grid_step).ceil() as usize).clamp(1, 10_000_000);
    let dx = (hi - lo) / steps as f64;
    let mut best_x = lo;
    let mut best_v = h(lo);
    for i in 1..=steps {
        let x = if i == steps { hi } else { lo + i as f64 * dx };
        let v = h(x);
        if v < best_v {
            best_v = v;
            best_x = x;
        }
    }

    // golden-section refinement inside the winning bracket
    let (mut a, mut b) = ((best_x - dx).max(lo), (best_x + dx).min(hi));
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = h(x1);
    let mut f2 = h(x2);
    while b - a > 1e-10 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = h(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = h(x2);
        }
    }
    let refined = 0.5 * (a + b);
    if h(refined) <= best_v {
        OptimumPoint {
            x: refined,
            value: h(refined),
        }
    } else {
        OptimumPoint {
            x: best_x,
            value: best_v,
        }
    }
}

/// Reference fit parameters for the normalized cost and error curves,
/// whose crossing sits at (2.16, 0.40). Used by the optimum-reproduction
/// checks.
pub mod reference {
    /// a0..a5 of the fifth-order cost fit.
    pub const POLY_COEFFS: [f64; 6] = [-0.2007, 0.4672, -0.1370, 0.0295, -0.0032, 0.0001];
    /// (a, b) of the exponential error fit.
    pub const EXP_A: f64 = 1.31;
    pub const EXP_B: f64 = -0.5457;
}
