//! Small numerical kernels shared by the solvers: quadrature, bracketing,
//! one-dimensional minimisation and a complex tridiagonal solver.

use num_complex::Complex64;

/// Trapezoid rule on a (possibly non-uniform) grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Trapezoid weights for the nodes of a grid; `Σ w_j f_j` equals [`trapezoid`].
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for j in 0..n.saturating_sub(1) {
        let h = x[j + 1] - x[j];
        w[j] += 0.5 * h;
        w[j + 1] += 0.5 * h;
    }
    w
}

pub fn is_strictly_increasing(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[1] > w[0]) && x.iter().all(|v| v.is_finite())
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Stops when the bracket
/// is below `xtol` (absolute) or the function vanishes exactly.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid == lo || mid == hi {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverts a monotonically increasing function: finds `x` in `[lo, hi]`
/// with `f(x) = target`. Requires `f(lo) <= target <= f(hi)`.
pub fn invert_increasing(f: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64, xtol: f64) -> f64 {
    bisect(|x| f(x) - target, lo, hi, xtol)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum inside `[lo, hi]`. Returns `(x, f(x))`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rtol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        let scale = 0.5 * (lo.abs() + hi.abs());
        if hi - lo <= rtol * scale {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Vertex of the parabola through three points.
pub fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let [x0, x1, x2] = x;
    let [y0, y1, y2] = y;
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        x1
    } else {
        x1 - 0.5 * num / den
    }
}

/// Linear interpolation of tabulated data at `xq`; clamps outside the table.
pub fn interp_linear<T>(x: &[f64], y: &[T], xq: f64) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let n = x.len();
    if xq <= x[0] {
        return y[0];
    }
    if xq >= x[n - 1] {
        return y[n - 1];
    }
    let j = x.partition_point(|&v| v <= xq).saturating_sub(1).min(n - 2);
    let s = (xq - x[j]) / (x[j + 1] - x[j]);
    y[j] * (1.0 - s) + y[j + 1] * s
}

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// `sub[0]` and `sup[n-1]` are ignored. The solution overwrites `rhs`;
/// `scratch` must have the same length.
pub fn solve_tridiagonal(
    sub: &[Complex64],
    diag: &[Complex64],
    sup: &[Complex64],
    rhs: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * scratch[i];
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i + 1] * next;
    }
}
