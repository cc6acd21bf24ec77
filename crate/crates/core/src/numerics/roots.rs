//! Bracketed root finding for monotone scalar equations.

use crate::error::{Error, Result};

/// Stopping rules for [`brent`].
#[derive(Debug, Clone, Copy)]
pub struct RootTol {
    /// Stop once `|f(x)| <= residual`.
    pub residual: f64,
    /// Absolute bracket width added to the machine-precision floor.
    pub x_abs: f64,
    pub max_iter: usize,
}

impl Default for RootTol {
    fn default() -> Self {
        Self { residual: 1e-12, x_abs: 0.0, max_iter: 200 }
    }
}

/// Brent's method on a sign-changing bracket `[a, b]`: bisection safeguarding
/// secant and inverse quadratic steps.
pub fn brent<F>(mut f: F, a: f64, b: f64, tol: RootTol) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let fa = f(a);
    let fb = f(b);
    brent_with_values(f, a, b, fa, fb, tol)
}

/// As [`brent`] when `f(a)` and `f(b)` are already known.
pub fn brent_with_values<F>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: RootTol,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::Convergence("function is NaN at bracket end".into()));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Convergence(format!(
            "no sign change on [{a}, {b}] (f = {fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.x_abs;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb.abs() <= tol.residual {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::Convergence(format!("function is NaN at {b}")));
        }
    }
    Err(Error::Convergence(format!(
        "root finder exceeded {} iterations",
        tol.max_iter
    )))
}

/// Plain bisection; returns the bracket midpoint after the sign change has
/// been narrowed below `x_tol`.
pub fn bisect<F>(mut f: F, mut a: f64, mut b: f64, x_tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Convergence(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= x_tol || mid == a || mid == b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
