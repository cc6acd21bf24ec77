//! Monotone interpolation of `l = −k` through delta pillars.
//!
//! `l` is a piecewise cubic in `z = N⁻¹(δ)` through the pillars, continued
//! linearly in `z` beyond them (a constant `λ n(z)` on the left, `α = 1 − C/z`
//! on the right), so both wings of the smile flatten out. A pure
//! interpolant of the pillars almost never touches the parabola `z²/2`, yet
//! it must touch it exactly once, at `δ̃`. An extra knot is therefore placed
//! on the parabola between the two pillars where `d2` changes sign, with the
//! parabola's slope, which makes the two volatility branches meet there.

use super::{residuals, CalibrationConfig, CalibrationResult, Method, PillarSet};
use crate::delta_map::{check_sigma_delta_to_k, check_sigma_wa, sigma_from_l_value, PLATEAU_TOL};
use crate::error::{Error, Result};
use crate::gaussian::{norm_cdf, norm_ppf, norm_ppf_unchecked};
use crate::numerics::pchip::{EndSlopes, Pchip};
use crate::smile::DeltaSmile;
use std::sync::Arc;

/// `g = l − z²/2` above this counts as touching the parabola.
const TOUCH_TOL: f64 = 1e-12;

fn violation(bullet: &str, detail: String) -> Error {
    Error::ConstraintViolation(format!("{bullet}: {detail}"))
}

/// Interpolates `l` through the pillars (strike pillars are converted first)
/// and checks the conditions for a convertible smile: `l` strictly
/// increasing from −∞ to +∞, `l(1/2) < 0`, `l ≤ N⁻¹²/2` above 1/2 with
/// equality at exactly one `δ̃`. With `cfg.wa_strict` also
/// `l′ > N⁻¹/n(N⁻¹)` on `(1/2, δ̃)` and `<` above `δ̃`.
///
/// The result reproduces the pillar volatilities to rounding.
pub fn calibrate_l_interp(p: &PillarSet, cfg: &CalibrationConfig) -> Result<CalibrationResult> {
    let dp = super::pillars_to_delta(p)?;
    let v = dp.total_vols();
    let z: Vec<f64> = dp.pillars().iter().map(|x| norm_ppf(x.0)).collect::<Result<_>>()?;
    let l: Vec<f64> = z.iter().zip(&v).map(|(z, v)| (z - 0.5 * v) * v).collect();
    let m: Vec<f64> = z.iter().zip(&v).map(|(z, v)| z - v).collect();

    if let Some(i) = (0..l.len() - 1).find(|&i| !(l[i + 1] > l[i])) {
        return Err(violation(
            "l strictly increasing",
            format!("l({})={} is not below l({})={}", dp.pillars()[i].0, l[i], dp.pillars()[i + 1].0, l[i + 1]),
        ));
    }
    let plain = Pchip::new(z.clone(), l.clone(), EndSlopes::Secant)?;
    let (s0, s1) = plain.end_slopes();
    if !(s0 > 0.0 && s1 > 0.0) {
        return Err(violation("l(0)=-inf, l(1)=+inf", format!("extrapolation slopes {s0}, {s1}")));
    }
    let l_half = plain.eval(0.0);
    if !(l_half < 0.0) {
        return Err(violation("l(1/2)<0", format!("interpolated l(1/2)={l_half}")));
    }

    let changes = m.windows(2).filter(|w| (w[0] <= 0.0) != (w[1] <= 0.0)).count();
    if changes != 1 || m[0] > 0.0 {
        return Err(violation(
            "exists unique tilde_delta",
            format!("pillar d2 values must change sign once from negative to positive, found {changes} changes"),
        ));
    }
    let i = m.iter().rposition(|&x| x <= 0.0).unwrap();
    let (zs, ls, knot) = if m[i] == 0.0 {
        (z.clone(), l.clone(), i)
    } else {
        let zt = tangency(&z, &l, &m, i).ok_or_else(|| {
            violation(
                "exists unique tilde_delta",
                format!("no point between deltas {} and {} where l meets N^-1^2/2 monotonically", dp.pillars()[i].0, dp.pillars()[i + 1].0),
            )
        })?;
        let mut zs = z.clone();
        let mut ls = l.clone();
        zs.insert(i + 1, zt);
        ls.insert(i + 1, 0.5 * zt * zt);
        (zs, ls, i + 1)
    };
    let zt = zs[knot];
    let spline = Pchip::new(zs, ls, EndSlopes::Secant)?.with_slope(knot, zt);
    let tilde_delta = norm_cdf(zt);

    let grid = cfg.grid().points();
    let gz: Vec<f64> = grid.iter().map(|&d| norm_ppf_unchecked(d)).collect();
    let gl: Vec<f64> = gz.iter().map(|&x| spline.eval(x)).collect();
    if let Some(j) = (0..gl.len() - 1).find(|&j| gl[j + 1] - gl[j] < -PLATEAU_TOL) {
        return Err(violation("l strictly increasing", format!("l decreases after delta={}", grid[j])));
    }
    let g: Vec<f64> = gz.iter().zip(&gl).map(|(z, l)| l - 0.5 * z * z).collect();
    if let Some(j) = (0..g.len()).find(|&j| gz[j] > 0.0 && g[j] > TOUCH_TOL * (1.0 + gz[j] * gz[j])) {
        return Err(violation("l(delta)<=N^-1(delta)^2/2", format!("l exceeds the bound at delta={}", grid[j])));
    }
    // contacts with the parabola: runs of grid points within the tolerance,
    // the one around the inserted knot included
    let mut runs = 0;
    let mut inside = false;
    for j in 0..g.len() {
        let near = g[j] > -TOUCH_TOL * (1.0 + gz[j] * gz[j]) || (j + 1 < g.len() && gz[j] < zt && gz[j + 1] > zt);
        if near && !inside {
            runs += 1;
        }
        inside = near;
    }
    if runs > 1 {
        return Err(violation("exists unique tilde_delta", format!("l meets N^-1^2/2 at {runs} separate places")));
    }
    if cfg.wa_strict {
        for (j, &x) in gz.iter().enumerate() {
            let slack = spline.derivative(x) - x;
            if x > 0.0 && x < zt && slack < -TOUCH_TOL {
                return Err(violation(
                    "l'(delta)>N^-1(delta)/n(N^-1(delta)) on (1/2, tilde_delta)",
                    format!("fails at delta={}", grid[j]),
                ));
            }
            if x > zt && slack > TOUCH_TOL {
                return Err(violation(
                    "l'(delta)<N^-1(delta)/n(N^-1(delta)) above tilde_delta",
                    format!("fails at delta={}", grid[j]),
                ));
            }
        }
    }

    let spline = Arc::new(spline);
    let sp = spline.clone();
    let smile = DeltaSmile::new(move |d| {
        let x = norm_ppf_unchecked(d);
        sigma_from_l_value(x, sp.eval(x), x <= zt).unwrap_or(f64::NAN)
    })
    .with_domain_eps(cfg.domain_eps);
    let report = if cfg.wa_strict { check_sigma_wa(&smile, &cfg.grid()) } else { check_sigma_delta_to_k(&smile, &cfg.grid()) };
    let report = report.into_result()?;
    let res = residuals(&smile, &dp);
    let objective = res.iter().map(|r| r * r).sum();
    Ok(CalibrationResult {
        smile,
        params: None,
        pillars: dp,
        residuals: res,
        method: Method::LInterp,
        tilde_delta,
        objective,
        report,
    })
}

/// Position of the tangency knot between pillars `i` and `i + 1`: the zero of
/// the linear interpolant of `m`, moved into the interval where the knot
/// keeps the `l` values increasing.
fn tangency(z: &[f64], l: &[f64], m: &[f64], i: usize) -> Option<f64> {
    let lo = z[i].max((2.0 * l[i].max(0.0)).sqrt()).max(0.0);
    let hi = z[i + 1].min((2.0 * l[i + 1]).sqrt());
    if !(hi > lo) {
        return None;
    }
    let guess = z[i] - m[i] * (z[i + 1] - z[i]) / (m[i + 1] - m[i]);
    Some(if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) })
}
