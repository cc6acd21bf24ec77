//! Named parameter families and their JSON representation.

use super::{validate, WAParams};
use crate::smile::GridSpec;
use crate::error::{Error, Result};
use crate::gaussian::{norm_cdf, norm_pdf, norm_ppf_unchecked};
use serde::{Deserialize, Serialize};

fn validated(p: WAParams) -> Result<WAParams> {
    validate(&p, &GridSpec::delta_check(p.quadrature.endpoint_eps)).into_result()?;
    Ok(p)
}

/// Constant total volatility `c`.
pub fn family_flat(c: f64) -> Result<WAParams> {
    validated(flat_unchecked(c)?)
}

pub(crate) fn flat_unchecked(c: f64) -> Result<WAParams> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Validation(format!("flat level must be positive, got {c}")));
    }
    let p = WAParams::new(
        norm_cdf(c),
        move |_, z| c / norm_pdf(z),
        move |_, z| (c - z) / norm_pdf(z),
        move |_, z| 1.0 - c / z,
    )
    .with_family(FamilyParams::Flat { c });
    Ok(p)
}

/// Skew with a left wing bounded by `c_λ`, a linear `μ` and an `α` that
/// mirrors `μ` about `δ̃` up to `δ̂ = 2δ̃ − 1/2`, constant beyond.
pub fn family_bounded_skew(c_lambda: f64, tilde_delta: f64) -> Result<WAParams> {
    validated(bounded_skew_unchecked(c_lambda, tilde_delta)?)
}

pub(crate) fn bounded_skew_unchecked(c_lambda: f64, tilde_delta: f64) -> Result<WAParams> {
    if !(c_lambda > 0.0 && c_lambda.is_finite()) {
        return Err(Error::Validation(format!("c_lambda must be positive, got {c_lambda}")));
    }
    if !(tilde_delta > 0.5 && tilde_delta < 0.75) {
        // δ̂ = 2δ̃ − 1/2 must stay below 1 or the α integral stays finite
        return Err(Error::Validation(format!("tilde_delta must lie in (1/2, 3/4), got {tilde_delta}")));
    }
    let n0 = norm_pdf(0.0);
    let mu = move |d: f64| c_lambda / n0 * (tilde_delta - d) / (tilde_delta - 0.5);
    let hat = 2.0 * tilde_delta - 0.5;
    let zh = norm_ppf_unchecked(hat);
    let alpha_tail = norm_pdf(zh) / zh * mu(0.5);
    let p = WAParams::new(
        tilde_delta,
        move |_, z| c_lambda / norm_pdf(z),
        move |d, _| mu(d),
        move |d, z| if d < hat { norm_pdf(z) / z * mu(2.0 * tilde_delta - d) } else { alpha_tail },
    )
    .with_breakpoints(&[hat])
    .with_family(FamilyParams::BoundedSkew { c_lambda });
    Ok(p)
}

/// W-shaped smile with `c = N⁻¹(δ̃)/n(N⁻¹(δ̃))`: `λ = δ̂²c/δ²` below `δ̂` and
/// `c` above, `μ = c − z/n(z)`, `α = 1 − c n(z)/z` up to `δ̂̂`, constant beyond.
pub fn family_w_shape(tilde_delta: f64, hat_delta: f64, hat_hat_delta: f64) -> Result<WAParams> {
    validated(w_shape_unchecked(tilde_delta, hat_delta, hat_hat_delta)?)
}

pub(crate) fn w_shape_unchecked(tilde_delta: f64, hat_delta: f64, hat_hat_delta: f64) -> Result<WAParams> {
    if !(tilde_delta > 0.5 && tilde_delta < 1.0) {
        return Err(Error::Validation(format!("tilde_delta must lie in (1/2, 1), got {tilde_delta}")));
    }
    if !(hat_delta > 0.0 && hat_delta <= 0.5) {
        return Err(Error::Validation(format!("hat_delta must lie in (0, 1/2], got {hat_delta}")));
    }
    if !(hat_hat_delta > tilde_delta && hat_hat_delta < 1.0) {
        return Err(Error::Validation(format!(
            "hat_hat_delta must lie in (tilde_delta, 1), got {hat_hat_delta}"
        )));
    }
    let zt = norm_ppf_unchecked(tilde_delta);
    let c = zt / norm_pdf(zt);
    let zhh = norm_ppf_unchecked(hat_hat_delta);
    let alpha_tail = 1.0 - c * norm_pdf(zhh) / zhh;
    let p = WAParams::new(
        tilde_delta,
        move |d, _| if d < hat_delta { hat_delta * hat_delta * c / (d * d) } else { c },
        move |_, z| c - z / norm_pdf(z),
        move |d, z| if d < hat_hat_delta { 1.0 - c * norm_pdf(z) / z } else { alpha_tail },
    )
    .with_breakpoints(&[hat_delta, hat_hat_delta])
    .with_family(FamilyParams::WShape { hat_delta, hat_hat_delta });
    Ok(p)
}

/// Piecewise-linear function of delta through `(δ, value)` knots, constant
/// outside the first and last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Knots(pub Vec<(f64, f64)>);

impl Knots {
    pub fn eval(&self, d: f64) -> f64 {
        let k = &self.0;
        if d <= k[0].0 {
            return k[0].1;
        }
        if d >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|p| p.0 <= d);
        let ((x0, y0), (x1, y1)) = (k[i - 1], k[i]);
        y0 + (y1 - y0) * (d - x0) / (x1 - x0)
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Validation(format!("{name}: no knots")));
        }
        if self.0.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Validation(format!("{name}: knot deltas must increase strictly")));
        }
        if self.0.iter().any(|p| !(p.0 > 0.0 && p.0 < 1.0 && p.1.is_finite())) {
            return Err(Error::Validation(format!("{name}: knots need deltas in (0, 1) and finite values")));
        }
        Ok(())
    }

    fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|p| p.0)
    }
}

/// Knot-based parameters: `λ = g_λ(δ)/n(z)`, `μ = g_μ(δ)/n(z)`, `α = g_α(δ)`
/// with each `g` piecewise linear. Scaling by the density makes the
/// divergence conditions hold whenever the end knots of `g_λ` are positive
/// and the last knot of `g_α` lies in (0, 1); `g_λ` near zero is the limit of
/// the left wing.
pub fn family_custom(tilde_delta: f64, lambda_scaled: Knots, mu_scaled: Knots, alpha: Knots) -> Result<WAParams> {
    validated(custom_unchecked(tilde_delta, lambda_scaled, mu_scaled, alpha)?)
}

pub(crate) fn custom_unchecked(tilde_delta: f64, lambda_scaled: Knots, mu_scaled: Knots, alpha: Knots) -> Result<WAParams> {
    lambda_scaled.check("lambda_scaled")?;
    mu_scaled.check("mu_scaled")?;
    alpha.check("alpha")?;
    let mut bps: Vec<f64> = lambda_scaled.deltas().chain(mu_scaled.deltas()).chain(alpha.deltas()).collect();
    bps.sort_by(f64::total_cmp);
    let family = FamilyParams::Custom {
        lambda_scaled: lambda_scaled.clone(),
        mu_scaled: mu_scaled.clone(),
        alpha: alpha.clone(),
    };
    Ok(WAParams::new(
        tilde_delta,
        move |d, z| lambda_scaled.eval(d) / norm_pdf(z),
        move |d, z| mu_scaled.eval(d) / norm_pdf(z),
        move |d, _| alpha.eval(d),
    )
    .with_breakpoints(&bps)
    .with_family(family))
}

/// Family-specific parameters, tagged by family name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum FamilyParams {
    Flat { c: f64 },
    BoundedSkew { c_lambda: f64 },
    WShape { hat_delta: f64, hat_hat_delta: f64 },
    Custom { lambda_scaled: Knots, mu_scaled: Knots, alpha: Knots },
}

/// Parameter file: `{"tilde_delta": .., "family": .., "params": {..}}`.
/// For the flat family `tilde_delta` is implied by `c` and may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilde_delta: Option<f64>,
    #[serde(flatten)]
    pub family: FamilyParams,
}

impl ParamsFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("parameter file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameter files always serialize")
    }

    pub fn from_params(params: &WAParams) -> Option<Self> {
        params.family().map(|f| Self { tilde_delta: Some(params.tilde_delta()), family: f.clone() })
    }

    pub fn build(&self) -> Result<WAParams> {
        let need = || {
            self.tilde_delta.ok_or_else(|| Error::Validation("tilde_delta is required for this family".into()))
        };
        match &self.family {
            FamilyParams::Flat { c } => {
                let p = family_flat(*c)?;
                if let Some(td) = self.tilde_delta {
                    if (td - p.tilde_delta()).abs() > 1e-8 {
                        return Err(Error::Validation(format!(
                            "flat family with c={c} has tilde_delta={}, file says {td}",
                            p.tilde_delta()
                        )));
                    }
                }
                Ok(p)
            }
            FamilyParams::BoundedSkew { c_lambda } => family_bounded_skew(*c_lambda, need()?),
            FamilyParams::WShape { hat_delta, hat_hat_delta } => family_w_shape(need()?, *hat_delta, *hat_hat_delta),
            FamilyParams::Custom { lambda_scaled, mu_scaled, alpha } => {
                family_custom(need()?, lambda_scaled.clone(), mu_scaled.clone(), alpha.clone())
            }
        }
    }
}
