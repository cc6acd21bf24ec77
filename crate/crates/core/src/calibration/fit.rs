//! Least-squares fit of a parameter family to delta pillars.

use super::{residuals, switch_estimate, CalibrationConfig, CalibrationResult, Method, PillarSet};
use crate::delta_map::check_sigma_wa;
use crate::error::{Error, Result};
use crate::gaussian::norm_cdf;
use crate::numerics::nelder_mead::{minimize, Minimum, NelderMeadOptions};
use crate::wa_param::{
    bounded_skew_unchecked, custom_unchecked, flat_unchecked, validate, w_shape_unchecked, Knots, WAParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Family fitted by [`calibrate_wa_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFamily {
    /// Level `c`.
    Flat,
    /// `c_λ` and `δ̃`.
    BoundedSkew,
    /// `δ̃`, `δ̂`, `δ̂̂`.
    WShape,
    /// `δ̃` and knot values of the density-scaled `λ`, `μ` and of `α`.
    SplineParams,
}

impl FitFamily {
    pub const ALL: [FitFamily; 4] = [FitFamily::Flat, FitFamily::BoundedSkew, FitFamily::WShape, FitFamily::SplineParams];

    pub fn name(self) -> &'static str {
        match self {
            FitFamily::Flat => "flat",
            FitFamily::BoundedSkew => "bounded_skew",
            FitFamily::WShape => "w_shape",
            FitFamily::SplineParams => "spline_params",
        }
    }

    /// Parameters from unconstrained coordinates. The maps keep each
    /// family's own range conditions, e.g. `δ̃ = 1/2 + sigmoid(u)/2`.
    fn build(self, u: &[f64]) -> Result<WAParams> {
        match self {
            FitFamily::Flat => flat_unchecked(u[0].exp()),
            FitFamily::BoundedSkew => bounded_skew_unchecked(u[0].exp(), 0.5 + 0.25 * sigmoid(u[1])),
            FitFamily::WShape => {
                let td = 0.5 + 0.5 * sigmoid(u[0]);
                w_shape_unchecked(td, 0.5 * sigmoid(u[1]), td + (1.0 - td) * sigmoid(u[2]))
            }
            FitFamily::SplineParams => {
                let td = 0.5 + 0.5 * sigmoid(u[0]);
                let lambda = Knots(vec![(0.02, u[1].exp()), (0.15, u[2].exp()), (0.5, u[3].exp())]);
                let mu = Knots(vec![(0.5, u[4].exp()), (td, u[5].exp())]);
                let alpha = Knots(vec![(td, sigmoid(u[6])), (1.0 - 0.25 * (1.0 - td), sigmoid(u[7]))]);
                custom_unchecked(td, lambda, mu, alpha)
            }
        }
    }

    /// Deterministic first start read off the pillars.
    fn initial(self, p: &PillarSet) -> Vec<f64> {
        let v = p.total_vols();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let td = switch_estimate(p).map(norm_cdf).unwrap_or_else(|| norm_cdf(mean));
        let lo = p.pillars()[0].0;
        match self {
            FitFamily::Flat => vec![mean.ln()],
            FitFamily::BoundedSkew => vec![v[0].ln(), logit(((td - 0.5) / 0.25).clamp(0.05, 0.95))],
            FitFamily::WShape => {
                // above the lowest pillars so the left wing starts out visible
                let hat = (4.0 * lo).clamp(0.01, 0.25);
                vec![logit(((td - 0.5) / 0.5).clamp(0.05, 0.95)), logit(hat / 0.5), 0.0]
            }
            FitFamily::SplineParams => {
                // the flat smile at the mean level, with μ and α kept inside their ranges
                let ln = mean.ln();
                let zt = crate::gaussian::norm_ppf_unchecked(td);
                vec![
                    logit(((td - 0.5) / 0.5).clamp(0.05, 0.95)),
                    ln,
                    ln,
                    ln,
                    ln,
                    (mean - zt).abs().max(0.05 * mean).ln(),
                    logit(0.05),
                    logit(0.5),
                ]
            }
        }
    }
}

impl fmt::Display for FitFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown family `{s}`; expected flat, bounded_skew, w_shape or spline_params")))
    }
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn objective(family: FitFamily, p: &PillarSet, u: &[f64]) -> f64 {
    let Ok(params) = family.build(u) else {
        return f64::INFINITY;
    };
    let sq = p.maturity().sqrt();
    let mut acc = 0.0;
    for &(d, s) in p.pillars() {
        match params.sigma(d) {
            Ok(v) => acc += (v.value() / sq - s).powi(2),
            Err(_) => return f64::INFINITY,
        }
    }
    acc
}

fn start_point(family: FitFamily, p: &PillarSet, seed: u64, index: usize) -> Vec<f64> {
    let x0 = family.initial(p);
    if index == 0 {
        return x0;
    }
    // one stream per start, so adding starts never changes earlier ones
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    x0.into_iter().map(|x| x + rng.gen_range(-1.5..1.5)).collect()
}

fn run_start(family: FitFamily, p: &PillarSet, x0: &[f64], max_evals: usize) -> Minimum {
    let opts = NelderMeadOptions { max_evals, f_tol: 1e-20, x_tol: 1e-10 };
    let step = vec![0.3; x0.len()];
    let f = |u: &[f64]| objective(family, p, u);
    let first = minimize(f, x0, &step, opts);
    // one restart from the optimum sheds a collapsed simplex
    let second = minimize(f, &first.x, &vec![0.05; x0.len()], opts);
    if second.value <= first.value {
        Minimum { evals: first.evals + second.evals, ..second }
    } else {
        first
    }
}

/// Fits `family` to the pillars by Nelder–Mead from `cfg.starts`
/// deterministic starts, run in parallel. The best start whose parameters
/// validate wins; ties go to the lower start index.
pub fn calibrate_wa_fit(p: &PillarSet, family: FitFamily, cfg: &CalibrationConfig) -> Result<CalibrationResult> {
    let dp = super::pillars_to_delta(p)?;
    let starts = cfg.starts.max(1);
    let mut results: Vec<(usize, Minimum)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..starts)
            .map(|i| {
                let dp = &dp;
                s.spawn(move || {
                    let x0 = start_point(family, dp, cfg.seed, i);
                    (i, run_start(family, dp, &x0, cfg.max_evals))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("optimizer thread panicked")).collect()
    });
    results.sort_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)));
    log::debug!(
        "{family} fit: start objectives {:?}",
        results.iter().map(|r| (r.0, r.1.value)).collect::<Vec<_>>()
    );

    let grid = cfg.grid();
    for (i, min) in &results {
        if !min.value.is_finite() {
            break;
        }
        let Ok(params) = family.build(&min.x) else { continue };
        let report = validate(&params, &grid);
        if !report.passed {
            log::debug!("start {i} rejected: {}", report.failures.join("; "));
            continue;
        }
        let smile = params.smile()?.with_domain_eps(cfg.domain_eps);
        let membership = check_sigma_wa(&smile, &grid);
        if !membership.passed {
            log::debug!("start {i} rejected: {}", membership.failures.join("; "));
            continue;
        }
        let res = residuals(&smile, &dp);
        let objective = res.iter().map(|r| r * r).sum();
        return Ok(CalibrationResult {
            tilde_delta: params.tilde_delta(),
            smile,
            params: Some(params),
            pillars: dp,
            residuals: res,
            method: Method::WaFit,
            objective,
            report: membership,
        });
    }
    Err(Error::OptimizationFailure(format!("no feasible {family} parameters after {starts} starts")))
}
