//! Calibration of delta smiles to market pillars.
//!
//! Two routes: a shape-preserving interpolation of `l = −k` through the
//! pillars ([`calibrate_l_interp`]), and a least-squares fit of one of the
//! parameter families ([`calibrate_wa_fit`]).

mod fit;
mod interp;

pub use fit::{calibrate_wa_fit, FitFamily};
pub use interp::calibrate_l_interp;

use crate::black_scholes::{delta_of, TotalVol};
use crate::delta_map::MembershipReport;
use crate::error::{Error, Result};
use crate::gaussian::norm_ppf;
use crate::smile::{DeltaSmile, GridSpec, DEFAULT_DOMAIN_EPS};
use crate::wa_param::{ParamsFile, WAParams};
use serde::{Deserialize, Serialize};

/// Abscissa of a pillar set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PillarKind {
    /// Log-forward moneyness `k`.
    Strike,
    /// Call delta.
    Delta,
}

/// Market quotes `(x, σ)` at one maturity; `σ` is annualized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PillarSet {
    maturity: f64,
    kind: PillarKind,
    pillars: Vec<(f64, f64)>,
}

impl PillarSet {
    /// Sorts the pillars by abscissa and checks them.
    pub fn new(kind: PillarKind, maturity: f64, mut pillars: Vec<(f64, f64)>) -> Result<Self> {
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::Data(format!("maturity must be positive, got {maturity}")));
        }
        if pillars.len() < 3 {
            return Err(Error::Data(format!("need at least 3 pillars, got {}", pillars.len())));
        }
        for &(x, s) in &pillars {
            if !x.is_finite() {
                return Err(Error::Data(format!("non-finite abscissa {x}")));
            }
            if kind == PillarKind::Delta && !(x > 0.0 && x < 1.0) {
                return Err(Error::Data(format!("delta pillar {x} outside (0, 1)")));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Data(format!("volatility at {x} must be positive, got {s}")));
            }
        }
        pillars.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = pillars.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Data(format!("duplicate pillar at {}", w[0].0)));
        }
        Ok(Self { maturity, kind, pillars })
    }

    pub fn strikes(maturity: f64, pillars: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(PillarKind::Strike, maturity, pillars)
    }

    pub fn deltas(maturity: f64, pillars: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(PillarKind::Delta, maturity, pillars)
    }

    /// Reads `k,sigma` or `delta,sigma` CSV text. Errors carry the line number.
    pub fn from_csv(text: &str, maturity: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::Data(format!("line 1: {e}")))?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let kind = match names.as_slice() {
            ["k", "sigma"] => PillarKind::Strike,
            ["delta", "sigma"] => PillarKind::Delta,
            _ => {
                return Err(Error::Data(format!(
                    "line 1: expected header `k,sigma` or `delta,sigma`, got `{}`",
                    names.join(",")
                )))
            }
        };
        let mut pillars = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::Data(format!("line {line}: {e}"))
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let field = |i: usize| -> Result<f64> {
                let s = rec.get(i).unwrap_or("");
                s.parse::<f64>().map_err(|_| Error::Data(format!("line {line}: cannot parse `{s}` as a number")))
            };
            pillars.push((field(0)?, field(1)?));
        }
        Self::new(kind, maturity, pillars)
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn kind(&self) -> PillarKind {
        self.kind
    }

    pub fn pillars(&self) -> &[(f64, f64)] {
        &self.pillars
    }

    pub fn len(&self) -> usize {
        self.pillars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pillars.is_empty()
    }

    /// `σ_i√T`.
    pub fn total_vols(&self) -> Vec<f64> {
        let s = self.maturity.sqrt();
        self.pillars.iter().map(|p| p.1 * s).collect()
    }
}

/// Strike pillars to delta pillars, `δ_i = N(d1(k_i, σ_i√T))`, sorted by delta.
///
/// Delta pillars are returned unchanged. `d1` must decrease strictly along
/// the strikes, otherwise the quotes admit no delta smile.
pub fn pillars_to_delta(p: &PillarSet) -> Result<PillarSet> {
    if p.kind == PillarKind::Delta {
        return Ok(p.clone());
    }
    let sq = p.maturity.sqrt();
    let mut out = Vec::with_capacity(p.len());
    for &(k, s) in &p.pillars {
        out.push((delta_of(k, TotalVol::new(s * sq)?), s));
    }
    for (i, w) in out.windows(2).enumerate() {
        if !(w[1].0 < w[0].0) {
            let (a, b) = (p.pillars[i], p.pillars[i + 1]);
            return Err(Error::Data(format!(
                "d1 does not decrease between pillars (k={}, sigma={}) and (k={}, sigma={}): deltas {} and {}",
                a.0, a.1, b.0, b.1, w[0].0, w[1].0
            )));
        }
    }
    out.reverse();
    PillarSet::new(PillarKind::Delta, p.maturity, out)
}

/// Knobs shared by both calibration routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Seed of the multistart draws.
    pub seed: u64,
    /// Number of optimizer starts; the first is the deterministic initial guess.
    pub starts: usize,
    /// Function evaluations per start.
    pub max_evals: usize,
    /// Also require the conditions that make `m` increasing, i.e. a
    /// weak-arbitrage-free result.
    pub wa_strict: bool,
    /// Clipping distance of the result from 0 and 1.
    pub domain_eps: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { seed: 0, starts: 8, max_evals: 1500, wa_strict: false, domain_eps: DEFAULT_DOMAIN_EPS }
    }
}

impl CalibrationConfig {
    fn grid(&self) -> GridSpec {
        GridSpec::delta_check(self.domain_eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LInterp,
    WaFit,
}

/// A calibrated smile with its fit statistics.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub smile: DeltaSmile,
    /// Fitted parameters, for the family fit.
    pub params: Option<WAParams>,
    /// The delta pillars the smile was fitted to.
    pub pillars: PillarSet,
    /// Model minus market annualized volatility, in pillar order.
    pub residuals: Vec<f64>,
    pub method: Method,
    pub tilde_delta: f64,
    /// Sum of squared residuals.
    pub objective: f64,
    pub report: MembershipReport,
}

impl CalibrationResult {
    pub fn rms(&self) -> f64 {
        (self.objective / self.residuals.len() as f64).sqrt()
    }

    pub fn summary(&self) -> CalibrationSummary {
        CalibrationSummary {
            method: self.method,
            tilde_delta: self.tilde_delta,
            objective: self.objective,
            rms: self.rms(),
            maturity: self.pillars.maturity,
            pillars: self.pillars.pillars.clone(),
            residuals: self.residuals.clone(),
            params: self.params.as_ref().and_then(ParamsFile::from_params),
            report: self.report.clone(),
        }
    }
}

/// Serializable digest of a [`CalibrationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub method: Method,
    pub tilde_delta: f64,
    pub objective: f64,
    pub rms: f64,
    pub maturity: f64,
    /// `(δ, σ)` pillars.
    pub pillars: Vec<(f64, f64)>,
    pub residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsFile>,
    pub report: MembershipReport,
}

fn residuals(smile: &DeltaSmile, p: &PillarSet) -> Vec<f64> {
    let sq = p.maturity.sqrt();
    p.pillars.iter().map(|&(d, s)| smile.eval(d) / sq - s).collect()
}

/// Zero of the pillar `d2` values `N⁻¹(δ_i) − σ_i√T`, by linear interpolation
/// in `N⁻¹(δ)` between the first sign change.
fn switch_estimate(p: &PillarSet) -> Option<f64> {
    let v = p.total_vols();
    let z: Vec<f64> = p.pillars.iter().map(|x| norm_ppf(x.0).unwrap_or(f64::NAN)).collect();
    let m: Vec<f64> = z.iter().zip(&v).map(|(z, v)| z - v).collect();
    (0..m.len() - 1).find(|&i| m[i] <= 0.0 && m[i + 1] > 0.0).map(|i| z[i] - m[i] * (z[i + 1] - z[i]) / (m[i + 1] - m[i]))
}

#[cfg(test)]
mod tests;
