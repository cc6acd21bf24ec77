//! SVI and SSVI total-variance smiles, their switch point `k̃` (where
//! `d2 = 0`, i.e. `ω(k̃) = −2k̃`) and conversion to delta.

use crate::delta_map::{check_strike_d1, Thresholds};
use crate::error::{Error, Result};
use crate::gaussian::{norm_cdf, norm_ppf_unchecked};
use crate::numerics::pchip::{EndSlopes, Pchip};
use crate::smile::{DeltaSmile, GridSpec, StrikeSmile};
use serde::{Deserialize, Serialize};

/// Raw SVI: `ω(k) = a + b(ρ(k − m) + √((k − m)² + σ̄²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviParams {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub m: f64,
    pub sigma_bar: f64,
}

impl SviParams {
    pub fn new(a: f64, b: f64, rho: f64, m: f64, sigma_bar: f64) -> Result<Self> {
        let p = Self { a, b, rho, m, sigma_bar };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        let Self { a, b, rho, m, sigma_bar } = *self;
        if ![a, b, rho, m, sigma_bar].iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("SVI parameters must be finite".into()));
        }
        if b < 0.0 || !(rho.abs() < 1.0) || !(sigma_bar > 0.0) {
            return Err(Error::Validation(format!("need b >= 0, |rho| < 1, sigma_bar > 0 (b={b}, rho={rho}, sigma_bar={sigma_bar})")));
        }
        let min_var = a + b * sigma_bar * (1.0 - rho * rho).sqrt();
        if !(min_var > 0.0) {
            return Err(Error::Validation(format!("minimum total variance {min_var} is not positive")));
        }
        Ok(())
    }

    /// Asymptotic slopes `b(1 − ρ)` (left) and `b(1 + ρ)` (right).
    pub fn wing_slopes(&self) -> (f64, f64) {
        (self.b * (1.0 - self.rho), self.b * (1.0 + self.rho))
    }
}

/// SSVI: `ω(k) = θ/2 (1 + ρφk + √((φk + ρ)² + 1 − ρ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsviParams {
    pub theta: f64,
    pub phi: f64,
    pub rho: f64,
}

impl SsviParams {
    pub fn new(theta: f64, phi: f64, rho: f64) -> Result<Self> {
        let p = Self { theta, phi, rho };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        let Self { theta, phi, rho } = *self;
        if !(theta > 0.0 && phi > 0.0 && rho.abs() < 1.0 && theta.is_finite() && phi.is_finite()) {
            return Err(Error::Validation(format!("need theta > 0, phi > 0, |rho| < 1 (theta={theta}, phi={phi}, rho={rho})")));
        }
        let lee = 0.5 * theta * phi * (1.0 + rho.abs());
        if !(lee < 2.0) {
            return Err(Error::Validation(format!("Lee bound violated: theta*phi/2*(1+|rho|) = {lee} >= 2")));
        }
        Ok(())
    }

    /// The equivalent raw SVI parameters.
    pub fn to_svi(&self) -> SviParams {
        let Self { theta, phi, rho } = *self;
        let s = (1.0 - rho * rho).sqrt();
        SviParams { a: 0.5 * theta * s * s, b: 0.5 * theta * phi, rho, m: -rho / phi, sigma_bar: s / phi }
    }
}

/// Either model, as read from `{"svi": {..}}` or `{"ssvi": {..}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SviModel {
    Svi(SviParams),
    Ssvi(SsviParams),
}

impl SviModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Data(format!("SVI file: {e}")))?;
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Self::Svi(p) => p.check(),
            Self::Ssvi(p) => p.check(),
        }
    }

    pub fn as_svi(&self) -> SviParams {
        match self {
            Self::Svi(p) => *p,
            Self::Ssvi(p) => p.to_svi(),
        }
    }

    pub fn total_variance(&self, k: f64) -> f64 {
        match self {
            Self::Svi(p) => svi_total_variance(p, k),
            Self::Ssvi(p) => ssvi_total_variance(p, k),
        }
    }

    /// Total implied volatility `√ω(k)` as a strike smile.
    pub fn strike_smile(&self) -> StrikeSmile {
        let me = *self;
        StrikeSmile::new(move |k| me.total_variance(k).sqrt())
    }

    /// `k̃`, the strike where `d2` vanishes.
    pub fn tilde_k(&self) -> Result<f64> {
        match self {
            Self::Svi(p) => svi_tilde_k(p),
            Self::Ssvi(p) => ssvi_tilde(p).map(|t| t.0),
        }
    }
}

impl From<SviParams> for SviModel {
    fn from(p: SviParams) -> Self {
        Self::Svi(p)
    }
}

impl From<SsviParams> for SviModel {
    fn from(p: SsviParams) -> Self {
        Self::Ssvi(p)
    }
}

pub fn svi_total_variance(p: &SviParams, k: f64) -> f64 {
    let x = k - p.m;
    p.a + p.b * (p.rho * x + (x * x + p.sigma_bar * p.sigma_bar).sqrt())
}

pub fn ssvi_total_variance(p: &SsviParams, k: f64) -> f64 {
    let y = p.phi * k + p.rho;
    0.5 * p.theta * (1.0 + p.rho * p.phi * k + (y * y + 1.0 - p.rho * p.rho).sqrt())
}

/// Closed-form `k̃` with `ω(k̃) = −2k̃`: the smaller root of the squared
/// equation, the only one on the admissible side of `(bρm − a)/(2 + bρ)`.
pub fn svi_tilde_k(p: &SviParams) -> Result<f64> {
    let SviParams { a, b, rho, m, sigma_bar: s } = *p;
    let (left, right) = p.wing_slopes();
    if !(left < 2.0 && right < 2.0) {
        return Err(Error::Domain(format!("wing slopes b(1-rho)={left}, b(1+rho)={right} must be below 2")));
    }
    let (p1, p2) = (2.0 + b * (1.0 + rho), 2.0 - b * (1.0 - rho));
    let root = ((a + 2.0 * m).powi(2) + s * s * p1 * p2).sqrt();
    Ok((b * m * (2.0 * rho - b * (1.0 - rho * rho)) - a * (2.0 + b * rho) - b * root) / (p1 * p2))
}

/// The rejected root `k₊` of the squared equation, when real.
pub fn svi_rejected_root(p: &SviParams) -> Option<f64> {
    let SviParams { a, b, rho, m, sigma_bar: s } = *p;
    let (p1, p2) = (2.0 + b * (1.0 + rho), 2.0 - b * (1.0 - rho));
    let disc = (a + 2.0 * m).powi(2) + s * s * p1 * p2;
    (disc >= 0.0).then(|| (b * m * (2.0 * rho - b * (1.0 - rho * rho)) - a * (2.0 + b * rho) + b * disc.sqrt()) / (p1 * p2))
}

/// `(k̃, δ̃)` for SSVI: `k̃ = −2θ/R` with
/// `R = (2 + θφ(1 + ρ)/2)(2 − θφ(1 − ρ)/2)`, and `δ̃ = N(d1(k̃)) = N(2√(θ/R))`
/// since `σ̂(k̃)√T = √(−2k̃) = d1(k̃)` there.
pub fn ssvi_tilde(p: &SsviParams) -> Result<(f64, f64)> {
    p.check()?;
    let r = ssvi_r(p);
    let k = -2.0 * p.theta / r;
    Ok((k, norm_cdf(2.0 * (p.theta / r).sqrt())))
}

pub fn ssvi_r(p: &SsviParams) -> f64 {
    let h = 0.5 * p.theta * p.phi;
    (2.0 + h * (1.0 + p.rho)) * (2.0 - h * (1.0 - p.rho))
}

/// Delta `N(d1(k̃))` of the switch strike.
pub fn tilde_delta_of(model: &SviModel) -> Result<f64> {
    let k = model.tilde_k()?;
    Ok(norm_cdf(model.strike_smile().d1(k)))
}

const SAMPLES: usize = 4001;
const Z_COVER: f64 = 6.5;

/// Converts an SVI/SSVI smile to delta after screening: Lee slopes below 2,
/// `d1` and `d2` strictly decreasing and sign-changing on `grid`. The result
/// interpolates `σ` against `d1 = N⁻¹(δ)` monotonically over samples on a
/// `k = A·atanh(t)` grid wide enough for `d1` to cover ±6.5.
pub fn svi_to_delta(model: &SviModel, grid: &GridSpec) -> Result<DeltaSmile> {
    model.check()?;
    let (left, right) = model.as_svi().wing_slopes();
    if !(left < 2.0 && right < 2.0) {
        return Err(Error::Membership(format!("Lee slope bound violated: b(1-rho)={left}, b(1+rho)={right}")));
    }
    let smile = model.strike_smile();
    let th = Thresholds::default();
    check_strike_d1(&smile, grid, &th).into_result()?;
    // d2 decreasing is d1 decreasing for the reflected smile k ↦ σ̂(−k)
    let s2 = smile.clone();
    let reflected = StrikeSmile::new(move |k| s2.eval(-k));
    check_strike_d1(&reflected, &GridSpec { lo: -grid.hi, hi: -grid.lo, ..*grid }, &th)
        .into_result()
        .map_err(|e| Error::Membership(format!("d2 check: {e}").replace("d1", "d2")))?;

    let ts: Vec<f64> = (0..SAMPLES).map(|i| -0.999 + 1.998 * i as f64 / (SAMPLES - 1) as f64).collect();
    let mut scale = 1.0;
    let ks = loop {
        let ks: Vec<f64> = ts.iter().map(|t| scale * t.atanh()).collect();
        if smile.d1(ks[0]) >= Z_COVER && smile.d1(ks[SAMPLES - 1]) <= -Z_COVER {
            break ks;
        }
        scale *= 2.0;
        if scale > 1e6 {
            return Err(Error::Membership("d1 does not cover the delta range".into()));
        }
    };
    // z ascending means k descending
    let mut zs = Vec::with_capacity(SAMPLES);
    let mut vs = Vec::with_capacity(SAMPLES);
    for &k in ks.iter().rev() {
        let z = smile.d1(k);
        if let Some(&prev) = zs.last() {
            if !(z > prev) {
                return Err(Error::Membership(format!("d1 not strictly decreasing near k={k}")));
            }
        }
        zs.push(z);
        vs.push(smile.eval(k));
    }
    let pchip = Pchip::new(zs, vs, EndSlopes::ThreePoint)?;
    Ok(DeltaSmile::new(move |d| pchip.eval(norm_ppf_unchecked(d))))
}
