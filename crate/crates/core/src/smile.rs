//! Smile containers in the two coordinates, and evaluation grids.

use crate::gaussian::{norm_cdf, norm_pdf, norm_ppf_unchecked};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default clipping distance of delta evaluations from 0 and 1.
pub const DEFAULT_DOMAIN_EPS: f64 = 1e-9;

const Z_FD_STEP: f64 = 1e-4;
const STRIKE_FD_STEP: f64 = 1e-6;

/// Total volatility `σ(δ)√T` as a function of call delta.
///
/// Evaluations are clipped to `[eps, 1 − eps]`. Cloning is cheap; the
/// underlying function is shared.
#[derive(Clone)]
pub struct DeltaSmile {
    eval: ScalarFn,
    deriv: Option<ScalarFn>,
    domain_eps: f64,
}

impl fmt::Debug for DeltaSmile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeltaSmile")
            .field("domain_eps", &self.domain_eps)
            .field("analytic_derivative", &self.deriv.is_some())
            .finish()
    }
}

impl DeltaSmile {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), deriv: None, domain_eps: DEFAULT_DOMAIN_EPS }
    }

    pub fn from_arc(eval: ScalarFn) -> Self {
        Self { eval, deriv: None, domain_eps: DEFAULT_DOMAIN_EPS }
    }

    /// Constant total volatility `c`.
    pub fn flat(c: f64) -> Self {
        Self::new(move |_| c).with_derivative(|_| 0.0)
    }

    pub fn with_derivative(mut self, deriv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    pub fn with_domain_eps(mut self, eps: f64) -> Self {
        assert!(eps > 0.0 && eps < 0.5, "domain eps must lie in (0, 1/2)");
        self.domain_eps = eps;
        self
    }

    pub fn domain_eps(&self) -> f64 {
        self.domain_eps
    }

    #[inline]
    pub fn clip(&self, delta: f64) -> f64 {
        delta.clamp(self.domain_eps, 1.0 - self.domain_eps)
    }

    /// `σ(δ)√T` at the clipped delta.
    #[inline]
    pub fn eval(&self, delta: f64) -> f64 {
        (self.eval)(self.clip(delta))
    }

    /// `dσ√T/dδ`. Without an analytic derivative this is a central
    /// difference in `z = N⁻¹(δ)`, which stays well conditioned in the tails;
    /// near the clipping bounds the stencil is moved inwards.
    pub fn deriv(&self, delta: f64) -> f64 {
        let d = self.clip(delta);
        if let Some(f) = &self.deriv {
            return f(d);
        }
        let z = norm_ppf_unchecked(d);
        let (zlo, zhi) = (norm_ppf_unchecked(self.domain_eps), norm_ppf_unchecked(1.0 - self.domain_eps));
        let zc = z.clamp(zlo + Z_FD_STEP, zhi - Z_FD_STEP);
        let (dm, dp) = (norm_cdf(zc - Z_FD_STEP), norm_cdf(zc + Z_FD_STEP));
        // divide by the represented nodes, not the nominal step
        let dz = norm_ppf_unchecked(dp) - norm_ppf_unchecked(dm);
        ((self.eval)(dp) - (self.eval)(dm)) / dz / norm_pdf(z)
    }

    /// Samples on a grid.
    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&d| self.eval(d)).collect()
    }
}

/// Total volatility `σ̂(k)√T` as a function of log-forward moneyness.
#[derive(Clone)]
pub struct StrikeSmile {
    eval: ScalarFn,
    deriv: Option<ScalarFn>,
}

impl fmt::Debug for StrikeSmile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrikeSmile").field("analytic_derivative", &self.deriv.is_some()).finish()
    }
}

impl StrikeSmile {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), deriv: None }
    }

    pub fn from_arc(eval: ScalarFn) -> Self {
        Self { eval, deriv: None }
    }

    pub fn flat(c: f64) -> Self {
        Self::new(move |_| c).with_derivative(|_| 0.0)
    }

    pub fn with_derivative(mut self, deriv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    #[inline]
    pub fn eval(&self, k: f64) -> f64 {
        (self.eval)(k)
    }

    pub fn deriv(&self, k: f64) -> f64 {
        match &self.deriv {
            Some(f) => f(k),
            None => ((self.eval)(k + STRIKE_FD_STEP) - (self.eval)(k - STRIKE_FD_STEP)) / (2.0 * STRIKE_FD_STEP),
        }
    }

    /// `d1(k, σ̂(k))`.
    #[inline]
    pub fn d1(&self, k: f64) -> f64 {
        let v = self.eval(k);
        -k / v + 0.5 * v
    }

    /// `d2(k, σ̂(k))`.
    #[inline]
    pub fn d2(&self, k: f64) -> f64 {
        let v = self.eval(k);
        -k / v - 0.5 * v
    }
}

/// Point placement of a [`GridSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Uniform,
    /// Uniform in `N⁻¹(δ)`; resolves the delta wings. Only for delta grids.
    Probit,
    /// Union of a uniform and a probit grid, `n` points each.
    Mixed,
}

/// `n` points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Self {
        Self { n, lo, hi, spacing: Spacing::Uniform }
    }

    /// Delta grid used by the membership checks: 2001 uniform plus 2001
    /// probit-spaced points over `[eps, 1 − eps]`.
    pub fn delta_check(eps: f64) -> Self {
        Self { n: 2001, lo: eps, hi: 1.0 - eps, spacing: Spacing::Mixed }
    }

    /// Strike grid used by the strike-space checks.
    pub fn strike_check() -> Self {
        Self::uniform(2001, -5.0, 5.0)
    }

    pub fn points(&self) -> Vec<f64> {
        let n = self.n.max(2);
        let uniform = |lo: f64, hi: f64| -> Vec<f64> {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        let probit = || -> Vec<f64> {
            let (a, b) = (norm_ppf_unchecked(self.lo), norm_ppf_unchecked(self.hi));
            let mut v: Vec<f64> = uniform(a, b).into_iter().map(norm_cdf).collect();
            v[0] = self.lo;
            v[n - 1] = self.hi;
            v
        };
        match self.spacing {
            Spacing::Uniform => uniform(self.lo, self.hi),
            Spacing::Probit => probit(),
            Spacing::Mixed => {
                let mut v = uniform(self.lo, self.hi);
                v.extend(probit());
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        }
    }
}
