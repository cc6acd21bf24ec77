//! Weak-arbitrage-free delta smiles built from a switch point `δ̃` and three
//! positive functions.
//!
//! With `z = N⁻¹(δ)` and `n` the normal density,
//!
//! ```text
//! σ(δ)√T = z + √(z² + 2(∫_δ^{1/2} λ + ∫_{1/2}^{δ̃} μ))   δ ≤ 1/2
//!        = z + √(2 ∫_δ^{δ̃} μ)                          1/2 < δ ≤ δ̃
//!        = z − √(2 ∫_{δ̃}^δ α(x) N⁻¹(x)/n(N⁻¹(x)) dx)   δ > δ̃
//! ```
//!
//! Every smile in the set arises this way, with `λ = l′`, `μ = −m m′` and
//! `α = (n(z)/z) m m′`.
//!
//! Integrals are computed in `z`, where `dδ = n(z) dz`, and cached in
//! cumulative tables so repeated evaluation inside root finders is cheap.

mod families;

pub use families::{family_bounded_skew, family_custom, family_flat, family_w_shape, FamilyParams, Knots, ParamsFile};
pub(crate) use families::{bounded_skew_unchecked, custom_unchecked, flat_unchecked, w_shape_unchecked};

use crate::black_scholes::TotalVol;
use crate::error::{Error, Result};
use crate::gaussian::{norm_cdf, norm_pdf, norm_ppf_unchecked};
use crate::numerics::quadrature::{Anchor, CumulativeTable, QuadratureSpec};
use crate::smile::{DeltaSmile, GridSpec};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::{Arc, OnceLock};

/// A parameter function evaluated at `(δ, N⁻¹(δ))`.
pub type ParamFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

type Integrand = Box<dyn Fn(f64) -> f64 + Send + Sync>;

struct Tables {
    /// `−∫_z^0 λ(N(u)) n(u) du`
    lambda: CumulativeTable<Integrand>,
    /// `−∫_z^{z̃} μ(N(u)) n(u) du`
    mu: CumulativeTable<Integrand>,
    /// `∫_{z̃}^z α(N(u)) u du`
    alpha: CumulativeTable<Integrand>,
    mu_half: f64,
}

/// The parameters `(δ̃, λ, μ, α)` of a weak-arbitrage-free smile.
#[derive(Clone)]
pub struct WAParams {
    tilde_delta: f64,
    lambda: ParamFn,
    mu: ParamFn,
    alpha: ParamFn,
    breakpoints: Vec<f64>,
    pub quadrature: QuadratureSpec,
    family: Option<FamilyParams>,
    tables: Arc<OnceLock<std::result::Result<Tables, Error>>>,
}

impl fmt::Debug for WAParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WAParams")
            .field("tilde_delta", &self.tilde_delta)
            .field("family", &self.family)
            .field("quadrature", &self.quadrature)
            .finish_non_exhaustive()
    }
}

impl WAParams {
    /// Parameters from closures of `(δ, N⁻¹(δ))`.
    pub fn new(
        tilde_delta: f64,
        lambda: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        mu: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        alpha: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            tilde_delta,
            lambda: Arc::new(lambda),
            mu: Arc::new(mu),
            alpha: Arc::new(alpha),
            breakpoints: Vec::new(),
            quadrature: QuadratureSpec::default(),
            family: None,
            tables: Arc::new(OnceLock::new()),
        }
    }

    /// Deltas at which the parameter functions are not smooth.
    pub fn with_breakpoints(mut self, deltas: &[f64]) -> Self {
        self.breakpoints = deltas.to_vec();
        self.tables = Arc::new(OnceLock::new());
        self
    }

    pub fn with_quadrature(mut self, spec: QuadratureSpec) -> Self {
        self.quadrature = spec;
        self.tables = Arc::new(OnceLock::new());
        self
    }

    pub(crate) fn with_family(mut self, family: FamilyParams) -> Self {
        self.family = Some(family);
        self
    }

    pub fn tilde_delta(&self) -> f64 {
        self.tilde_delta
    }

    /// The named family these parameters came from, if any.
    pub fn family(&self) -> Option<&FamilyParams> {
        self.family.as_ref()
    }

    pub fn lambda(&self, delta: f64) -> f64 {
        (self.lambda)(delta, norm_ppf_unchecked(delta))
    }

    pub fn mu(&self, delta: f64) -> f64 {
        (self.mu)(delta, norm_ppf_unchecked(delta))
    }

    pub fn alpha(&self, delta: f64) -> f64 {
        (self.alpha)(delta, norm_ppf_unchecked(delta))
    }

    fn eps(&self) -> f64 {
        self.quadrature.endpoint_eps
    }

    fn check_tilde(&self) -> Result<()> {
        let td = self.tilde_delta;
        if td > 0.5 && td < 1.0 - self.eps() {
            Ok(())
        } else {
            Err(Error::Validation(format!("tilde_delta must lie in (1/2, 1), got {td}")))
        }
    }

    fn tables(&self) -> Result<&Tables> {
        self.check_tilde()?;
        self.tables.get_or_init(|| self.build_tables()).as_ref().map_err(Clone::clone)
    }

    fn build_tables(&self) -> Result<Tables> {
        let spec = &self.quadrature;
        let z_lo = norm_ppf_unchecked(spec.endpoint_eps);
        let z_hi = norm_ppf_unchecked(1.0 - spec.endpoint_eps);
        let zt = norm_ppf_unchecked(self.tilde_delta);
        let bps: Vec<f64> = self.breakpoints.iter().map(|&d| norm_ppf_unchecked(d)).collect();

        let lam = self.lambda.clone();
        let g: Integrand = Box::new(move |u| lam(norm_cdf(u), u) * norm_pdf(u));
        let lambda = CumulativeTable::build(g, z_lo, 0.0, &bps, Anchor::End, spec)?;

        let mu = self.mu.clone();
        let g: Integrand = Box::new(move |u| mu(norm_cdf(u), u) * norm_pdf(u));
        let mu = CumulativeTable::build(g, 0.0, zt, &bps, Anchor::End, spec)?;

        let al = self.alpha.clone();
        let g: Integrand = Box::new(move |u| al(norm_cdf(u), u) * u);
        let alpha = CumulativeTable::build(g, zt, z_hi, &bps, Anchor::Start, spec)?;

        let mu_half = -mu.integral_to(0.0);
        for (name, v) in [("lambda", lambda.integral_to(z_lo)), ("mu", mu_half), ("alpha", alpha.integral_to(z_hi))] {
            if !v.is_finite() {
                return Err(Error::Quadrature(format!("non-finite {name} integral")));
            }
        }
        Ok(Tables { lambda, mu, alpha, mu_half })
    }

    /// `∫_δ^{1/2} λ` for `δ ≤ 1/2`.
    pub fn lambda_integral(&self, delta: f64) -> Result<f64> {
        Ok(-self.tables()?.lambda.integral_to(norm_ppf_unchecked(delta)))
    }

    /// `∫_δ^{δ̃} μ` for `1/2 ≤ δ ≤ δ̃`.
    pub fn mu_integral(&self, delta: f64) -> Result<f64> {
        Ok(-self.tables()?.mu.integral_to(norm_ppf_unchecked(delta)))
    }

    /// `∫_{δ̃}^δ α N⁻¹/n(N⁻¹)` for `δ ≥ δ̃`.
    pub fn alpha_integral(&self, delta: f64) -> Result<f64> {
        Ok(self.tables()?.alpha.integral_to(norm_ppf_unchecked(delta)))
    }

    fn clip(&self, delta: f64) -> f64 {
        delta.clamp(self.eps(), 1.0 - self.eps())
    }

    fn l_and_sigma(&self, delta: f64) -> Result<(f64, f64)> {
        check_delta(delta)?;
        let t = self.tables()?;
        let d = self.clip(delta);
        let z = norm_ppf_unchecked(d);
        let (l, v) = if d <= 0.5 {
            let i = -t.lambda.integral_to(z) + t.mu_half;
            let s = (z * z + 2.0 * i).sqrt();
            let v = if z < 0.0 { 2.0 * i / (s - z) } else { z + s };
            (-i, v)
        } else if d <= self.tilde_delta {
            let i = -t.mu.integral_to(z);
            (0.5 * z * z - i, z + (2.0 * i).max(0.0).sqrt())
        } else {
            let i = t.alpha.integral_to(z).max(0.0);
            let l = 0.5 * z * z - i;
            let s = (2.0 * i).sqrt();
            (l, 2.0 * l / (z + s))
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Validation(format!("non-positive volatility {v} at delta={delta}")));
        }
        Ok((l, v))
    }

    /// `l(δ) = −k(δ)` of the generated smile.
    pub fn l(&self, delta: f64) -> Result<f64> {
        Ok(self.l_and_sigma(delta)?.0)
    }

    /// The generated total volatility `σ(δ)√T`.
    pub fn sigma(&self, delta: f64) -> Result<TotalVol> {
        let v = self.l_and_sigma(delta)?.1;
        TotalVol::new(v)
    }

    /// The generated smile as a [`DeltaSmile`] on the quadrature domain.
    pub fn smile(&self) -> Result<DeltaSmile> {
        self.tables()?;
        let p = self.clone();
        let probe = p.l_and_sigma(0.5)?;
        debug_assert!(probe.1 > 0.0);
        Ok(DeltaSmile::new(move |d| p.l_and_sigma(d).map(|x| x.1).unwrap_or(f64::NAN)).with_domain_eps(self.eps()))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// `σ(δ)√T` of the parametrized smile.
pub fn wa_sigma(params: &WAParams, delta: f64) -> Result<TotalVol> {
    params.sigma(delta)
}

/// `l(δ)` of the parametrized smile.
pub fn wa_l(params: &WAParams, delta: f64) -> Result<f64> {
    params.l(delta)
}

/// Options for [`validate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    /// Minimum growth of each divergent integral across the outermost unit
    /// of `N⁻¹` at the relevant end.
    pub tail_growth_min: f64,
    /// When set, also require `sup α ≤ 1 − margin` on the grid: the simpler
    /// sufficient condition of a right limit of `α` below one.
    pub strict_alpha_margin: Option<f64>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { tail_growth_min: 1e-3, strict_alpha_margin: None }
    }
}

/// Divergence proxies: growth over the last unit of `z` at the relevant end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceProxies {
    /// Growth of `∫_δ^{1/2} λ` as `δ → 0`.
    pub lambda: f64,
    /// Growth of `∫_{δ̃}^δ α z/n(z)` as `δ → 1`.
    pub alpha: f64,
    /// Growth of `z²/2 − ∫_{δ̃}^δ α z/n(z)` as `δ → 1`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub tilde_delta_ok: bool,
    pub lambda_positive: bool,
    pub mu_positive: bool,
    pub alpha_in_unit_interval: bool,
    pub divergence: Option<DivergenceProxies>,
    /// First grid delta at which a sampled condition failed.
    pub first_violation: Option<f64>,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::Validation(self.failures.join("; ")))
        }
    }
}

/// Samples the parameter conditions on `grid` and checks the divergence
/// proxies of the three improper integrals.
pub fn validate(params: &WAParams, grid: &GridSpec) -> ValidationReport {
    validate_with(params, grid, &ValidationOptions::default())
}

pub fn validate_with(params: &WAParams, grid: &GridSpec, opts: &ValidationOptions) -> ValidationReport {
    let mut r = ValidationReport {
        passed: false,
        tilde_delta_ok: true,
        lambda_positive: true,
        mu_positive: true,
        alpha_in_unit_interval: true,
        divergence: None,
        first_violation: None,
        failures: Vec::new(),
    };
    if let Err(e) = params.check_tilde() {
        r.tilde_delta_ok = false;
        r.failures.push(e.to_string());
        return r;
    }
    let td = params.tilde_delta;
    let violation = |r: &mut ValidationReport, d: f64| {
        if r.first_violation.is_none() {
            r.first_violation = Some(d);
        }
    };
    let mut alpha_sup = f64::NEG_INFINITY;
    for d in grid.points() {
        let d = params.clip(d);
        if d <= 0.5 {
            let v = params.lambda(d);
            if !(v > 0.0) && r.lambda_positive {
                r.lambda_positive = false;
                r.failures.push(format!("lambda({d}) = {v} is not positive"));
                violation(&mut r, d);
            }
        }
        if (0.5..td).contains(&d) {
            let v = params.mu(d);
            if !(v > 0.0) && r.mu_positive {
                r.mu_positive = false;
                r.failures.push(format!("mu({d}) = {v} is not positive"));
                violation(&mut r, d);
            }
        }
        if d > td {
            let v = params.alpha(d);
            alpha_sup = alpha_sup.max(v);
            if !(v > 0.0 && v < 1.0) && r.alpha_in_unit_interval {
                r.alpha_in_unit_interval = false;
                r.failures.push(format!("alpha({d}) = {v} is outside (0, 1)"));
                violation(&mut r, d);
            }
        }
    }
    if let Some(margin) = opts.strict_alpha_margin {
        if alpha_sup > 1.0 - margin {
            r.failures.push(format!("sup alpha = {alpha_sup} exceeds 1 - {margin}"));
        }
    }
    match divergence(params) {
        Ok(p) => {
            for (name, v) in [("lambda integral", p.lambda), ("alpha integral", p.alpha), ("l residual", p.residual)] {
                if !(v >= opts.tail_growth_min) {
                    r.failures.push(format!(
                        "{name} tail growth {v:.3e} below {:.1e}: no divergence",
                        opts.tail_growth_min
                    ));
                }
            }
            r.divergence = Some(p);
        }
        Err(e) => r.failures.push(e.to_string()),
    }
    r.passed = r.failures.is_empty();
    r
}

fn divergence(params: &WAParams) -> Result<DivergenceProxies> {
    let t = params.tables()?;
    let z_lo = norm_ppf_unchecked(params.eps());
    let z_hi = norm_ppf_unchecked(1.0 - params.eps());
    let zt = norm_ppf_unchecked(params.tilde_delta);
    let span = 1.0f64.min(0.5 * (z_hi - zt)).min(-0.5 * z_lo);
    let lambda = t.lambda.integral_to(z_lo + span) - t.lambda.integral_to(z_lo);
    let a1 = t.alpha.integral_to(z_hi);
    let a0 = t.alpha.integral_to(z_hi - span);
    let residual = (0.5 * z_hi * z_hi - a1) - (0.5 * (z_hi - span).powi(2) - a0);
    Ok(DivergenceProxies { lambda, alpha: a1 - a0, residual })
}

/// Reads `(δ̃, λ, μ, α)` off a weak-arbitrage-free smile:
/// `λ = l′`, `μ = −m m′`, `α = (n(z)/z) m m′`.
pub fn recover_params(smile: &DeltaSmile) -> Result<WAParams> {
    let report = crate::delta_map::check_sigma_wa(smile, &GridSpec::delta_check(smile.domain_eps())).into_result()?;
    let td = report.tilde_delta.expect("passed report carries the zero of m");
    let (s1, s2, s3) = (smile.clone(), smile.clone(), smile.clone());
    // with s = dσ/dz: l′ = (σ + (z − σ)s)/n(z) and m′ = (1 − s)/n(z)
    let slope = |s: &DeltaSmile, d: f64, z: f64| s.deriv(d) * norm_pdf(z);
    let lambda = move |d: f64, z: f64| {
        let v = s1.eval(d);
        (v + (z - v) * slope(&s1, d, z)) / norm_pdf(z)
    };
    let mu = move |d: f64, z: f64| {
        let v = s2.eval(d);
        -(z - v) * (1.0 - slope(&s2, d, z)) / norm_pdf(z)
    };
    let alpha = move |d: f64, z: f64| {
        let v = s3.eval(d);
        (z - v) * (1.0 - slope(&s3, d, z)) / z
    };
    // the integrands carry finite-difference noise
    let spec = QuadratureSpec { endpoint_eps: smile.domain_eps(), rel_tol: 1e-7, ..QuadratureSpec::default() };
    Ok(WAParams::new(td, lambda, mu, alpha).with_quadrature(spec))
}
