//! Arbitrage and asymptotic diagnostics on finite grids and probes.
//!
//! Everything here is a falsifier: a failed check proves a violation up to
//! discretization, a passed check proves nothing about the limits.

use crate::delta_map::{l_unchecked, to_delta, PLATEAU_TOL};
use crate::error::{Error, Result};
use crate::gaussian::{norm_cdf, norm_pdf, norm_ppf_unchecked};
use crate::smile::{DeltaSmile, GridSpec, StrikeSmile};
use serde::{Deserialize, Serialize};

/// Strikes beyond `±LEE_PROBE_K` are checked against the Lee bounds.
pub const LEE_PROBE_K: f64 = 1.0;
/// Relative tolerance of the finite-probe wing correspondence.
pub const WING_TOL: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FukasawaReport {
    pub passed: bool,
    pub d1_decreasing: bool,
    pub d2_decreasing: bool,
    pub lee_left_ok: bool,
    pub lee_right_ok: bool,
    pub lee_probe_k: f64,
    /// First grid strike at which a check failed.
    pub first_violation: Option<f64>,
    pub failures: Vec<String>,
}

/// Weak no-arbitrage conditions on a strike grid: `d1` and `d2` strictly
/// decreasing, and the Lee bounds `σ̂√T < √(2|k|)` for `|k| ≥ 1`.
pub fn fukasawa_check(smile: &StrikeSmile, grid: &GridSpec) -> FukasawaReport {
    let ks = grid.points();
    let mut r = FukasawaReport {
        passed: false,
        d1_decreasing: true,
        d2_decreasing: true,
        lee_left_ok: true,
        lee_right_ok: true,
        lee_probe_k: LEE_PROBE_K,
        first_violation: None,
        failures: Vec::new(),
    };
    let mark = |r: &mut FukasawaReport, k: f64| {
        if r.first_violation.is_none() {
            r.first_violation = Some(k);
        }
    };
    let mut prev: Option<(f64, f64)> = None;
    for &k in &ks {
        let v = smile.eval(k);
        let (d1, d2) = (-k / v + 0.5 * v, -k / v - 0.5 * v);
        if let Some((p1, p2)) = prev {
            if r.d1_decreasing && !(d1 - p1 < PLATEAU_TOL) {
                r.d1_decreasing = false;
                r.failures.push(format!("d1 not strictly decreasing near k={k}"));
                mark(&mut r, k);
            }
            if r.d2_decreasing && !(d2 - p2 < PLATEAU_TOL) {
                r.d2_decreasing = false;
                r.failures.push(format!("d2 not strictly decreasing near k={k}"));
                mark(&mut r, k);
            }
        }
        prev = Some((d1, d2));
        if k >= LEE_PROBE_K && r.lee_right_ok && !(v < (2.0 * k).sqrt()) {
            r.lee_right_ok = false;
            r.failures.push(format!("right Lee bound violated at k={k}: {v} >= sqrt(2k)"));
            mark(&mut r, k);
        }
        if k <= -LEE_PROBE_K && r.lee_left_ok && !(v < (-2.0 * k).sqrt()) {
            r.lee_left_ok = false;
            r.failures.push(format!("left Lee bound violated at k={k}: {v} >= sqrt(-2k)"));
            mark(&mut r, k);
        }
    }
    r.passed = r.failures.is_empty();
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurrlemanReport {
    /// True when no grid value is negative.
    pub passed: bool,
    pub min_value: f64,
    pub argmin_k: f64,
    pub first_negative: Option<f64>,
    pub non_finite: usize,
    pub step: f64,
}

const DURRLEMAN_STEP: f64 = 1e-4;

fn richardson_first(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

fn richardson_second(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let fx = f(x);
    let d = |h: f64| (f(x + h) - 2.0 * fx + f(x - h)) / (h * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// `v″ + d1′ d2′ v` for total volatility `v(k)`, where
/// `d1,2′ = −1/v + k v′/v² ± v′/2`.
pub fn durrleman_value(smile: &StrikeSmile, k: f64) -> f64 {
    let f = |x: f64| smile.eval(x);
    let v = f(k);
    let v1 = richardson_first(&f, k, DURRLEMAN_STEP);
    let v2 = richardson_second(&f, k, DURRLEMAN_STEP);
    let base = -1.0 / v + k * v1 / (v * v);
    v2 + (base + 0.5 * v1) * (base - 0.5 * v1) * v
}

/// Evaluates the butterfly expression on `grid`; negative values mean the
/// smile admits butterfly arbitrage.
pub fn durrleman_check(smile: &StrikeSmile, grid: &GridSpec) -> DurrlemanReport {
    let mut r = DurrlemanReport {
        passed: true,
        min_value: f64::INFINITY,
        argmin_k: f64::NAN,
        first_negative: None,
        non_finite: 0,
        step: DURRLEMAN_STEP,
    };
    for k in grid.points() {
        let g = durrleman_value(smile, k);
        if !g.is_finite() {
            r.non_finite += 1;
            continue;
        }
        if g < r.min_value {
            r.min_value = g;
            r.argmin_k = k;
        }
        if g < 0.0 && r.first_negative.is_none() {
            r.first_negative = Some(k);
            r.passed = false;
        }
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WingSide {
    /// `k → −∞`, `δ → 1`.
    Left,
    /// `k → +∞`, `δ → 0`.
    Right,
}

/// Finite-probe view of one wing in both coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WingReport {
    pub side: WingSide,
    pub probe_delta: f64,
    /// `k = −l(δ)` at the probe.
    pub probe_k: f64,
    /// `σ̂²T/k` at the probe strike.
    pub k_space_ratio: f64,
    /// `σ√T/N⁻¹(δ)` at the probe delta.
    pub delta_space_ratio: f64,
    /// `−2q/(2 − q)` for the k-space ratio `q`.
    pub mapped_ratio: f64,
    /// `σ√T/(±√(−2 log(tail)))`, the asymptotic-quantile variant.
    pub quantile_ratio: f64,
    pub quantile_gap: f64,
    pub tolerance: f64,
    pub consistent: bool,
    /// Lee condition in delta: ratio below 1 on the left, negative on the right.
    pub lee_ok: bool,
}

fn wing(smile: &DeltaSmile, side: WingSide, probe_eps: f64) -> WingReport {
    let d = match side {
        WingSide::Left => 1.0 - probe_eps,
        WingSide::Right => probe_eps,
    };
    let d = smile.clip(d);
    let z = norm_ppf_unchecked(d);
    let v = smile.eval(d);
    let k = -l_unchecked(smile, d);
    let q = v * v / k;
    let r = v / z;
    let mapped = -2.0 * q / (2.0 - q);
    let tail = match side {
        WingSide::Left => (-2.0 * (1.0 - d).ln()).sqrt(),
        WingSide::Right => -(-2.0 * d.ln()).sqrt(),
    };
    let quantile_ratio = v / tail;
    let quantile_gap = ((quantile_ratio - r) / r).abs();
    let scale = r.abs().max(1e-12);
    let consistent = (mapped - r).abs() <= WING_TOL * scale && quantile_gap <= WING_TOL;
    let lee_ok = match side {
        WingSide::Left => r < 1.0,
        WingSide::Right => r < 0.0,
    };
    WingReport {
        side,
        probe_delta: d,
        probe_k: k,
        k_space_ratio: q,
        delta_space_ratio: r,
        mapped_ratio: mapped,
        quantile_ratio,
        quantile_gap,
        tolerance: WING_TOL,
        consistent,
        lee_ok,
    }
}

/// Wing ratios at `δ = 1 − probe_eps` (left strike wing) and
/// `δ = probe_eps` (right strike wing).
pub fn wing_report(smile: &DeltaSmile, probe_eps: f64) -> Result<(WingReport, WingReport)> {
    if !(probe_eps > 0.0 && probe_eps < 0.5) {
        return Err(Error::Domain(format!("probe_eps must lie in (0, 1/2), got {probe_eps}")));
    }
    Ok((wing(smile, WingSide::Left, probe_eps), wing(smile, WingSide::Right, probe_eps)))
}

/// Second-order expansions around the money: `σ̂(k)√T ≈ a0 + a1 k + a2 k²`
/// and `σ(δ)√T ≈ b0 + b1 (δ − δ_atm) + b2 (δ − δ_atm)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoeffs {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub delta_atm: f64,
}

/// Delta-space coefficients from strike-space ones. With `D = 2 − a0 a1`
/// and `n0 = n(a0/2)`: `l′ = 2a0/(n0 D)`,
/// `l″ = a0(a0 D² − 16 a1 − 8 a0² a2)/(n0² D³)`, `b1 = −a1 l′` and
/// `b2 = a2 l′² − a1 l″/2`.
pub fn expansion_from_strike(a0: f64, a1: f64, a2: f64) -> Result<ExpansionCoeffs> {
    let d = 2.0 - a0 * a1;
    if d.abs() < 1e-6 {
        return Err(Error::SingularExpansion(d));
    }
    let n0 = norm_pdf(0.5 * a0);
    let l1 = 2.0 * a0 / (n0 * d);
    let l2 = a0 * (a0 * d * d - 16.0 * a1 - 8.0 * a0 * a0 * a2) / (n0 * n0 * d.powi(3));
    Ok(ExpansionCoeffs {
        a0,
        a1,
        a2,
        b0: a0,
        b1: -a1 * l1,
        b2: a2 * l1 * l1 - 0.5 * a1 * l2,
        delta_atm: norm_cdf(0.5 * a0),
    })
}

const ATM_STEP: f64 = 1e-3;

/// Estimates `a0, a1, a2` by Richardson-refined differences at `k = 0` and
/// maps them to delta.
pub fn atm_expansion(smile: &StrikeSmile) -> Result<ExpansionCoeffs> {
    let f = |x: f64| smile.eval(x);
    let a0 = f(0.0);
    let a1 = richardson_first(&f, 0.0, ATM_STEP);
    let a2 = 0.5 * richardson_second(&f, 0.0, ATM_STEP);
    expansion_from_strike(a0, a1, a2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub b1_fd: f64,
    pub b2_fd: f64,
    pub b1_rel_err: f64,
    pub b2_rel_err: f64,
    pub passed: bool,
}

/// Compares `b1`, `b2` with differences of the converted delta smile at
/// `δ_atm`, to `tol` relative (absolute below 1e-6 in magnitude).
pub fn verify_expansion(smile: &StrikeSmile, coeffs: &ExpansionCoeffs, tol: f64) -> Result<ExpansionCheck> {
    let ds = to_delta(smile)?;
    let f = |d: f64| ds.eval(d);
    let h = 1e-3;
    let b1_fd = richardson_first(&f, coeffs.delta_atm, h);
    let b2_fd = 0.5 * richardson_second(&f, coeffs.delta_atm, h);
    let rel = |fd: f64, b: f64| (fd - b).abs() / b.abs().max(1e-6);
    let (e1, e2) = (rel(b1_fd, coeffs.b1), rel(b2_fd, coeffs.b2));
    Ok(ExpansionCheck { b1_fd, b2_fd, b1_rel_err: e1, b2_rel_err: e2, passed: e1 <= tol && e2 <= tol })
}
