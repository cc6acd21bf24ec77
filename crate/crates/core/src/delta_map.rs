//! Moving smiles between delta and strike coordinates.
//!
//! A delta smile `σ(δ)` maps to strikes through
//! `l(δ) = (N⁻¹(δ) − σ(δ)√T/2)·σ(δ)√T = −k(δ)`; the conversion exists exactly
//! when `l` is strictly increasing onto ℝ. The companion function
//! `m(δ) = N⁻¹(δ) − σ(δ)√T` equals `d2` along the smile; when it is also
//! increasing onto ℝ the smile is weak-arbitrage-free and its unique zero
//! `δ̃` is the switch point between the two roots of
//! `σ²T/2 − N⁻¹(δ)σ√T + l(δ) = 0`.

use crate::black_scholes::TotalVol;
use crate::error::{Error, Result};
use crate::gaussian::{norm_cdf, norm_ppf, norm_ppf_unchecked};
use crate::numerics::roots::{bisect, brent_with_values, RootTol};
use crate::smile::{DeltaSmile, GridSpec, StrikeSmile};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Decreases smaller than this are treated as rounding plateaus.
pub const PLATEAU_TOL: f64 = 1e-13;

/// Thresholds of the finite proxies for the limit conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Minimum growth of `l` (or `m`, `d1`) across the outermost unit of the
    /// probit scale at each end of the grid. A function that stays bounded
    /// flattens out there; one that diverges keeps growing.
    pub tail_growth_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { tail_growth_min: 1e-3 }
    }
}

/// Outcome of a membership test; failures are reported, not thrown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub passed: bool,
    pub grid_points: usize,
    pub l_increasing: bool,
    pub l_surjective: bool,
    pub l_at_ends: (f64, f64),
    pub l_tail_growth: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_increasing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_surjective: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_at_ends: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilde_delta: Option<f64>,
    /// First grid delta at which a monotonicity check failed.
    pub first_violation: Option<f64>,
    pub failures: Vec<String>,
}

impl MembershipReport {
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::Membership(self.failures.join("; ")))
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

#[inline]
fn l_from(z: f64, v: f64) -> f64 {
    (z - 0.5 * v) * v
}

/// `l(δ)` of a delta smile.
pub fn l_eval(smile: &DeltaSmile, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(l_unchecked(smile, smile.clip(delta)))
}

/// `m(δ) = N⁻¹(δ) − σ(δ)√T`.
pub fn m_eval(smile: &DeltaSmile, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(m_unchecked(smile, smile.clip(delta)))
}

#[inline]
pub(crate) fn l_unchecked(smile: &DeltaSmile, delta: f64) -> f64 {
    l_from(norm_ppf_unchecked(delta), smile.eval(delta))
}

#[inline]
pub(crate) fn m_unchecked(smile: &DeltaSmile, delta: f64) -> f64 {
    norm_ppf_unchecked(delta) - smile.eval(delta)
}

fn clipped_grid(smile: &DeltaSmile, grid: &GridSpec) -> Vec<f64> {
    let mut pts: Vec<f64> = grid.points().into_iter().map(|d| smile.clip(d)).collect();
    pts.dedup();
    pts
}

struct MonotoneScan {
    increasing: bool,
    first_violation: Option<f64>,
}

fn scan_increasing(xs: &[f64], ys: &[f64]) -> MonotoneScan {
    for i in 1..ys.len() {
        if !(ys[i] - ys[i - 1] > -PLATEAU_TOL) {
            return MonotoneScan { increasing: false, first_violation: Some(xs[i]) };
        }
    }
    MonotoneScan { increasing: true, first_violation: None }
}

// Growth of f over the outermost unit of N⁻¹ at each end of [lo, hi].
fn tail_growth(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let (zl, zh) = (norm_ppf_unchecked(lo), norm_ppf_unchecked(hi));
    let span = (zh - zl).min(2.0) * 0.5;
    let left = f(norm_cdf(zl + span)) - f(lo);
    let right = f(hi) - f(norm_cdf(zh - span));
    (left, right)
}

/// Membership in the set of delta smiles convertible to strike smiles:
/// `l` strictly increasing on the grid, negative at the low end, positive at
/// the high end and still growing in both tails.
pub fn check_sigma_delta_to_k(smile: &DeltaSmile, grid: &GridSpec) -> MembershipReport {
    check_sigma_delta_to_k_with(smile, grid, &Thresholds::default())
}

pub fn check_sigma_delta_to_k_with(smile: &DeltaSmile, grid: &GridSpec, th: &Thresholds) -> MembershipReport {
    let pts = clipped_grid(smile, grid);
    let ls: Vec<f64> = pts.iter().map(|&d| l_unchecked(smile, d)).collect();
    let mut failures = Vec::new();
    if pts.len() < 3 {
        failures.push(format!("grid has {} points inside (0, 1), need >= 3", pts.len()));
    }
    let scan = scan_increasing(&pts, &ls);
    if !scan.increasing {
        failures.push(format!("l not strictly increasing near delta={}", scan.first_violation.unwrap()));
    }
    let (lo, hi) = (pts[0], pts[pts.len() - 1]);
    let ends = (ls[0], ls[ls.len() - 1]);
    let growth = tail_growth(|d| l_unchecked(smile, d), lo, hi);
    let mut surjective = true;
    if !(ends.0 < 0.0 && ends.1 > 0.0) {
        surjective = false;
        failures.push(format!("l does not change sign over the grid (l = {:.6e} .. {:.6e})", ends.0, ends.1));
    }
    if !(growth.0 >= th.tail_growth_min && growth.1 >= th.tail_growth_min) {
        surjective = false;
        failures.push(format!(
            "l tail growth ({:.3e}, {:.3e}) below {:.1e}: no divergence at the ends",
            growth.0, growth.1, th.tail_growth_min
        ));
    }
    MembershipReport {
        passed: failures.is_empty(),
        grid_points: pts.len(),
        l_increasing: scan.increasing,
        l_surjective: surjective,
        l_at_ends: ends,
        l_tail_growth: growth,
        m_increasing: None,
        m_surjective: None,
        m_at_ends: None,
        tilde_delta: None,
        first_violation: scan.first_violation,
        failures,
    }
}

/// Membership in the weak-arbitrage-free set: the `l` conditions plus `m`
/// strictly increasing onto ℝ. Locates `δ̃`, the zero of `m`.
pub fn check_sigma_wa(smile: &DeltaSmile, grid: &GridSpec) -> MembershipReport {
    check_sigma_wa_with(smile, grid, &Thresholds::default())
}

pub fn check_sigma_wa_with(smile: &DeltaSmile, grid: &GridSpec, th: &Thresholds) -> MembershipReport {
    let mut report = check_sigma_delta_to_k_with(smile, grid, th);
    let pts = clipped_grid(smile, grid);
    let ms: Vec<f64> = pts.iter().map(|&d| m_unchecked(smile, d)).collect();
    let scan = scan_increasing(&pts, &ms);
    if !scan.increasing {
        report.failures.push(format!("m not strictly increasing near delta={}", scan.first_violation.unwrap()));
        if report.first_violation.is_none() {
            report.first_violation = scan.first_violation;
        }
    }
    let ends = (ms[0], ms[ms.len() - 1]);
    let growth = tail_growth(|d| m_unchecked(smile, d), pts[0], pts[pts.len() - 1]);
    let mut surjective = true;
    if !(ends.0 < 0.0 && ends.1 > 0.0) {
        surjective = false;
        report.failures.push(format!("NoZeroFound: m has no sign change on the grid (m = {:.6e} .. {:.6e})", ends.0, ends.1));
    }
    if !(growth.0 >= th.tail_growth_min && growth.1 >= th.tail_growth_min) {
        surjective = false;
        report.failures.push(format!(
            "m tail growth ({:.3e}, {:.3e}) below {:.1e}",
            growth.0, growth.1, th.tail_growth_min
        ));
    }
    if surjective {
        let i = ms.iter().position(|&m| m >= 0.0).unwrap();
        let td = if ms[i] == 0.0 {
            pts[i]
        } else {
            bisect(|d| m_unchecked(smile, d), pts[i - 1], pts[i], 1e-15, 200).unwrap_or(pts[i])
        };
        report.tilde_delta = Some(td);
    }
    report.m_increasing = Some(scan.increasing);
    report.m_surjective = Some(surjective);
    report.m_at_ends = Some(ends);
    report.passed = report.failures.is_empty();
    report
}

/// Solves `σ²T/2 − N⁻¹(δ)σ√T + l = 0`, taking the larger root up to and
/// including `δ̃` and the smaller one beyond it.
///
/// Outside the weak-arbitrage-free set the switch at `δ̃` is a convention of
/// this library: such smiles may legitimately keep the larger root.
pub fn sigma_from_l(l: &dyn Fn(f64) -> f64, delta: f64, tilde_delta: f64) -> Result<TotalVol> {
    check_delta(delta)?;
    let z = norm_ppf_unchecked(delta);
    let v = sigma_from_l_value(z, l(delta), delta <= tilde_delta)?;
    TotalVol::new(v).map_err(|_| Error::NonPositiveVol(v))
}

/// Root of the quadratic for `z = N⁻¹(δ)` and `l(δ)`, in cancellation-free form.
pub(crate) fn sigma_from_l_value(z: f64, l: f64, upper: bool) -> Result<f64> {
    let disc = z * z - 2.0 * l;
    if disc < -1e-14 {
        return Err(Error::NoSolution(format!("negative discriminant {disc:.3e} (z={z}, l={l})")));
    }
    let s = disc.max(0.0).sqrt();
    let v = if upper {
        if z < 0.0 {
            -2.0 * l / (s - z)
        } else {
            z + s
        }
    } else if z > 0.0 {
        2.0 * l / (z + s)
    } else {
        z - s
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonPositiveVol(v))
    }
}

fn tol() -> RootTol {
    RootTol { residual: 1e-12, x_abs: 0.0, max_iter: 200 }
}

/// Sorted samples of an increasing function, used to seed tight brackets.
struct Bracketer {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Bracketer {
    /// Index `i` with `ys[i] <= y < ys[i + 1]`, or `None` outside the range.
    fn find(&self, y: f64) -> Option<usize> {
        if !(y >= self.ys[0] && y < self.ys[self.ys.len() - 1]) {
            return None;
        }
        let i = self.ys.partition_point(|&v| v <= y);
        Some(i - 1)
    }

    /// Solves `f(x) = y` for increasing `f`, clamping outside the sampled range.
    fn solve(&self, f: impl Fn(f64) -> f64, y: f64) -> f64 {
        match self.find(y) {
            None if y < self.ys[0] => self.xs[0],
            None => self.xs[self.xs.len() - 1],
            Some(i) => {
                let (a, b) = (self.xs[i], self.xs[i + 1]);
                let (fa, fb) = (self.ys[i] - y, self.ys[i + 1] - y);
                brent_with_values(|x| f(x) - y, a, b, fa, fb, tol()).unwrap_or_else(|_| {
                    // plateau inside the bracket; bisection still lands on it
                    bisect(|x| f(x) - y, a, b, 1e-15, 200).unwrap_or(a)
                })
            }
        }
    }
}

/// The delta ↔ strike correspondence of a convertible delta smile.
#[derive(Clone)]
pub struct StrikeMap {
    smile: DeltaSmile,
    table: Arc<Bracketer>,
}

impl StrikeMap {
    pub fn new(smile: &DeltaSmile) -> Result<Self> {
        let grid = GridSpec::delta_check(smile.domain_eps());
        check_sigma_delta_to_k(smile, &grid).into_result()?;
        let xs = clipped_grid(smile, &grid);
        let ys = xs.iter().map(|&d| l_unchecked(smile, d)).collect();
        Ok(Self { smile: smile.clone(), table: Arc::new(Bracketer { xs, ys }) })
    }

    /// `δ(k)`: the delta with `l(δ) = −k`, clamped to the clipped domain.
    pub fn delta_at(&self, k: f64) -> f64 {
        self.table.solve(|d| l_unchecked(&self.smile, d), -k)
    }

    /// `k(δ) = −l(δ)`.
    pub fn k_at(&self, delta: f64) -> f64 {
        -l_unchecked(&self.smile, self.smile.clip(delta))
    }

    pub fn sigma_at(&self, k: f64) -> f64 {
        self.smile.eval(self.delta_at(k))
    }

    pub fn smile(&self) -> StrikeSmile {
        let me = self.clone();
        StrikeSmile::new(move |k| me.sigma_at(k))
    }
}

/// Strike-space smile `σ̂(k) = σ(δ(k))` of a convertible delta smile.
pub fn to_strike(smile: &DeltaSmile) -> Result<StrikeSmile> {
    Ok(StrikeMap::new(smile)?.smile())
}

/// Membership of a strike smile in the delta-convertible set: `d1` strictly
/// decreasing on the grid, positive at the low end, negative at the high end,
/// still moving in both tails.
pub fn check_strike_d1(smile: &StrikeSmile, grid: &GridSpec, th: &Thresholds) -> MembershipReport {
    let ks = grid.points();
    // increasing in -k is decreasing in k
    let neg: Vec<f64> = ks.iter().map(|&k| -smile.d1(k)).collect();
    let scan = scan_increasing(&ks, &neg);
    let mut failures = Vec::new();
    if !scan.increasing {
        failures.push(format!("d1 not strictly decreasing near k={}", scan.first_violation.unwrap()));
    }
    let ends = (-neg[0], -neg[neg.len() - 1]);
    let growth = (smile.d1(grid.lo) - smile.d1(grid.lo + 1.0), smile.d1(grid.hi - 1.0) - smile.d1(grid.hi));
    let mut surjective = true;
    if !(ends.0 > 0.0 && ends.1 < 0.0) {
        surjective = false;
        failures.push(format!("d1 does not change sign over the grid ({:.4e} .. {:.4e})", ends.0, ends.1));
    }
    if !(growth.0 >= th.tail_growth_min && growth.1 >= th.tail_growth_min) {
        surjective = false;
        failures.push(format!("d1 tail growth ({:.3e}, {:.3e}) below {:.1e}", growth.0, growth.1, th.tail_growth_min));
    }
    MembershipReport {
        passed: failures.is_empty(),
        grid_points: ks.len(),
        l_increasing: scan.increasing,
        l_surjective: surjective,
        l_at_ends: ends,
        l_tail_growth: growth,
        m_increasing: None,
        m_surjective: None,
        m_at_ends: None,
        tilde_delta: None,
        first_violation: scan.first_violation,
        failures,
    }
}

/// The strike → delta correspondence of a strike smile with decreasing `d1`.
#[derive(Clone)]
pub struct DeltaMap {
    smile: StrikeSmile,
    table: Arc<Bracketer>,
}

impl DeltaMap {
    pub fn new(smile: &StrikeSmile) -> Result<Self> {
        Self::with_grid(smile, &GridSpec::strike_check())
    }

    pub fn with_grid(smile: &StrikeSmile, grid: &GridSpec) -> Result<Self> {
        check_strike_d1(smile, grid, &Thresholds::default()).into_result()?;
        // tabulate -d1 against k so both increase
        let xs = grid.points();
        let ys = xs.iter().map(|&k| -smile.d1(k)).collect();
        Ok(Self { smile: smile.clone(), table: Arc::new(Bracketer { xs, ys }) })
    }

    /// `k(δ)`: the solution of `d1(k, σ̂(k)) = N⁻¹(δ)`.
    pub fn k_at(&self, delta: f64) -> f64 {
        let target = -norm_ppf_unchecked(delta);
        let f = |k: f64| -self.smile.d1(k);
        let t = &self.table;
        if t.find(target).is_some() {
            return t.solve(f, target);
        }
        // outside the tabulated range: walk outwards until bracketed
        let (mut a, mut step) = if target < t.ys[0] { (t.xs[0], -1.0) } else { (t.xs[t.xs.len() - 1], 1.0) };
        let mut fa = f(a) - target;
        for _ in 0..80 {
            let b = a + step;
            let fb = f(b) - target;
            if fa.signum() != fb.signum() || fb == 0.0 {
                let (lo, hi, flo, fhi) = if a < b { (a, b, fa, fb) } else { (b, a, fb, fa) };
                return brent_with_values(|x| f(x) - target, lo, hi, flo, fhi, tol()).unwrap_or(b);
            }
            a = b;
            fa = fb;
            step *= 2.0;
        }
        a
    }

    pub fn sigma_at(&self, delta: f64) -> f64 {
        self.smile.eval(self.k_at(delta))
    }

    pub fn smile(&self) -> DeltaSmile {
        let me = self.clone();
        DeltaSmile::new(move |d| me.sigma_at(d))
    }
}

/// Delta-space smile `σ(δ) = σ̂(k(δ))` of a strike smile with strictly
/// decreasing, surjective `d1`.
pub fn to_delta(smile: &StrikeSmile) -> Result<DeltaSmile> {
    Ok(DeltaMap::new(smile)?.smile())
}

/// The smile of the reflected strike smile `k ↦ σ̂(−k)`, expressed in delta:
/// `σ̄(δ) = σ(δ')` with `m(δ') = −N⁻¹(δ)`.
pub fn symmetric_smile(smile: &DeltaSmile) -> Result<DeltaSmile> {
    let grid = GridSpec::delta_check(smile.domain_eps());
    check_sigma_wa(smile, &grid).into_result()?;
    let xs = clipped_grid(smile, &grid);
    let ys = xs.iter().map(|&d| m_unchecked(smile, d)).collect();
    let table = Arc::new(Bracketer { xs, ys });
    let parent = smile.clone();
    Ok(DeltaSmile::new(move |d| {
        let target = -norm_ppf_unchecked(d);
        let dp = table.solve(|x| m_unchecked(&parent, x), target);
        parent.eval(dp)
    })
    .with_domain_eps(smile.domain_eps()))
}

/// Zero of `m` on the clipped domain.
pub fn tilde_delta(smile: &DeltaSmile) -> Result<f64> {
    let r = check_sigma_wa(smile, &GridSpec::delta_check(smile.domain_eps()));
    r.tilde_delta.ok_or_else(|| Error::Membership(r.failures.join("; ")))
}

/// `N⁻¹` with the crate's domain error.
pub fn probit(delta: f64) -> Result<f64> {
    norm_ppf(delta)
}
