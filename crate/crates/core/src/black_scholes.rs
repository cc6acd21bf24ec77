//! Black–Scholes call pricing in total-volatility units, implied volatility
//! inversion and the call-delta map `δ = N(d1)`.

use crate::error::{Error, Result};
use crate::gaussian::{norm_cdf, norm_pdf, norm_ppf};
use serde::{Deserialize, Serialize};

/// Forward, discount factor and maturity of one expiry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    forward: f64,
    discount: f64,
    maturity: f64,
}

impl MarketSpec {
    pub fn new(forward: f64, discount: f64, maturity: f64) -> Result<Self> {
        if !(forward > 0.0 && forward.is_finite()) {
            return Err(Error::Domain(format!("forward must be positive, got {forward}")));
        }
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(Error::Domain(format!("discount must lie in (0, 1], got {discount}")));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::Domain(format!("maturity must be positive, got {maturity}")));
        }
        Ok(Self { forward, discount, maturity })
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    /// Total volatility `σ√T` for an annualized volatility.
    pub fn total_vol(&self, sigma: f64) -> Result<TotalVol> {
        TotalVol::new(sigma * self.maturity.sqrt())
    }

    fn bounds(&self, k: f64) -> (f64, f64) {
        let df = self.discount * self.forward;
        (df * (1.0 - k.exp()).max(0.0), df)
    }
}

/// Maturity-scaled volatility `σ√T`, strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TotalVol(f64);

impl TotalVol {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("total volatility must be positive and finite, got {value}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `(d1, d2)` at log-forward moneyness `k`.
#[inline]
pub fn d12(k: f64, total_vol: TotalVol) -> (f64, f64) {
    let v = total_vol.value();
    let base = -k / v;
    (base + 0.5 * v, base - 0.5 * v)
}

/// Undiscounted-forward call price `D·F·(N(d1) − e^k N(d2))`.
pub fn bs_call(market: &MarketSpec, k: f64, total_vol: TotalVol) -> f64 {
    let (d1, d2) = d12(k, total_vol);
    market.discount * market.forward * (norm_cdf(d1) - k.exp() * norm_cdf(d2))
}

fn vega(market: &MarketSpec, k: f64, v: f64) -> f64 {
    let d1 = -k / v + 0.5 * v;
    market.discount * market.forward * norm_pdf(d1)
}

const IV_MAX_ITER: usize = 200;
const IV_BISECT_WIDTH: f64 = 1e-4;
const IV_MAX_VOL: f64 = 1e3;

/// Total implied volatility of a call price.
///
/// Bisection narrows the bracket to 1e-4, then vega-Newton steps take over;
/// any Newton step leaving the bracket falls back to bisection.
pub fn implied_total_vol(market: &MarketSpec, k: f64, price: f64) -> Result<TotalVol> {
    let (lower, upper) = market.bounds(k);
    if !(price > lower && price < upper) {
        return Err(Error::PriceOutOfBounds { price, lower, upper });
    }
    let price_at = |v: f64| bs_call(market, k, TotalVol(v));

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while price_at(hi) < price {
        lo = hi;
        hi *= 2.0;
        if hi > IV_MAX_VOL {
            return Err(Error::Convergence(format!(
                "price {price} needs total volatility above {IV_MAX_VOL}"
            )));
        }
    }

    let mut iter = 0;
    while hi - lo > IV_BISECT_WIDTH {
        let mid = 0.5 * (lo + hi);
        if price_at(mid) < price {
            lo = mid;
        } else {
            hi = mid;
        }
        iter += 1;
    }

    let mut v = 0.5 * (lo + hi);
    while iter < IV_MAX_ITER {
        let diff = price_at(v) - price;
        if diff.abs() <= 1e-13 * price {
            return TotalVol::new(v);
        }
        if diff < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let step = diff / vega(market, k, v);
        let mut next = v - step;
        if !(next > lo && next < hi) || step == 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 4.0 * f64::EPSILON * v {
            return TotalVol::new(next);
        }
        v = next;
        iter += 1;
    }
    Err(Error::Convergence(format!(
        "implied volatility did not converge in {IV_MAX_ITER} iterations (k={k}, price={price})"
    )))
}

/// Call delta `N(d1(k, σ√T))`.
#[inline]
pub fn delta_of(k: f64, total_vol: TotalVol) -> f64 {
    norm_cdf(d12(k, total_vol).0)
}

/// Log-forward moneyness with the given call delta and total volatility:
/// `k = (−N⁻¹(δ) + σ√T/2)·σ√T`.
pub fn k_from_delta_vol(delta: f64, total_vol: TotalVol) -> Result<f64> {
    let z = norm_ppf(delta)?;
    let v = total_vol.value();
    Ok((-z + 0.5 * v) * v)
}
