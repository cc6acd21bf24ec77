//! Implied-volatility smiles parametrized in call delta.
//!
//! The crate converts smiles between the delta coordinate `δ = N(d1)` and
//! log-forward moneyness `k`, builds the weak-arbitrage-free family of delta
//! smiles from a switch point and three positive functions, screens SVI/SSVI
//! models, calibrates to market pillars and runs arbitrage diagnostics.
//!
//! All volatilities are total volatilities `σ√T`; maturity only enters when
//! quotes are read or written.

pub mod black_scholes;
pub mod calibration;
pub mod cli;
pub mod delta_map;
pub mod diagnostics;
pub mod error;
pub mod gaussian;
pub mod numerics;
pub mod smile;
pub mod svi;
pub mod wa_param;

pub use error::{Error, Result};
pub use smile::{DeltaSmile, GridSpec, StrikeSmile};
