//! Scalar numerical building blocks shared by the smile modules.

pub mod nelder_mead;
pub mod pchip;
pub mod quadrature;
pub mod roots;
