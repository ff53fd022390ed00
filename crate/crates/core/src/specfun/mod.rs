//! Special functions with explicit accuracy contracts.

mod bessel;
mod beta;
mod dd;
mod gamma;
mod hyp;
mod laguerre;
mod signed_log;

pub use bessel::{bessel_i_scaled, bessel_k_ratio, bessel_k_scaled, ln_xpow_bessel_k};
pub use beta::reg_inc_beta;
pub use dd::DoubleDouble;
pub use gamma::{ln_factorial, ln_gamma};
pub use hyp::hyp2f1_euler;
pub use laguerre::{laguerre, laguerre_deriv, laguerre_neg_bound, laguerre_seq};
pub use signed_log::{neumaier_sum, LogSum, SignedLog};

/// A special-function value with the routine's claimed absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecFunResult {
    pub value: SignedLog,
    pub abs_err_estimate: f64,
}

/// Error function, |error| below 1e-14 (libm implementation).
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}
