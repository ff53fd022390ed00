use crate::error::{domain, Result};

/// ln Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("ln_gamma needs x > 0, got {x}"));
    }
    Ok(libm::lgamma(x))
}

/// ln n!.
pub fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}
