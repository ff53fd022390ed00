use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strong (fixed tau) or weak (tau = 1 - alpha^2/(2N)) non-Hermiticity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    Strong,
    Weak { alpha: f64 },
}

/// Ensemble parameters shared by every kernel and sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub nu: f64,
    pub tau: f64,
    pub regime: Regime,
}

impl EnsembleParams {
    /// Strong regime with a fixed `tau` in [0, 1).
    pub fn strong(n: usize, nu: f64, tau: f64) -> Result<Self> {
        let p = EnsembleParams { n, nu, tau, regime: Regime::Strong };
        p.validate()?;
        Ok(p)
    }

    /// Weak regime, `tau = 1 - alpha^2 / (2N)`.
    pub fn weak(n: usize, nu: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParams(format!("alpha must be positive, got {alpha}")));
        }
        let tau = 1.0 - alpha * alpha / (2.0 * n as f64);
        let p = EnsembleParams { n, nu, tau, regime: Regime::Weak { alpha } };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % 2 != 0 {
            return Err(Error::InvalidParams(format!("N must be even and positive, got {}", self.n)));
        }
        if !(self.nu > -1.0) || !self.nu.is_finite() {
            return Err(Error::InvalidParams(format!("nu must exceed -1, got {}", self.nu)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::InvalidParams(format!("tau must lie in [0, 1), got {}", self.tau)));
        }
        if let Regime::Weak { alpha } = self.regime {
            let expect = 1.0 - alpha * alpha / (2.0 * self.n as f64);
            if self.tau != expect {
                return Err(Error::InvalidParams("weak regime requires tau = 1 - alpha^2/(2N)".into()));
            }
        }
        Ok(())
    }

    /// Integer rectangular parameter, required by the sampler.
    pub fn nu_integer(&self) -> Result<usize> {
        if self.nu >= 0.0 && self.nu.fract() == 0.0 {
            Ok(self.nu as usize)
        } else {
            Err(Error::InvalidParams(format!("sampling needs a non-negative integer nu, got {}", self.nu)))
        }
    }

    /// rho = nu / N.
    pub fn rho(&self) -> f64 {
        self.nu / self.n as f64
    }

    /// 1 - tau^2.
    pub fn s(&self) -> f64 {
        1.0 - self.tau * self.tau
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_bad_tau() {
        assert!(EnsembleParams::strong(3, 0.0, 0.5).is_err());
        assert!(EnsembleParams::strong(4, 0.0, 1.0).is_err());
        assert!(EnsembleParams::strong(4, -1.0, 0.5).is_err());
        assert!(EnsembleParams::strong(4, 0.5, 0.0).is_ok());
    }

    #[test]
    fn weak_tau() {
        let p = EnsembleParams::weak(100, 100.0, 1.0).unwrap();
        assert_eq!(p.tau, 1.0 - 1.0 / 200.0);
        assert_eq!(p.rho(), 1.0);
    }
}
