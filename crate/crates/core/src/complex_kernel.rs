//! Kernel of the complex non-Hermitian Wishart ensemble restricted to the real line,
//! its weighted one-point function, and the Christoffel-Darboux identities it obeys.

use crate::error::{domain, Error, Result};
use crate::params::EnsembleParams;
use crate::specfun::{
    laguerre_seq, ln_factorial, ln_gamma, ln_xpow_bessel_k, reg_inc_beta, DoubleDouble, LogSum, SignedLog,
};

/// A complex-kernel value with a roundoff bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexKernelEval {
    pub value: SignedLog,
    pub abs_err_estimate: f64,
}

impl ComplexKernelEval {
    pub fn to_f64(self) -> f64 {
        self.value.to_f64()
    }
}

fn require_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        domain(format!("the complex kernel needs 0 < tau < 1, got {tau}"))
    }
}

/// ln of j! tau^{2j} / Gamma(j + nu + 1).
fn ln_coeff(j: usize, nu: f64, tau: f64) -> f64 {
    ln_factorial(j) + 2.0 * j as f64 * tau.ln() - ln_gamma(j as f64 + nu + 1.0).expect("nu > -1")
}

fn finish(acc: LogSum) -> Result<ComplexKernelEval> {
    let value = acc.sum();
    if acc.is_empty() {
        return Ok(ComplexKernelEval { value, abs_err_estimate: 0.0 });
    }
    let bound = 4.0 * f64::EPSILON * acc.len() as f64 * acc.abs_log().exp();
    let v = value.to_f64().abs();
    // same refusal rule as the real kernel
    if bound > (1e-6 * v).max(1e-12) {
        return Err(Error::PrecisionLoss { bound, value: value.to_f64() });
    }
    Ok(ComplexKernelEval { value, abs_err_estimate: bound })
}

/// sum_{j < nterms} j! tau^{2j} / Gamma(j+nu+1) L_j(x/tau) L_j(y/tau).
pub fn k_complex_terms(nterms: usize, nu: f64, tau: f64, x: f64, y: f64) -> Result<ComplexKernelEval> {
    require_tau(tau)?;
    if nterms == 0 {
        return Ok(ComplexKernelEval { value: SignedLog::ZERO, abs_err_estimate: 0.0 });
    }
    let lx = laguerre_seq(nterms - 1, nu, x / tau);
    let ly = if x == y { lx.clone() } else { laguerre_seq(nterms - 1, nu, y / tau) };
    let mut acc = LogSum::with_capacity(nterms);
    for j in 0..nterms {
        acc.push((lx[j] * ly[j]).scale_log(ln_coeff(j, nu, tau)));
    }
    finish(acc)
}

/// Derivative of [`k_complex_terms`] in its second argument.
pub fn k_complex_dy_terms(nterms: usize, nu: f64, tau: f64, x: f64, y: f64) -> Result<ComplexKernelEval> {
    require_tau(tau)?;
    if nterms <= 1 {
        return Ok(ComplexKernelEval { value: SignedLog::ZERO, abs_err_estimate: 0.0 });
    }
    let lx = laguerre_seq(nterms - 1, nu, x / tau);
    // d/dy L_j(y/tau) = -L_{j-1}^{(nu+1)}(y/tau) / tau
    let dy = laguerre_seq(nterms - 2, nu + 1.0, y / tau);
    let mut acc = LogSum::with_capacity(nterms);
    for j in 1..nterms {
        acc.push(-(lx[j] * dy[j - 1]).scale_log(ln_coeff(j, nu, tau) - tau.ln()));
    }
    finish(acc)
}

/// The kernel K_N(x, y) with N = params.n terms.
pub fn k_complex(params: &EnsembleParams, x: f64, y: f64) -> Result<ComplexKernelEval> {
    k_complex_terms(params.n, params.nu, params.tau, x, y)
}

/// d/dy K_N(x, y).
pub fn k_complex_dy(params: &EnsembleParams, x: f64, y: f64) -> Result<ComplexKernelEval> {
    k_complex_dy_terms(params.n, params.nu, params.tau, x, y)
}

/// ln omega^c(x) = ln(|x|^nu K_nu(2N|x|/s) e^{2N tau x/s}), finite at 0 for nu > 0.
pub fn ln_omega_c(params: &EnsembleParams, x: f64) -> Result<f64> {
    let n = params.nf();
    let s = params.s();
    if x == 0.0 && params.nu <= 0.0 {
        return domain("omega^c is singular at the origin when nu = 0");
    }
    Ok(ln_xpow_bessel_k(params.nu, params.nu, x, s / (2.0 * n))? + 2.0 * n * params.tau * x / s)
}

/// Weighted one-point function R^c_N(x) = omega^c(x) (2 N^{nu+2}/s) K_{N-1}(Nx, Nx).
pub fn r_complex_weighted(params: &EnsembleParams, x: f64) -> Result<f64> {
    Ok(ln_r_complex_weighted(params, x)?.exp())
}

pub(crate) fn ln_r_complex_weighted(params: &EnsembleParams, x: f64) -> Result<f64> {
    let n = params.nf();
    let k = k_complex_terms(params.n - 1, params.nu, params.tau, n * x, n * x)?;
    Ok(ln_omega_c(params, x)? + std::f64::consts::LN_2 + (params.nu + 2.0) * n.ln() - params.s().ln() + k.value.logmag)
}

/// Relative gap between R^c_N(0) and N/(rho s^2) I_{s}(nu+1, N-1).
pub fn rc_zero_identity_residual(params: &EnsembleParams) -> Result<f64> {
    if !(params.nu > 0.0) {
        return domain("the origin identity needs nu > 0");
    }
    let s = params.s();
    let direct = r_complex_weighted(params, 0.0)?;
    // 1 - I_{tau^2}(N-1, nu+1) = I_{1-tau^2}(nu+1, N-1)
    let closed = params.nf() / (params.rho() * s * s) * reg_inc_beta(s, params.nu + 1.0, params.nf() - 1.0)?;
    Ok((direct - closed).abs() / closed.abs())
}

type DD = DoubleDouble;

fn dd_laguerre(jmax: usize, nu: f64, t: DD) -> Vec<DD> {
    let mut out = Vec::with_capacity(jmax + 1);
    let mut prev = DD::ZERO;
    let mut cur = DD::ONE;
    out.push(cur);
    for k in 0..jmax {
        let kf = k as f64;
        let a = DD::from(2.0 * kf + 1.0) + DD::from(nu) - t;
        let next = (a * cur - (DD::from(kf) + DD::from(nu)) * prev) / DD::from(kf + 1.0);
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Coefficients j! tau^{2j} Gamma(nu+1)/Gamma(j+nu+1), j < n.
fn dd_coeffs(n: usize, nu: f64, tau: DD) -> Vec<DD> {
    let t2 = tau * tau;
    let mut c = Vec::with_capacity(n);
    let mut cur = DD::ONE;
    for j in 0..n {
        if j > 0 {
            cur = cur * t2 * DD::from(j as f64) / (DD::from(j as f64) + DD::from(nu));
        }
        c.push(cur);
    }
    c
}

fn normalized(lhs: DD, rhs: DD) -> f64 {
    let d = (lhs - rhs).to_f64().abs();
    d / (lhs.to_f64().abs() + rhs.to_f64().abs() + f64::MIN_POSITIVE)
}

/// Residual of the off-diagonal Christoffel-Darboux identity for K_N at (z, w).
///
/// Both sides carry the common factor 1/Gamma(nu+1), which is dropped; the
/// evaluation runs in double-double so that the heavy cancellation on the left
/// does not mask the identity.
pub fn cd_offdiag_residual(params: &EnsembleParams, z: f64, w: f64) -> Result<f64> {
    require_tau(params.tau)?;
    let n = params.n;
    let nu = params.nu;
    let tau = DD::from(params.tau);
    let s = DD::ONE - tau * tau;
    let t = DD::from(z) / tau;
    let u = DD::from(w) / tau;
    let l = dd_laguerre(n, nu, t);
    let l1 = dd_laguerre(n, nu + 1.0, t);
    let l2 = dd_laguerre(n, nu + 2.0, t);
    let lu = dd_laguerre(n, nu, u);
    let c = dd_coeffs(n, nu, tau);
    let (mut k, mut kz, mut kzz) = (DD::ZERO, DD::ZERO, DD::ZERO);
    for j in 0..n {
        let cw = c[j] * lu[j];
        k = k + cw * l[j];
        if j >= 1 {
            kz = kz - cw * l1[j - 1] / tau;
        }
        if j >= 2 {
            kzz = kzz + cw * l2[j - 2] / (tau * tau);
        }
    }
    let zd = DD::from(z);
    let wd = DD::from(w);
    let nu1 = DD::from(nu + 1.0);
    let lhs = s * zd * kzz + (s * nu1 + DD::from(2.0) * tau * zd) * kz + ((tau * tau * zd - wd) / s + nu1 * tau) * k;
    // N! Gamma(nu+1) / Gamma(N+nu) = N prod_{k<N} k/(nu+k)
    let mut pref = DD::from(n as f64);
    for kk in 1..n {
        pref = pref * DD::from(kk as f64) / (DD::from(kk as f64) + DD::from(nu));
    }
    pref = pref * tau.powi(2 * n as u32 - 1) / s;
    let rhs = pref * (l[n - 1] * lu[n] - tau * tau * l[n] * lu[n - 1]);
    Ok(normalized(lhs, rhs))
}

/// Residual of the diagonal Christoffel-Darboux identity for x -> K_{N-1}(x, x).
///
/// For nu = 0 the order nu - 1 = -1 factor is rewritten with the contiguity
/// relation L^{(nu-1)}_{N-1} = L^{(nu)}_{N-1} - L^{(nu)}_{N-2}.
pub fn cd_diag_residual(params: &EnsembleParams, x: f64) -> Result<f64> {
    require_tau(params.tau)?;
    let n = params.n;
    if n < 2 {
        return domain("the diagonal identity needs N >= 2");
    }
    let nu = params.nu;
    let tau = DD::from(params.tau);
    let s = DD::ONE - tau * tau;
    let xd = DD::from(x);
    let t = xd / tau;
    let l = dd_laguerre(n, nu, t);
    let l1 = dd_laguerre(n, nu + 1.0, t);
    let l2 = dd_laguerre(n, nu + 2.0, t);
    let c = dd_coeffs(n - 1, nu, tau);
    let (mut f, mut f1, mut f2) = (DD::ZERO, DD::ZERO, DD::ZERO);
    for j in 0..n - 1 {
        let d1 = if j >= 1 { -l1[j - 1] / tau } else { DD::ZERO };
        let d2 = if j >= 2 { l2[j - 2] / (tau * tau) } else { DD::ZERO };
        f = f + c[j] * l[j] * l[j];
        f1 = f1 + DD::from(2.0) * c[j] * l[j] * d1;
        f2 = f2 + DD::from(2.0) * c[j] * (d1 * d1 + l[j] * d2);
    }
    let two_nu1 = DD::from(2.0 * nu + 1.0);
    let lhs = s * xd * f2 + (DD::from(4.0) * tau * xd + two_nu1 * s) * f1
        - DD::from(2.0) * (DD::from(2.0) * xd - two_nu1 * tau) * f;
    let lm1 = if nu == 0.0 {
        l[n - 1] - l[n - 2]
    } else {
        dd_laguerre(n - 1, nu - 1.0, t)[n - 1]
    };
    // (N-1)! Gamma(nu+1) / Gamma(N+nu-1) = (N-1) prod_{k<N-1} k/(nu+k)
    let mut pref = DD::from((n - 1) as f64);
    for kk in 1..n - 1 {
        pref = pref * DD::from(kk as f64) / (DD::from(kk as f64) + DD::from(nu));
    }
    pref = DD::from(2.0) * pref * tau.powi(2 * n as u32 - 3);
    let rhs = pref * (l[n - 1] * l[n - 2] + l1[n - 2] * lm1);
    Ok(normalized(lhs, rhs))
}
