//! Splitting the real kernel through the complex-ensemble kernel.
//!
//! S_N = S_{N,1} + S~_{N,1} + S_{N,2} pointwise, and on the diagonal, in
//! rescaled coordinates, R_N = R^_{N,1} + R_{N,2} with R^_{N,1} expressed
//! through R^c_N and the Bessel ratios omega_{N,1..3}.

use std::f64::consts::PI;

use crate::complex_kernel::{k_complex_dy_terms, k_complex_terms, ln_r_complex_weighted};
use crate::error::{domain, Result};
use crate::params::EnsembleParams;
use crate::quad::{integrate, integrate_vec, truncation_point, Direction, Integrand, QuadOptions};
use crate::sop_kernel::{ln_weight, s_kernel, SOPCache};
use crate::specfun::{
    bessel_k_ratio, bessel_k_scaled, laguerre, laguerre_neg_bound, ln_gamma, ln_xpow_bessel_k, neumaier_sum,
    SignedLog,
};

/// The three pieces of the kernel at one point pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompEval {
    pub s1: f64,
    pub s1_tilde: f64,
    pub s2: f64,
    pub total: f64,
    pub abs_err_estimate: f64,
}

fn require_tau(p: &EnsembleParams) -> Result<()> {
    if p.tau > 0.0 {
        Ok(())
    } else {
        domain("the decomposition needs tau > 0; use tau0_one_point at tau = 0")
    }
}

fn require_nonzero(p: &EnsembleParams, x: f64) -> Result<()> {
    if x == 0.0 && p.nu == 0.0 {
        domain("the kernel pieces are singular at 0 when nu = 0")
    } else {
        Ok(())
    }
}

/// w(y) [tau y + |y| K_{nu/2+1}(|y|/s) / K_{nu/2}(|y|/s)] as a signed log.
fn s1_bracket(p: &EnsembleParams, y: f64) -> Result<SignedLog> {
    let s = p.s();
    let h = 0.5 * p.nu;
    if y == 0.0 {
        // only the |y|^{nu/2+1} K_{nu/2+1} term survives
        return Ok(SignedLog::from_log(ln_xpow_bessel_k(h + 1.0, h + 1.0, 0.0, s)?));
    }
    let ratio = bessel_k_ratio(h, y.abs() / s)?;
    let b = p.tau * y + y.abs() * ratio;
    Ok(SignedLog::from_f64(b).scale_log(ln_weight(p, y)?))
}

/// S_{N,1}(x, y), unscaled coordinates.
pub fn s1(p: &EnsembleParams, x: f64, y: f64) -> Result<f64> {
    require_tau(p)?;
    require_nonzero(p, x)?;
    require_nonzero(p, y)?;
    let k = k_complex_terms(p.n - 1, p.nu, p.tau, x, y)?;
    let v = s1_bracket(p, y)? * k.value;
    Ok(v.scale_log(ln_weight(p, x)? - PI.ln() - p.s().ln()).to_f64())
}

/// S~_{N,1}(x, y) = (1/pi) y w(x) w(y) d/dy K_{N-1}(x, y).
pub fn s1_tilde(p: &EnsembleParams, x: f64, y: f64) -> Result<f64> {
    require_tau(p)?;
    require_nonzero(p, x)?;
    require_nonzero(p, y)?;
    let dk = k_complex_dy_terms(p.n - 1, p.nu, p.tau, x, y)?;
    let v = dk.value * SignedLog::from_f64(y);
    Ok(v.scale_log(ln_weight(p, x)? + ln_weight(p, y)? - PI.ln()).to_f64())
}

/// int (1/2 - 1_{t < y}) f(t) dt for an integrand given in signed-log form.
///
/// Returns (value, abs error).
fn half_sign_integral(
    f: &dyn Fn(f64) -> Result<SignedLog>,
    env: &dyn Fn(f64) -> f64,
    y: f64,
) -> Result<(f64, f64)> {
    let g = |t: f64, out: &mut [f64]| out[0] = f(t).map(|v| v.to_f64()).unwrap_or(f64::NAN);
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-12, max_panels: 4000 };
    let mut parts = [0.0; 2];
    let mut err = 0.0;
    for (i, dir) in [Direction::Plus, Direction::Minus].into_iter().enumerate() {
        let t = truncation_point(env, y, dir)?;
        let r = integrate_vec(&g, 1, y.min(t), y.max(t), &[0.0], &opts)?;
        parts[i] = r.values[0];
        err += 0.5 * r.abs_err[0];
    }
    Ok((0.5 * (parts[0] - parts[1]), err))
}

/// S_{N,2}(x, y), unscaled coordinates, with the quadrature error of its inner integral.
pub fn s2_with_error(p: &EnsembleParams, x: f64, y: f64) -> Result<(f64, f64)> {
    require_tau(p)?;
    require_nonzero(p, x)?;
    let n = p.n;
    let tau = p.tau;
    let lt = tau.ln();
    // g(t) = w(t) tau^{N-2} L_{N-2}(t/tau); the tau powers are moved into g to keep it moderate
    let g = |t: f64| -> Result<SignedLog> {
        Ok(laguerre(n as i64 - 2, p.nu, t / tau).scale_log(ln_weight(p, t)? + (n as f64 - 2.0) * lt))
    };
    let env = |t: f64| {
        ln_weight(p, t).unwrap_or(f64::INFINITY)
            + laguerre_neg_bound(n - 2, p.nu, t / tau).logmag
            + (n as f64 - 2.0) * lt
    };
    let (j, jerr) = half_sign_integral(&g, &env, y)?;
    // (1/pi)(tau^{2N-3}/s)((N-1)!/Gamma(N+nu-1)) w(x) L_{N-1}(x/tau), less tau^{N-2}
    let ln_pref = -PI.ln() - p.s().ln() + (n as f64 - 1.0) * lt + crate::specfun::ln_factorial(n - 1)
        - ln_gamma(n as f64 + p.nu - 1.0)?
        + ln_weight(p, x)?;
    let lx = laguerre(n as i64 - 1, p.nu, x / tau).scale_log(ln_pref);
    let v = lx.to_f64();
    Ok((v * j, v.abs() * jerr))
}

/// S_{N,2}(x, y).
pub fn s2(p: &EnsembleParams, x: f64, y: f64) -> Result<f64> {
    Ok(s2_with_error(p, x, y)?.0)
}

/// All three pieces and their sum.
pub fn decompose(p: &EnsembleParams, x: f64, y: f64) -> Result<DecompEval> {
    let a = s1(p, x, y)?;
    let b = s1_tilde(p, x, y)?;
    let (c, err) = s2_with_error(p, x, y)?;
    let total = neumaier_sum([a, b, c]);
    let round = 4.0 * f64::EPSILON * (a.abs() + b.abs() + c.abs());
    Ok(DecompEval { s1: a, s1_tilde: b, s2: c, total, abs_err_estimate: err + round })
}

/// |S_{N,1} + S~_{N,1} + S_{N,2} - S_N| relative to |S_N| (plus a component-scale floor).
pub fn verify_decomposition_with(cache: &SOPCache, x: f64, y: f64) -> Result<f64> {
    let d = decompose(&cache.params, x, y)?;
    let s = s_kernel(cache, x, y)?.value;
    let scale = d.s1.abs().max(d.s1_tilde.abs()).max(d.s2.abs());
    Ok((d.total - s).abs() / (s.abs() + 1e-16 * scale + f64::MIN_POSITIVE))
}

pub fn verify_decomposition(p: &EnsembleParams, x: f64, y: f64) -> Result<f64> {
    verify_decomposition_with(&SOPCache::new(*p)?, x, y)
}

/// (omega_{N,1}, omega_{N,2}, omega_{N,3}) at x != 0.
pub fn omega_weights(p: &EnsembleParams, x: f64) -> Result<(f64, f64, f64)> {
    if x == 0.0 {
        return domain("the omega weights are undefined at 0");
    }
    let n = p.nf();
    let s = p.s();
    let h = 0.5 * p.nu;
    let a = n * x.abs() / s;
    let kh = bessel_k_scaled(h, a)?;
    let kh1 = bessel_k_scaled(h + 1.0, a)?;
    let knu = bessel_k_scaled(p.nu, 2.0 * a)?;
    let knu_m1 = bessel_k_scaled(p.nu - 1.0, 2.0 * a)?;
    Ok(((2.0 * kh - knu).exp(), (kh + kh1 - knu).exp(), (knu_m1 - knu).exp()))
}

/// R^_{N,1}(x), rescaled coordinates.
pub fn r_hat_1(p: &EnsembleParams, x: f64) -> Result<f64> {
    require_tau(p)?;
    if x == 0.0 {
        return domain("r_hat_1 is evaluated off the origin");
    }
    let n = p.nf();
    let s = p.s();
    let (w1, w2, w3) = omega_weights(p, x)?;
    let rc = ln_r_complex_weighted(p, x)?.exp();
    let k = k_complex_terms(p.n - 1, p.nu, p.tau, n * x, n * x)?;
    let dk = k_complex_dy_terms(p.n - 1, p.nu, p.tau, n * x, n * x)?;
    // d/dx ln R^c = 2N tau/s - sgn(x)(2N/s) omega_3 + 2N dK/K
    let dlog = 2.0 * n * p.tau / s - x.signum() * (2.0 * n / s) * w3 + 2.0 * n * (dk.value / k.value).to_f64();
    let drc = rc * dlog;
    Ok(x.abs() / (2.0 * PI) * (w1 * w3 + w2) * rc + s / (4.0 * PI * n) * x * w1 * drc)
}

/// R_{N,2}(x) = (N^3/(2 pi s)) R^{(1)}_{N,2}(x) R^{(2)}_{N,2}(x), rescaled coordinates.
pub fn r_n2(p: &EnsembleParams, x: f64) -> Result<f64> {
    require_tau(p)?;
    require_nonzero(p, x)?;
    let n = p.n;
    let nf = p.nf();
    let s = p.s();
    let tau = p.tau;
    let h = 0.5 * p.nu;
    let lt = tau.ln();
    // C^2 = N^{nu-1} (N-1)! / Gamma(N-1+nu)
    let ln_c2 = (p.nu - 1.0) * nf.ln() + crate::specfun::ln_factorial(n - 1) - ln_gamma(nf - 1.0 + p.nu)?;
    let ln_v = |t: f64| -> Result<f64> { Ok(ln_xpow_bessel_k(h, h, t, s / nf)? + nf * tau * t / s) };
    let r1 = laguerre(n as i64 - 1, p.nu, nf * x / tau).scale_log(ln_v(x)? + (nf - 1.0) * lt);
    let g = |t: f64| -> Result<SignedLog> {
        Ok(laguerre(n as i64 - 2, p.nu, nf * t / tau).scale_log(ln_v(t)? + (nf - 2.0) * lt))
    };
    let env = |t: f64| {
        ln_v(t).unwrap_or(f64::INFINITY) + laguerre_neg_bound(n - 2, p.nu, nf * t / tau).logmag + (nf - 2.0) * lt
    };
    let (r2, _) = half_sign_integral(&g, &env, x)?;
    // R1 R2 = 2 C^2 tau^{2N-3} L_{N-1} * int(...)
    let pref = (3.0 * nf.ln() - (2.0 * PI * s).ln() + std::f64::consts::LN_2 + ln_c2).exp();
    Ok(pref * r1.to_f64() * r2)
}

/// R_N(x) at tau = 0 from the closed form, unscaled coordinates (compare with S_N(x, x)).
pub fn tau0_one_point(p: &EnsembleParams, x: f64) -> Result<f64> {
    if p.tau != 0.0 {
        return domain("tau0_one_point needs tau = 0");
    }
    if x == 0.0 {
        return domain("tau0_one_point is evaluated off the origin");
    }
    let n = p.n;
    let nu = p.nu;
    let h = 0.5 * nu;
    let ax = x.abs();
    let z = x * x;
    // f(z) = sum_{j <= N-2} z^j / (j! Gamma(j+nu+1)) and its derivative
    let mut f = 0.0;
    let mut df = 0.0;
    for j in 0..=n - 2 {
        let c = -(crate::specfun::ln_factorial(j) + ln_gamma(j as f64 + nu + 1.0)?);
        f += (j as f64 * z.ln() + c).exp();
        if j >= 1 {
            df += j as f64 * ((j as f64 - 1.0) * z.ln() + c).exp();
        }
    }
    let kh = bessel_k_scaled(h, ax)?.exp();
    let kh1 = bessel_k_scaled(h + 1.0, ax)?.exp();
    let first = ax.powf(nu) * kh / (2.0 * PI) * (x * kh * 2.0 * x * df + 2.0 * ax * kh1 * f);
    // signed int_0^x |y|^{N-2+nu/2} K_{nu/2}(|y|) dy
    let pw = n as f64 - 2.0 + h;
    let g = |y: f64| {
        if y == 0.0 {
            0.0
        } else {
            (pw * y.abs().ln() + bessel_k_scaled(h, y.abs()).unwrap_or(f64::NAN)).exp()
        }
    };
    let inner = integrate(&Integrand::new(&g).with_singular(0.0), 0.0, x, 1e-14)?.value;
    let ln_den = PI.ln() + crate::specfun::ln_factorial(n - 2) + ln_gamma(n as f64 - 1.0 + nu)?;
    let second = x.powi(n as i32 - 1) * ax.powf(h) * kh * inner / ln_den.exp();
    Ok(first + second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sop_kernel::r_one_point;

    fn p(n: usize, nu: f64, tau: f64) -> EnsembleParams {
        EnsembleParams::strong(n, nu, tau).unwrap()
    }

    #[test]
    fn decomposition_reference_points() {
        assert!(verify_decomposition(&p(4, 1.0, 0.5), 1.0, 0.5).unwrap() < 1e-6);
        assert!(verify_decomposition(&p(10, 0.0, 0.8), 2.0, -0.3).unwrap() < 1e-6);
        assert!(verify_decomposition(&p(6, 3.0, 0.2), -0.4, -0.1).unwrap() < 1e-6);
    }

    #[test]
    fn s2_flips_between_tails() {
        let pr = p(6, 1.0, 0.5);
        let hi = s2(&pr, 0.7, 300.0).unwrap();
        let lo = s2(&pr, 0.7, -150.0).unwrap();
        assert!((hi + lo).abs() < 1e-10 * hi.abs().max(1e-12));
    }

    #[test]
    fn near_symmetric_limit() {
        // S_{N,1}(x, x) tends to the Laguerre unitary density with N-1 terms
        let pr = p(8, 1.0, 0.999);
        for &x in &[0.8, 2.0, 5.0] {
            let ks: f64 = (0..7)
                .map(|k| {
                    let l = laguerre(k, 1.0, x).to_f64();
                    (crate::specfun::ln_factorial(k as usize) - ln_gamma(k as f64 + 2.0).unwrap()).exp() * l * l
                })
                .sum();
            let lue = x * (-x).exp() * ks;
            let v = s1(&pr, x, x).unwrap();
            assert!((v / lue - 1.0).abs() < 0.05, "x={x}: {v} vs {lue}");
            assert!(s1_tilde(&pr, x, x).unwrap().abs() < 0.01 * v.abs());
        }
    }

    #[test]
    fn one_point_split() {
        let pr = p(8, 2.0, 0.5);
        let c = SOPCache::new(pr).unwrap();
        for &x in &[1.0, 0.3, -0.2] {
            let a = r_hat_1(&pr, x).unwrap() + r_n2(&pr, x).unwrap();
            let b = r_one_point(&c, x).unwrap().value;
            assert!((a - b).abs() < 1e-6 * b.abs(), "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn omega_asymptotics() {
        let (n, rho, tau) = (50usize, 1.0, 0.5);
        let pr = p(n, rho * n as f64, tau);
        let s = pr.s();
        let x: f64 = 1.3;
        let q = (x * x + rho * rho * s * s / 4.0).sqrt();
        let (w1, _, w3) = omega_weights(&pr, x).unwrap();
        assert!(((w3 * x + rho * s / 2.0) / q - 1.0).abs() < 0.1);
        assert!((w1 * (n as f64 / (PI * s)).sqrt() * q.sqrt() - 1.0).abs() < 0.1);
        let (_, _, w3) = omega_weights(&p(400, 0.0, 0.5), 1.0).unwrap();
        assert!((w3 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn tau_zero_closed_form() {
        for &(n, nu) in &[(4usize, 0.0), (8, 2.0)] {
            let c = SOPCache::new(p(n, nu, 0.0)).unwrap();
            for &x in &[0.5, -0.5, 1.0, -1.0] {
                let a = tau0_one_point(&c.params, x).unwrap();
                let b = s_kernel(&c, x, x).unwrap().value;
                assert!((a - b).abs() < 1e-6 * b.abs(), "N={n} nu={nu} x={x}: {a} vs {b}");
            }
        }
        let pr = p(4, 2.0, 0.0);
        let v = tau0_one_point(&pr, 1e-6).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }
}
