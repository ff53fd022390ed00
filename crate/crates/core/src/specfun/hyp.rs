use crate::error::{domain, Result};
use crate::quad::{integrate_vec, QuadOptions};

/// Gauss hypergeometric 2F1(a, b; c; z) from the Euler integral, c > b > 0, z < 1.
///
/// The two halves of [0, 1] are mapped by t = s^{1/b} and 1 - t = s^{1/(c-b)},
/// which removes the algebraic endpoint factors.
pub fn hyp2f1_euler(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(b > 0.0) || !(c > b) {
        return domain(format!("Euler integral needs c > b > 0, got b = {b}, c = {c}"));
    }
    if !(z < 1.0) {
        return domain(format!("Euler integral needs z < 1, got {z}"));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let cb = c - b;
    let left = |s: f64, out: &mut [f64]| {
        let t = s.powf(1.0 / b);
        out[0] = (-t).ln_1p().mul_add(cb - 1.0, -a * (-z * t).ln_1p()).exp() / b;
    };
    let right = |s: f64, out: &mut [f64]| {
        let u = s.powf(1.0 / cb);
        let t = 1.0 - u;
        out[0] = ((b - 1.0) * (-u).ln_1p() - a * (1.0 - z * t).ln()).exp() / cb;
    };
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-14, max_panels: 2000 };
    let l = integrate_vec(&left, 1, 0.0, 0.5f64.powf(b), &[], &opts)?;
    let r = integrate_vec(&right, 1, 0.0, 0.5f64.powf(cb), &[], &opts)?;
    let ln_norm = libm::lgamma(c) - libm::lgamma(b) - libm::lgamma(cb);
    Ok((l.values[0] + r.values[0]) * ln_norm.exp())
}
