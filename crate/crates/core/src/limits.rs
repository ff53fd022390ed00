//! Large-N limiting objects: counting coefficients, limiting densities of the
//! real eigenvalues, the droplet geometry and the exterior conformal map with
//! its g-function, Omega and the Plancherel-Rotach asymptotics of Laguerre
//! polynomials off the cut.

use std::f64::consts::{LN_2, PI};

use crate::error::{domain, Result};
use crate::quad::{integrate_with, Integrand, QuadOptions};
use crate::specfun::{bessel_i_scaled, erf, hyp2f1_euler, SignedLog};

const QUAD_REL: f64 = 1e-13;
const SERIES_MAX_TERMS: usize = 200;
const SERIES_MAX_ALPHA: f64 = 3.0;

/// Edges, Marchenko-Pastur endpoints and foci of the droplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropletGeometry {
    pub xi_minus: f64,
    pub xi_plus: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub f_minus: f64,
    pub f_plus: f64,
    pub tau_crit: f64,
}

/// A density sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoid mass of the sampled values.
    pub total_mass: f64,
    pub label: String,
}

impl DensityCurve {
    fn new(grid: Vec<f64>, values: Vec<f64>, label: &str) -> Self {
        let total_mass = trapezoid(&grid, &values);
        DensityCurve { grid, values, total_mass, label: label.to_string() }
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

/// Which growth law the Laguerre parameter follows in the asymptotics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoMode {
    /// nu held fixed as N grows.
    Fixed(f64),
    /// nu = rho N.
    Proportional(f64),
}

fn check_tau_rho(tau: f64, rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tau) || !(rho >= 0.0) {
        return domain(format!("need tau in [0,1) and rho >= 0, got ({tau}, {rho})"));
    }
    Ok(())
}

pub fn droplet(tau: f64, rho: f64) -> DropletGeometry {
    let r = (1.0 + rho).sqrt();
    let centre = tau * (2.0 + rho);
    let half = (1.0 + tau * tau) * r;
    DropletGeometry {
        xi_minus: centre - half,
        xi_plus: centre + half,
        lambda_minus: (r - 1.0).powi(2),
        lambda_plus: (r + 1.0).powi(2),
        f_minus: tau * (r - 1.0).powi(2),
        f_plus: tau * (r + 1.0).powi(2),
        tau_crit: 1.0 / r,
    }
}

fn strong_profile(tau: f64, rho: f64, x: f64) -> f64 {
    let s = 1.0 - tau * tau;
    (x * x + 0.25 * s * s * rho * rho).powf(-0.25)
}

/// Normalisation of the strong-regime density, by quadrature.
pub fn c_strong(tau: f64, rho: f64) -> Result<f64> {
    check_tau_rho(tau, rho)?;
    let g = droplet(tau, rho);
    let f = |x: f64| strong_profile(tau, rho, x);
    let mut integrand = Integrand::new(&f);
    if rho == 0.0 {
        integrand = integrand.with_singular(0.0);
    }
    Ok(integrate_with(&integrand, g.xi_minus, g.xi_plus, &QuadOptions::rel(QUAD_REL))?.value)
}

/// Normalisation of the strong-regime density through two 2F1 values.
pub fn c_strong_hyp(tau: f64, rho: f64) -> Result<f64> {
    check_tau_rho(tau, rho)?;
    if rho <= 0.0 {
        return domain("the hypergeometric form needs rho > 0");
    }
    let s = 1.0 - tau * tau;
    let g = droplet(tau, rho);
    let q = 4.0 / (rho * rho * s * s);
    let part = |xi: f64| -> Result<f64> { Ok(xi * hyp2f1_euler(0.25, 0.5, 1.5, -q * xi * xi)?) };
    Ok((2.0 / (rho * s)).sqrt() * (part(g.xi_plus)? - part(g.xi_minus)?))
}

/// Weak-regime counting coefficient e^{-a^2/2}(I_0 + I_1)(a^2/2).
pub fn c_weak(alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return domain(format!("c_weak needs alpha >= 0, got {alpha}"));
    }
    let z = 0.5 * alpha * alpha;
    Ok((bessel_i_scaled(0.0, z)? - z).exp() + (bessel_i_scaled(1.0, z)? - z).exp())
}

/// The same constant by its alternating power series; limited to alpha <= 3.
pub fn c_weak_series(alpha: f64) -> Result<f64> {
    if !(0.0..=SERIES_MAX_ALPHA).contains(&alpha) {
        return domain(format!("c_weak_series needs 0 <= alpha <= {SERIES_MAX_ALPHA}, got {alpha}"));
    }
    let a2 = alpha * alpha;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= -a2 * (2.0 * kf + 1.0) / (2.0 * (kf + 1.0) * (kf + 2.0));
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
    }
    Ok(sum)
}

/// The same constant as the mass of the unnormalised weak density; independent of rho.
pub fn c_weak_integral(alpha: f64, rho: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(rho >= 0.0) {
        return domain(format!("c_weak_integral needs alpha > 0 and rho >= 0, got ({alpha}, {rho})"));
    }
    let g = droplet(0.0, rho);
    let (lm, lp) = (g.lambda_minus, g.lambda_plus);
    // x = u^2 removes the 1/sqrt(x) factor
    let f = |u: f64| {
        if u <= 0.0 {
            return erf(0.5 * alpha * lp.sqrt());
        }
        let x = u * u;
        erf(0.5 * alpha * ((lp - x) * (x - lm)).max(0.0).sqrt() / u)
    };
    let (a, b) = (lm.sqrt(), lp.sqrt());
    let integrand = Integrand::new(&f).with_singular(a).with_singular(b);
    let v = integrate_with(&integrand, a, b, &QuadOptions::rel(QUAD_REL))?.value;
    Ok(v / (alpha * PI.sqrt()))
}

/// Limiting density of the real eigenvalues at strong non-Hermiticity.
pub fn rho_strong(tau: f64, rho: f64, x: f64) -> Result<f64> {
    let c = c_strong(tau, rho)?;
    Ok(rho_strong_with(tau, rho, c, x))
}

fn rho_strong_with(tau: f64, rho: f64, c: f64, x: f64) -> f64 {
    let g = droplet(tau, rho);
    if x < g.xi_minus || x > g.xi_plus {
        return 0.0;
    }
    strong_profile(tau, rho, x) / c
}

/// Limiting density of the real eigenvalues at weak non-Hermiticity.
pub fn rho_weak(alpha: f64, rho: f64, x: f64) -> Result<f64> {
    let c = c_weak(alpha)?;
    Ok(rho_weak_with(alpha, rho, c, x))
}

fn rho_weak_with(alpha: f64, rho: f64, c: f64, x: f64) -> f64 {
    let g = droplet(0.0, rho);
    if x <= g.lambda_minus || x > g.lambda_plus || x <= 0.0 {
        return 0.0;
    }
    let arg = 0.5 * alpha * ((g.lambda_plus - x) * (x - g.lambda_minus) / x).sqrt();
    erf(arg) / (c * 2.0 * alpha * PI.sqrt() * x.sqrt())
}

/// Marchenko-Pastur density with lambda_pm = (sqrt(1+rho) +- 1)^2.
pub fn rho_mp(rho: f64, x: f64) -> f64 {
    let g = droplet(0.0, rho);
    if x <= g.lambda_minus || x > g.lambda_plus || x <= 0.0 {
        return 0.0;
    }
    ((g.lambda_plus - x) * (x - g.lambda_minus)).sqrt() / (2.0 * PI * x)
}

/// Whether (x, y) lies in the elliptic droplet.
pub fn in_droplet(tau: f64, rho: f64, x: f64, y: f64) -> bool {
    let r = (1.0 + rho).sqrt();
    let u = (x - tau * (2.0 + rho)) / ((1.0 + tau * tau) * r);
    let v = y / ((1.0 - tau * tau) * r);
    u * u + v * v <= 1.0
}

/// Density (against area) of the limiting distribution of all eigenvalues.
pub fn rho_equilibrium(tau: f64, rho: f64, x: f64, y: f64) -> f64 {
    if !in_droplet(tau, rho, x, y) {
        return 0.0;
    }
    let s = 1.0 - tau * tau;
    1.0 / (PI * s * (4.0 * (x * x + y * y) + s * s * rho * rho).sqrt())
}

/// Total mass of the equilibrium density; the y-integral is done in closed form.
pub fn equilibrium_mass(tau: f64, rho: f64) -> Result<f64> {
    check_tau_rho(tau, rho)?;
    let s = 1.0 - tau * tau;
    let g = droplet(tau, rho);
    let r = (1.0 + rho).sqrt();
    let f = |x: f64| {
        let u = (x - tau * (2.0 + rho)) / ((1.0 + tau * tau) * r);
        let half_height = s * r * (1.0 - u * u).max(0.0).sqrt();
        let c = (4.0 * x * x + s * s * rho * rho).sqrt();
        if c == 0.0 {
            return 0.0;
        }
        (2.0 * half_height / c).asinh() / (PI * s)
    };
    let mut integrand = Integrand::new(&f).with_singular(g.xi_minus).with_singular(g.xi_plus);
    if rho == 0.0 {
        integrand = integrand.with_singular(0.0);
    }
    Ok(integrate_with(&integrand, g.xi_minus, g.xi_plus, &QuadOptions::rel(1e-11))?.value)
}

/// Mass of rho_strong by quadrature.
pub fn mass_strong(tau: f64, rho: f64) -> Result<f64> {
    let c = c_strong(tau, rho)?;
    let g = droplet(tau, rho);
    let f = |x: f64| rho_strong_with(tau, rho, c, x);
    let mut integrand = Integrand::new(&f);
    if rho == 0.0 {
        integrand = integrand.with_singular(0.0);
    }
    Ok(integrate_with(&integrand, g.xi_minus, g.xi_plus, &QuadOptions::rel(QUAD_REL))?.value)
}

/// Mass of rho_weak by quadrature in x, normalised by the Bessel form of c(alpha).
pub fn mass_weak(alpha: f64, rho: f64) -> Result<f64> {
    let c = c_weak(alpha)?;
    let g = droplet(0.0, rho);
    let f = |x: f64| rho_weak_with(alpha, rho, c, x);
    let integrand = Integrand::new(&f).with_singular(g.lambda_minus).with_singular(g.lambda_plus);
    Ok(integrate_with(&integrand, g.lambda_minus, g.lambda_plus, &QuadOptions::rel(1e-12))?.value)
}

fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let mut g: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
    g[n - 1] = b;
    g
}

/// rho_strong sampled at `n` points across [xi_-, xi_+].
pub fn strong_density_curve(tau: f64, rho: f64, n: usize) -> Result<DensityCurve> {
    let c = c_strong(tau, rho)?;
    let g = droplet(tau, rho);
    let grid = uniform_grid(g.xi_minus, g.xi_plus, n);
    let values = grid
        .iter()
        .map(|&x| if rho == 0.0 && x == 0.0 { f64::INFINITY } else { rho_strong_with(tau, rho, c, x) })
        .collect();
    let mut curve = DensityCurve::new(grid, values, "strong");
    if !curve.total_mass.is_finite() {
        curve.total_mass = finite_trapezoid(&curve.grid, &curve.values);
    }
    Ok(curve)
}

/// rho_strong at each point of `grid`, with c(tau, rho) computed once.
pub fn strong_density_on(tau: f64, rho: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let c = c_strong(tau, rho)?;
    Ok(grid.iter().map(|&x| rho_strong_with(tau, rho, c, x)).collect())
}

/// rho_weak at each point of `grid`, with c(alpha) computed once.
pub fn weak_density_on(alpha: f64, rho: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let c = c_weak(alpha)?;
    Ok(grid.iter().map(|&x| rho_weak_with(alpha, rho, c, x)).collect())
}

fn finite_trapezoid(x: &[f64], y: &[f64]) -> f64 {
    let ys: Vec<f64> = y.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
    trapezoid(x, &ys)
}

/// rho_weak sampled at `n` points across the Marchenko-Pastur support, stopping 1e-8 short of a zero edge.
pub fn weak_density_curve(alpha: f64, rho: f64, n: usize) -> Result<DensityCurve> {
    let c = c_weak(alpha)?;
    let g = droplet(0.0, rho);
    let lo = if g.lambda_minus == 0.0 { 1e-8 } else { g.lambda_minus };
    let grid = uniform_grid(lo, g.lambda_plus, n);
    let values = grid.iter().map(|&x| rho_weak_with(alpha, rho, c, x)).collect();
    Ok(DensityCurve::new(grid, values, "weak"))
}

/// Marchenko-Pastur density sampled at `n` points.
pub fn mp_density_curve(rho: f64, n: usize) -> DensityCurve {
    let g = droplet(0.0, rho);
    let lo = if g.lambda_minus == 0.0 { 1e-8 } else { g.lambda_minus };
    let grid = uniform_grid(lo, g.lambda_plus, n);
    let values = grid.iter().map(|&x| rho_mp(rho, x)).collect();
    DensityCurve::new(grid, values, "mp")
}

/// Deviation of rho_s(x) / sqrt(equilibrium density at (x, 0)) from its value at the bulk midpoint.
pub fn sqrt_relation_residual(tau: f64, rho: f64, x: f64) -> Result<f64> {
    let c = c_strong(tau, rho)?;
    let g = droplet(tau, rho);
    if !(x > g.xi_minus && x < g.xi_plus) {
        return domain(format!("x = {x} is outside the bulk ({}, {})", g.xi_minus, g.xi_plus));
    }
    let ratio = |t: f64| rho_strong_with(tau, rho, c, t) / rho_equilibrium(tau, rho, t, 0.0).sqrt();
    let mut mid = 0.5 * (g.xi_minus + g.xi_plus);
    if rho == 0.0 && mid == 0.0 {
        mid = 0.5 * g.xi_plus;
    }
    let r0 = ratio(mid);
    Ok((ratio(x) / r0 - 1.0).abs())
}

fn check_positive_tau(tau: f64, rho: f64) -> Result<()> {
    check_tau_rho(tau, rho)?;
    if tau <= 0.0 {
        return domain("the conformal map degenerates at tau = 0");
    }
    Ok(())
}

/// Real branch of (z - a) sqrt(1 - b^2/(z - a)^2) off the cut, with the sign of z - a.
fn sqrt_branch(tau: f64, rho: f64, z: f64) -> Result<f64> {
    let g = droplet(tau, rho);
    if z >= g.f_minus && z <= g.f_plus && g.f_minus < g.f_plus {
        return domain(format!("z = {z} lies on the cut [{}, {}]", g.f_minus, g.f_plus));
    }
    let d = z - tau * (2.0 + rho);
    let b2 = 4.0 * (1.0 + rho) * tau * tau;
    Ok(d.signum() * (d * d - b2).max(0.0).sqrt())
}

/// Exterior conformal map of the droplet, normalised as z/sqrt(1+rho) at infinity.
pub fn conformal_psi(tau: f64, rho: f64, z: f64) -> Result<f64> {
    check_positive_tau(tau, rho)?;
    let sq = sqrt_branch(tau, rho, z)?;
    Ok((z - tau * (2.0 + rho) + sq) / (2.0 * (1.0 + rho).sqrt()))
}

/// Derivative of the conformal map.
pub fn psi_prime(tau: f64, rho: f64, z: f64) -> Result<f64> {
    check_positive_tau(tau, rho)?;
    let sq = sqrt_branch(tau, rho, z)?;
    if sq == 0.0 {
        return domain("psi' is singular at the foci");
    }
    Ok((1.0 + (z - tau * (2.0 + rho)) / sq) / (2.0 * (1.0 + rho).sqrt()))
}

/// The factor 2 tau (1+rho) / (z + rho tau - sqrt(...)) of the asymptotics.
pub fn varpi(tau: f64, rho: f64, z: f64) -> Result<f64> {
    check_positive_tau(tau, rho)?;
    let sq = sqrt_branch(tau, rho, z)?;
    Ok(2.0 * tau * (1.0 + rho) / (z + rho * tau - sq))
}

/// Real part of g on the real line; on the cut this is the boundary value from either side.
fn re_g(tau: f64, rho: f64, x: f64) -> f64 {
    let a = tau * (2.0 + rho);
    let d = x - a;
    let b2 = 4.0 * (1.0 + rho) * tau * tau;
    let disc = d * d - b2;
    let (lin, l1, l2) = if disc >= 0.0 {
        let sq = d.signum() * disc.sqrt();
        ((x - sq) / (2.0 * tau), (d + sq).abs().ln(), (x - tau * rho + sq).abs().ln())
    } else {
        // sqrt is purely imaginary with square disc
        let e = x - tau * rho;
        (x / (2.0 * tau), 0.5 * b2.ln(), 0.5 * (e * e - disc).ln())
    };
    let l2_term = if rho == 0.0 { 0.0 } else { rho * l2 };
    lin + (1.0 + rho) * l1 - l2_term - LN_2 - 0.5 * rho
}

/// g-function of the Laguerre asymptotics, for real z off the cut (real part when z < F_-).
pub fn g_func(tau: f64, rho: f64, z: f64) -> Result<f64> {
    check_positive_tau(tau, rho)?;
    sqrt_branch(tau, rho, z)?;
    Ok(re_g(tau, rho, z))
}

/// Omega on the real line; vanishes at the droplet edges and is positive elsewhere.
pub fn omega_rho(tau: f64, rho: f64, x: f64) -> Result<f64> {
    check_positive_tau(tau, rho)?;
    let s = 1.0 - tau * tau;
    let aa = (x * x + 0.25 * s * s * rho * rho).sqrt();
    let log_term = if rho == 0.0 { 0.0 } else { rho * (aa + 0.5 * s * rho).ln() - (1.0 + rho) * (1.0 + rho).ln() };
    Ok((2.0 / s) * (aa - tau * x) - log_term - rho - 2.0 * re_g(tau, rho, x))
}

/// Density of the equilibrium measure along the real line, (1/(2s))(p^2 + rho^2 s^2/4)^{-1/2}.
pub fn local_density_delta(tau: f64, rho: f64, p: f64) -> f64 {
    let s = 1.0 - tau * tau;
    0.5 / (s * (p * p + 0.25 * rho * rho * s * s).sqrt())
}

/// |N Omega(p + n zeta / sqrt(N delta(p))) - 2 zeta^2| at an edge p, n the outward normal.
pub fn edge_expansion_residual(tau: f64, rho: f64, p: f64, zeta: f64, n: usize) -> Result<f64> {
    let g = droplet(tau, rho);
    let normal = if (p - g.xi_plus).abs() <= 1e-12 * g.xi_plus.abs().max(1.0) {
        1.0
    } else if (p - g.xi_minus).abs() <= 1e-12 * g.xi_minus.abs().max(1.0) {
        -1.0
    } else {
        return domain(format!("p = {p} is not an edge of the droplet"));
    };
    let nf = n as f64;
    let x = p + normal * zeta / (nf * local_density_delta(tau, rho, p)).sqrt();
    Ok((nf * omega_rho(tau, rho, x)? - 2.0 * zeta * zeta).abs())
}

/// Leading-order approximation of L_{N+r}^{(nu+m)}(N z / tau) for real z off the cut.
pub fn laguerre_pr_exponential(n: usize, tau: f64, mode: RhoMode, r: i64, m: i64, z: f64) -> Result<SignedLog> {
    let nf = n as f64;
    let parity = |k: i64| if k.rem_euclid(2) == 0 { 1i8 } else { -1i8 };
    let mut sign = parity(n as i64 + r);
    let base = -0.5 * (2.0 * PI * nf).ln() - (nf + r as f64) * tau.ln();
    let (rho, extra) = match mode {
        RhoMode::Proportional(rho) => (rho, 0.25 * (2.0 * r as f64 + 1.0) * (1.0 + rho).ln()),
        RhoMode::Fixed(_) => (0.0, 0.0),
    };
    check_positive_tau(tau, rho)?;
    let g = droplet(tau, rho);
    let psi = conformal_psi(tau, rho, z)?;
    let dpsi = psi_prime(tau, rho, z)?;
    let mut lm = base + extra + 0.5 * dpsi.ln() + r as f64 * psi.abs().ln() + nf * re_g(tau, rho, z);
    if psi < 0.0 && r.rem_euclid(2) == 1 {
        sign = -sign;
    }
    // left of the cut both logs in g pick up i pi, contributing (-1)^N overall
    if z < g.f_minus {
        sign *= parity(n as i64);
    }
    match mode {
        RhoMode::Proportional(_) => {
            let w = varpi(tau, rho, z)?;
            lm += m as f64 * w.abs().ln();
            if w < 0.0 && m.rem_euclid(2) == 1 {
                sign = -sign;
            }
        }
        RhoMode::Fixed(nu) => {
            if m != 0 {
                return domain("the fixed-nu asymptotics covers m = 0 only");
            }
            lm += 0.5 * nu * (psi / z).abs().ln();
        }
    }
    Ok(SignedLog::new(sign, lm))
}
