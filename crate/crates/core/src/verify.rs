//! The identity suite: every exact relation the crate relies on, evaluated over
//! fixed parameter sweeps and reported as pass/fail with the worst residual.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::complex_kernel::{cd_diag_residual, cd_offdiag_residual, rc_zero_identity_residual};
use crate::decomposition::{r_hat_1, r_n2, tau0_one_point, verify_decomposition_with};
use crate::error::Result;
use crate::limits::{
    c_strong, c_strong_hyp, c_weak, c_weak_integral, c_weak_series, droplet, edge_expansion_residual,
    laguerre_pr_exponential, mass_strong, mass_weak, omega_rho, rho_mp, rho_weak, RhoMode,
};
use crate::params::{EnsembleParams, Regime};
use crate::sop_kernel::{pfaffian, r_one_point, s_kernel, skew_gram, SOPCache};
use crate::specfun::laguerre;

/// Names accepted by `run_check`, in suite order.
pub const CHECK_NAMES: [&str; 12] = [
    "decomposition",
    "cd",
    "skew",
    "pfaffian",
    "c-strong",
    "c-weak",
    "mass",
    "split",
    "rc-zero",
    "omega",
    "plancherel-rotach",
    "tau0",
];

/// Grid for the kernel sweeps, in unscaled coordinates.
pub const DECOMP_GRID: [f64; 5] = [-2.5, -0.6, 0.4, 1.5, 4.0];

/// One measured residual against its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Measurement {
    pub label: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl Measurement {
    fn ok(&self) -> bool {
        self.residual <= self.tolerance
    }

    fn ratio(&self) -> f64 {
        if self.residual.is_nan() {
            f64::INFINITY
        } else if self.tolerance == 0.0 {
            if self.residual == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            self.residual / self.tolerance
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub description: String,
    pub passed: bool,
    pub evaluations: usize,
    /// The measurement closest to (or furthest past) its tolerance.
    pub worst: Option<Measurement>,
    pub error: Option<String>,
}

/// Overrides for the suite.
#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Replaces every tolerance when set.
    pub tol: Option<f64>,
}

struct Collector {
    tol: Option<f64>,
    items: Vec<Measurement>,
}

impl Collector {
    fn push(&mut self, label: impl Into<String>, residual: f64, tolerance: f64) {
        let tolerance = self.tol.unwrap_or(tolerance);
        self.items.push(Measurement { label: label.into(), residual, tolerance });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn params(n: usize, nu: f64, tau: f64) -> Result<EnsembleParams> {
    EnsembleParams::strong(n, nu, tau)
}

fn sweep() -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for n in [4usize, 6, 8, 10] {
        for nu in [0.0, 1.0, 2.0, 3.0] {
            for tau in [0.2, 0.5, 0.8] {
                out.push((n, nu, tau));
            }
        }
    }
    out
}

fn check_decomposition(c: &mut Collector) -> Result<()> {
    for (n, nu, tau) in sweep() {
        let cache = SOPCache::new(params(n, nu, tau)?)?;
        for &x in &DECOMP_GRID {
            for &y in &DECOMP_GRID {
                let r = verify_decomposition_with(&cache, x, y)?;
                c.push(format!("N={n} nu={nu} tau={tau} x={x} y={y}"), r, 1e-6);
            }
        }
    }
    Ok(())
}

fn check_cd(c: &mut Collector) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2019);
    for _ in 0..50 {
        let n = rng.random_range(2..=20usize);
        let nu = rng.random_range(0..=5u32) as f64 + if rng.random_bool(0.5) { 0.5 } else { 0.0 };
        let tau = rng.random_range(0.1..0.9);
        let z = rng.random_range(-2.0..6.0);
        let w = rng.random_range(-2.0..6.0);
        // the identities hold for any N, so odd N is allowed here
        let p = EnsembleParams { n, nu, tau, regime: Regime::Strong };
        c.push(format!("offdiag N={n} nu={nu} tau={tau:.3} z={z:.3} w={w:.3}"), cd_offdiag_residual(&p, z, w)?, 1e-9);
        c.push(format!("diag N={n} nu={nu} tau={tau:.3} x={z:.3}"), cd_diag_residual(&p, z)?, 1e-9);
    }
    Ok(())
}

fn check_skew(c: &mut Collector) -> Result<()> {
    for nu in [0.0, 2.0] {
        for tau in [0.3, 0.7] {
            let cache = SOPCache::new(params(8, nu, tau)?)?;
            let g = skew_gram(&cache, 8)?;
            for a in 0..8 {
                for b in 0..8 {
                    let want = if a % 2 == 0 && b == a + 1 {
                        1.0
                    } else if b % 2 == 0 && a == b + 1 {
                        -1.0
                    } else {
                        0.0
                    };
                    c.push(format!("nu={nu} tau={tau} <p{a},p{b}>"), (g[a][b] - want).abs(), 1e-6);
                }
            }
        }
    }
    Ok(())
}

fn pfaffian_4x4(a: &DMatrix<f64>) -> f64 {
    a[(0, 1)] * a[(2, 3)] - a[(0, 2)] * a[(1, 3)] + a[(0, 3)] * a[(1, 2)]
}

fn check_pfaffian(c: &mut Collector) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..100 {
        let dim = 2 * rng.random_range(1..=5usize);
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        let pf = pfaffian(&a)?;
        let det = a.determinant();
        c.push(format!("matrix {k} dim {dim} Pf^2 vs det"), rel(pf * pf, det), 1e-10);
        if dim == 4 {
            c.push(format!("matrix {k} matchings"), rel(pf, pfaffian_4x4(&a)), 1e-12);
        }
    }
    Ok(())
}

fn check_c_strong(c: &mut Collector) -> Result<()> {
    for tau in [0.0, 0.3, 0.6, 0.9] {
        c.push(format!("c({tau},0) = 4"), (c_strong(tau, 0.0)? - 4.0).abs(), 1e-10);
    }
    for tau in [0.3, 0.6] {
        for rho in [0.5, 1.0, 2.0] {
            c.push(format!("quadrature vs 2F1 at tau={tau} rho={rho}"), rel(c_strong(tau, rho)?, c_strong_hyp(tau, rho)?), 1e-8);
        }
    }
    Ok(())
}

fn check_c_weak(c: &mut Collector) -> Result<()> {
    for alpha in [0.1, 1.0, 3.0] {
        let b = c_weak(alpha)?;
        c.push(format!("series vs Bessel at alpha={alpha}"), rel(c_weak_series(alpha)?, b), 1e-8);
        for rho in [0.0, 1.0, 3.0] {
            c.push(format!("integral vs Bessel at alpha={alpha} rho={rho}"), rel(c_weak_integral(alpha, rho)?, b), 1e-8);
        }
    }
    Ok(())
}

fn check_mass(c: &mut Collector) -> Result<()> {
    for tau in [0.3, 0.6] {
        for rho in [0.0, 0.5, 1.0, 2.0] {
            c.push(format!("strong mass tau={tau} rho={rho}"), (mass_strong(tau, rho)? - 1.0).abs(), 1e-8);
        }
    }
    for alpha in [0.1, 1.0, 3.0] {
        for rho in [0.0, 1.0, 3.0] {
            c.push(format!("weak mass alpha={alpha} rho={rho}"), (mass_weak(alpha, rho)? - 1.0).abs(), 1e-8);
        }
    }
    for rho in [0.0, 1.0, 3.0] {
        let g = droplet(0.0, rho);
        for k in 1..=10 {
            let x = g.lambda_minus + (g.lambda_plus - g.lambda_minus) * k as f64 / 11.0;
            c.push(format!("alpha=0.01 vs MP rho={rho} x={x:.3}"), rel(rho_weak(0.01, rho, x)?, rho_mp(rho, x)), 0.01);
            c.push(format!("alpha=50 vs 1/(4 sqrt x) rho={rho} x={x:.3}"), rel(rho_weak(50.0, rho, x)?, 0.25 / x.sqrt()), 0.02);
        }
    }
    Ok(())
}

fn check_split(c: &mut Collector) -> Result<()> {
    for (n, nu, tau) in sweep() {
        let p = params(n, nu, tau)?;
        let cache = SOPCache::new(p)?;
        for &g in &DECOMP_GRID {
            let x = g / n as f64;
            let want = r_one_point(&cache, x)?.value;
            let got = r_hat_1(&p, x)? + r_n2(&p, x)?;
            c.push(format!("N={n} nu={nu} tau={tau} x={x:.4}"), rel(got, want), 1e-6);
        }
    }
    Ok(())
}

fn check_rc_zero(c: &mut Collector) -> Result<()> {
    for n in [10usize, 20] {
        for nu in [5.0, 20.0] {
            for tau in [0.3, 0.7] {
                c.push(format!("N={n} nu={nu} tau={tau}"), rc_zero_identity_residual(&params(n, nu, tau)?)?, 1e-10);
            }
        }
    }
    Ok(())
}

fn check_omega(c: &mut Collector) -> Result<()> {
    for tau in [0.2, 0.5, 0.8] {
        for rho in [0.0, 1.0, 3.0] {
            let g = droplet(tau, rho);
            c.push(format!("Omega(xi+) tau={tau} rho={rho}"), omega_rho(tau, rho, g.xi_plus)?.abs(), 1e-10);
            c.push(format!("Omega(xi-) tau={tau} rho={rho}"), omega_rho(tau, rho, g.xi_minus)?.abs(), 1e-10);
            let mut min_off_edge = f64::INFINITY;
            for k in 0..200 {
                let x = g.xi_minus - 2.0 + (g.xi_plus - g.xi_minus + 4.0) * k as f64 / 199.0;
                if (x - g.xi_minus).abs().min((x - g.xi_plus).abs()) > 1e-6 {
                    min_off_edge = min_off_edge.min(omega_rho(tau, rho, x)?);
                }
            }
            // residual is how far the minimum falls short of being positive
            c.push(format!("min Omega off the edges tau={tau} rho={rho}"), if min_off_edge > 0.0 { 0.0 } else { -min_off_edge + f64::MIN_POSITIVE }, 0.0);
            for p in [g.xi_minus, g.xi_plus] {
                let r100 = edge_expansion_residual(tau, rho, p, 1.0, 100)?;
                let r400 = edge_expansion_residual(tau, rho, p, 1.0, 400)?;
                c.push(format!("edge rate at p={p:.3} tau={tau} rho={rho}"), (r100 / r400 / 2.0 - 1.0).abs(), 0.3);
            }
        }
    }
    Ok(())
}

fn check_plancherel_rotach(c: &mut Collector) -> Result<()> {
    let tau = 0.5;
    let g = droplet(tau, 1.0);
    for n in [30usize, 60, 120] {
        let nf = n as f64;
        for z in [g.xi_plus + 1.0, g.f_plus + 0.3, -0.5] {
            let exact = laguerre(n as i64, nf, nf * z / tau);
            let approx = laguerre_pr_exponential(n, tau, RhoMode::Proportional(1.0), 0, 0, z)?;
            let err = if exact.sign == approx.sign { ((approx.logmag - exact.logmag).exp() - 1.0).abs() } else { f64::INFINITY };
            c.push(format!("rho=1 N={n} z={z:.3}"), err, 10.0 / nf);
        }
        for z in [g.xi_plus + 1.0, 2.5, -0.5] {
            let exact = laguerre(n as i64, 2.0, nf * z / tau);
            let approx = laguerre_pr_exponential(n, tau, RhoMode::Fixed(2.0), 0, 0, z)?;
            let err = if exact.sign == approx.sign { ((approx.logmag - exact.logmag).exp() - 1.0).abs() } else { f64::INFINITY };
            c.push(format!("nu=2 N={n} z={z:.3}"), err, 10.0 / nf);
        }
    }
    Ok(())
}

fn check_tau0(c: &mut Collector) -> Result<()> {
    for n in [4usize, 8] {
        for nu in [0.0, 2.0] {
            let cache = SOPCache::new(params(n, nu, 0.0)?)?;
            for x in [0.5, -0.5, 1.0, -1.0] {
                let want = s_kernel(&cache, x, x)?.value;
                c.push(format!("N={n} nu={nu} x={x}"), rel(tau0_one_point(&cache.params, x)?, want), 1e-6);
            }
        }
    }
    Ok(())
}

fn describe(name: &str) -> &'static str {
    match name {
        "decomposition" => "kernel equals the sum of its three decomposition pieces",
        "cd" => "Christoffel-Darboux identities of the complex kernel",
        "skew" => "skew-orthogonality of the polynomials under the real-line skew product",
        "pfaffian" => "Pf(A)^2 = det(A) and the 4x4 matchings expansion",
        "c-strong" => "strong counting coefficient: c(tau,0) = 4 and quadrature vs 2F1",
        "c-weak" => "weak counting coefficient: Bessel, series and integral forms",
        "mass" => "unit mass of the limiting densities and their alpha limits",
        "split" => "one-point function splits into its complex and remainder parts",
        "rc-zero" => "complex one-point function at the origin vs incomplete beta",
        "omega" => "Omega vanishes only at the edges and its edge expansion rate",
        "plancherel-rotach" => "Laguerre asymptotics off the cut",
        "tau0" => "closed form of the one-point function at tau = 0",
        _ => "unknown check",
    }
}

/// Run one named check.
pub fn run_check(name: &str, opts: &VerifyOptions) -> Option<CheckResult> {
    let f: fn(&mut Collector) -> Result<()> = match name {
        "decomposition" => check_decomposition,
        "cd" => check_cd,
        "skew" => check_skew,
        "pfaffian" => check_pfaffian,
        "c-strong" => check_c_strong,
        "c-weak" => check_c_weak,
        "mass" => check_mass,
        "split" => check_split,
        "rc-zero" => check_rc_zero,
        "omega" => check_omega,
        "plancherel-rotach" => check_plancherel_rotach,
        "tau0" => check_tau0,
        _ => return None,
    };
    let mut c = Collector { tol: opts.tol, items: Vec::new() };
    let outcome = f(&mut c);
    let worst = c.items.iter().max_by(|a, b| a.ratio().total_cmp(&b.ratio())).cloned();
    let passed = outcome.is_ok() && !c.items.is_empty() && c.items.iter().all(Measurement::ok);
    Some(CheckResult {
        name: name.to_string(),
        description: describe(name).to_string(),
        passed,
        evaluations: c.items.len(),
        worst,
        error: outcome.err().map(|e| e.to_string()),
    })
}

/// Run the checks whose names appear in `only` (all of them when `only` is empty).
pub fn run_suite(only: &[String], opts: &VerifyOptions) -> Vec<CheckResult> {
    CHECK_NAMES
        .iter()
        .filter(|n| only.is_empty() || only.iter().any(|o| o == *n))
        .filter_map(|n| run_check(n, opts))
        .collect()
}
