//! Exact finite-N Pfaffian kernel of the real eigenvalues.
//!
//! Everything is built from the skew-orthogonal polynomials p_j, the weight
//! w(v) = |v|^{nu/2} K_{nu/2}(|v|/s) e^{tau v/s} with s = 1 - tau^2, and the
//! transforms Phi_j(y) = int sgn(y - v) w(v) p_j(v) dv.
//!
//! Internally p_j and Phi_j are divided by sqrt(r_{j/2}) so that the factorial
//! growth of the normalisations never reaches the floating-point range.

use std::cell::RefCell;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::params::EnsembleParams;
use crate::quad::{integrate_vec, truncation_point, Direction, QuadOptions};
use crate::specfun::{laguerre_seq, ln_factorial, ln_gamma, ln_xpow_bessel_k, LogSum, SignedLog};

/// Relative tolerance (against the integral of |f|) used for every Phi quadrature.
const PHI_REL_TOL: f64 = 1e-12;
/// Refuse a kernel value when the cancellation bound exceeds this fraction of it.
const PRECISION_REL: f64 = 1e-6;
/// ... unless the bound is below this absolute floor.
const PRECISION_ABS: f64 = 1e-12;

/// A kernel value with its propagated error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub value: f64,
    pub abs_err_estimate: f64,
}

/// The four entries of the 2x2 matrix kernel at a pair of (rescaled) points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixKernel2x2 {
    pub d: f64,
    pub s_xy: f64,
    pub s_yx: f64,
    pub itilde: f64,
}

/// ln w(x).
pub fn ln_weight(params: &EnsembleParams, x: f64) -> Result<f64> {
    let s = params.s();
    let h = 0.5 * params.nu;
    Ok(ln_xpow_bessel_k(h, h, x, s)? + params.tau * x / s)
}

/// The weight w(x) = |x|^{nu/2} K_{nu/2}(|x|/s) e^{tau x/s}.
pub fn weight_w(params: &EnsembleParams, x: f64) -> Result<SignedLog> {
    if x == 0.0 && params.nu == 0.0 {
        return domain("the weight has a logarithmic singularity at 0 when nu = 0");
    }
    Ok(SignedLog::from_log(ln_weight(params, x)?))
}

/// ln r_j = ln(2 pi s Gamma(2j+1) Gamma(2j+1+nu)).
pub fn ln_r(params: &EnsembleParams, j: usize) -> f64 {
    let j2 = 2.0 * j as f64;
    (2.0 * std::f64::consts::PI * params.s()).ln()
        + ln_factorial(2 * j)
        + ln_gamma(j2 + 1.0 + params.nu).expect("nu > -1")
}

/// p_0(x), ..., p_{count-1}(x).
pub fn sop_values(params: &EnsembleParams, count: usize, x: f64) -> Vec<SignedLog> {
    sop_impl(params, count, x, false)
}

/// Termwise absolute-value bounds on |p_j(x)|, j < count.
pub fn sop_bounds(params: &EnsembleParams, count: usize, x: f64) -> Vec<SignedLog> {
    sop_impl(params, count, x, true)
}

/// The skew-orthogonal polynomial p_j(x).
pub fn sop_p(params: &EnsembleParams, j: usize, x: f64) -> SignedLog {
    sop_values(params, j + 1, x)[j]
}

fn sop_impl(params: &EnsembleParams, count: usize, x: f64, bound: bool) -> Vec<SignedLog> {
    let nu = params.nu;
    let tau = params.tau;
    let mut out = Vec::with_capacity(count);
    if tau == 0.0 {
        // limiting polynomials: p_{2k} = x^{2k}, p_{2k+1} = x^{2k+1} - 2k(2k+nu) x^{2k-1}
        let xx = if bound { x.abs() } else { x };
        for j in 0..count {
            let lead = SignedLog::from_f64(xx.powi(j as i32));
            if j % 2 == 0 || j == 1 {
                out.push(lead);
                continue;
            }
            let k = (j - 1) as f64;
            let c = k * (k + nu);
            let low = SignedLog::from_f64(c * xx.powi(j as i32 - 2));
            out.push(if bound { lead + low.abs() } else { lead - low });
        }
        return out;
    }
    let arg = if bound { -x.abs() / tau } else { x / tau };
    let lag = laguerre_seq(count.saturating_sub(1), nu, arg);
    let lt = tau.ln();
    for j in 0..count {
        let jf = j as f64;
        let main = lag[j].scale_log(jf * lt + ln_factorial(j));
        if j % 2 == 0 {
            out.push(main);
            continue;
        }
        // p_{2i+1} = -tau^{2i+1}(2i+1)! L_{2i+1} + tau^{2i-1}(2i)!(2i+nu) L_{2i-1}
        let i2 = j - 1;
        let tail = if i2 == 0 {
            SignedLog::ZERO
        } else {
            (lag[j - 2] * SignedLog::from_f64(i2 as f64 + nu)).scale_log((jf - 2.0) * lt + ln_factorial(i2))
        };
        out.push(if bound { main.abs() + tail.abs() } else { tail - main });
    }
    out
}

/// Normalisations and total transforms for one parameter set.
///
/// `phi_total[j]` and `phi_l1[j]` hold M_j = int w p_j and int w |p_j|, both
/// divided by sqrt(r_{j/2}).
#[derive(Debug, Clone)]
pub struct SOPCache {
    pub params: EnsembleParams,
    pub r: Vec<SignedLog>,
    pub phi_total: Vec<f64>,
    pub phi_total_err: Vec<f64>,
    pub phi_l1: Vec<f64>,
    ln_sqrt_r: Vec<f64>,
}

impl SOPCache {
    pub fn new(params: EnsembleParams) -> Result<Self> {
        params.validate()?;
        let half = params.n / 2;
        let lr: Vec<f64> = (0..half).map(|j| ln_r(&params, j)).collect();
        let mut cache = SOPCache {
            params,
            r: lr.iter().map(|&l| SignedLog::from_log(l)).collect(),
            phi_total: Vec::new(),
            phi_total_err: Vec::new(),
            phi_l1: Vec::new(),
            ln_sqrt_r: lr.iter().map(|l| 0.5 * l).collect(),
        };
        let lo = cache.tail_integral(0.0, Direction::Minus)?;
        let hi = cache.tail_integral(0.0, Direction::Plus)?;
        let n = params.n;
        cache.phi_total = (0..n).map(|j| lo.0[j] + hi.0[j]).collect();
        cache.phi_total_err = (0..n).map(|j| lo.1[j] + hi.1[j]).collect();
        cache.phi_l1 = (0..n).map(|j| lo.2[j] + hi.2[j]).collect();
        Ok(cache)
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// M_j = int w p_j over the real line.
    pub fn phi_total(&self, j: usize) -> SignedLog {
        SignedLog::from_f64(self.phi_total[j]).scale_log(self.ln_sqrt_r[j / 2])
    }

    /// p_j(x) / sqrt(r_{j/2}) for all j < N.
    pub fn scaled_p(&self, x: f64) -> Vec<SignedLog> {
        let mut p = sop_values(&self.params, self.n(), x);
        for (j, v) in p.iter_mut().enumerate() {
            *v = v.scale_log(-self.ln_sqrt_r[j / 2]);
        }
        p
    }

    /// ln of sum_j |p_j(x)| / sqrt(r_{j/2}), an envelope for the integrands.
    fn ln_p_bound(&self, x: f64) -> f64 {
        let mut acc = LogSum::with_capacity(self.n());
        for (j, b) in sop_bounds(&self.params, self.n(), x).into_iter().enumerate() {
            acc.push(b.scale_log(-self.ln_sqrt_r[j / 2]));
        }
        acc.abs_log()
    }

    fn fill_integrand(&self, v: f64, out: &mut [f64]) {
        match ln_weight(&self.params, v) {
            Ok(lw) => {
                for (o, p) in out.iter_mut().zip(self.scaled_p(v)) {
                    *o = p.scale_log(lw).to_f64();
                }
            }
            Err(_) => out.iter_mut().for_each(|o| *o = f64::NAN),
        }
    }

    /// (values, errors, L1) of int w p_j / sqrt(r) over [a, inf) or (-inf, a].
    fn tail_integral(&self, a: f64, dir: Direction) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let env = |v: f64| ln_weight(&self.params, v).unwrap_or(f64::INFINITY) + self.ln_p_bound(v);
        let t = truncation_point(&env, a, dir)?;
        let f = |v: f64, out: &mut [f64]| self.fill_integrand(v, out);
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: PHI_REL_TOL, max_panels: 4000 };
        let r = integrate_vec(&f, self.n(), a.min(t), a.max(t), &[0.0], &opts)?;
        Ok((r.values, r.abs_err, r.l1))
    }

    /// Scaled Phi_j(y) for all j, with error estimates.
    pub fn phi_all(&self, y: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        // sgn(y - v): Phi_j(y) = M_j - 2 int_y^inf = 2 int_{-inf}^y - M_j
        let (dir, sign) = if y >= 0.0 { (Direction::Plus, 1.0) } else { (Direction::Minus, -1.0) };
        let (v, e, _) = self.tail_integral(y, dir)?;
        let n = self.n();
        let vals = (0..n).map(|j| sign * (self.phi_total[j] - 2.0 * v[j])).collect();
        let errs = (0..n).map(|j| self.phi_total_err[j] + 2.0 * e[j]).collect();
        Ok((vals, errs))
    }

    /// Phi_j(y) with its error estimate (unscaled).
    pub fn phi(&self, j: usize, y: f64) -> Result<KernelEval> {
        if j >= self.n() {
            return domain(format!("Phi index {j} out of range for N = {}", self.n()));
        }
        let (v, e) = self.phi_all(y)?;
        let scale = self.ln_sqrt_r[j / 2].exp();
        Ok(KernelEval { value: v[j] * scale, abs_err_estimate: e[j] * scale })
    }

    /// Precomputes everything the kernel entries need at the unscaled point u.
    pub fn point(&self, u: f64) -> Result<KernelPoint> {
        let ln_w = weight_w(&self.params, u)?.logmag;
        let (phi, phi_err) = self.phi_all(u)?;
        Ok(KernelPoint { u, ln_w, p: self.scaled_p(u), phi, phi_err })
    }

    fn point_without_phi(&self, u: f64) -> Result<KernelPoint> {
        let ln_w = weight_w(&self.params, u)?.logmag;
        Ok(KernelPoint { u, ln_w, p: self.scaled_p(u), phi: Vec::new(), phi_err: Vec::new() })
    }
}

/// Weight, scaled polynomials and scaled transforms at one unscaled point.
#[derive(Debug, Clone)]
pub struct KernelPoint {
    pub u: f64,
    ln_w: f64,
    p: Vec<SignedLog>,
    phi: Vec<f64>,
    phi_err: Vec<f64>,
}

fn guarded(sum: &LogSum, extra_err: f64, ln_pref: f64) -> Result<KernelEval> {
    let v = sum.sum();
    let round = if sum.is_empty() { 0.0 } else { 4.0 * f64::EPSILON * sum.len() as f64 * (sum.abs_log() + ln_pref).exp() };
    let value = v.scale_log(ln_pref).to_f64();
    let bound = round + extra_err * ln_pref.exp();
    if bound > (PRECISION_REL * value.abs()).max(PRECISION_ABS) {
        return Err(Error::PrecisionLoss { bound, value });
    }
    Ok(KernelEval { value, abs_err_estimate: bound })
}

/// S_N(a, b) from precomputed points; `a` needs p, `b` needs Phi.
pub fn s_pair(a: &KernelPoint, b: &KernelPoint) -> Result<KernelEval> {
    let half = a.p.len() / 2;
    let mut acc = LogSum::with_capacity(2 * half);
    let mut qerr = 0.0;
    for j in 0..half {
        let (p0, p1) = (a.p[2 * j], a.p[2 * j + 1]);
        acc.push(p1 * SignedLog::from_f64(b.phi[2 * j]));
        acc.push(-(p0 * SignedLog::from_f64(b.phi[2 * j + 1])));
        qerr += p1.abs().to_f64() * b.phi_err[2 * j] + p0.abs().to_f64() * b.phi_err[2 * j + 1];
    }
    guarded(&acc, qerr, a.ln_w)
}

/// -2 w(a) w(b) sum_j [p_{2j+1}(a) p_{2j}(b) - p_{2j}(a) p_{2j+1}(b)] / r_j.
pub fn d_pair(a: &KernelPoint, b: &KernelPoint) -> Result<KernelEval> {
    if a.u == b.u {
        return Ok(KernelEval { value: 0.0, abs_err_estimate: 0.0 });
    }
    let half = a.p.len() / 2;
    let mut acc = LogSum::with_capacity(2 * half);
    for j in 0..half {
        acc.push(a.p[2 * j + 1] * b.p[2 * j]);
        acc.push(-(a.p[2 * j] * b.p[2 * j + 1]));
    }
    let mut r = guarded(&acc, 0.0, a.ln_w + b.ln_w + std::f64::consts::LN_2)?;
    r.value = -r.value;
    Ok(r)
}

/// (1/2) sum_j [Phi_{2j}(a) Phi_{2j+1}(b) - Phi_{2j+1}(a) Phi_{2j}(b)] / r_j + sgn(a - b)/2.
pub fn i_pair(a: &KernelPoint, b: &KernelPoint) -> Result<KernelEval> {
    if a.u == b.u {
        return Ok(KernelEval { value: 0.0, abs_err_estimate: 0.0 });
    }
    let half = a.phi.len() / 2;
    let mut acc = LogSum::with_capacity(2 * half);
    let mut qerr = 0.0;
    for j in 0..half {
        let (a0, a1, b0, b1) = (a.phi[2 * j], a.phi[2 * j + 1], b.phi[2 * j], b.phi[2 * j + 1]);
        acc.push(SignedLog::from_f64(a0 * b1));
        acc.push(SignedLog::from_f64(-a1 * b0));
        qerr += a.phi_err[2 * j] * b1.abs() + a0.abs() * b.phi_err[2 * j + 1];
        qerr += a.phi_err[2 * j + 1] * b0.abs() + a1.abs() * b.phi_err[2 * j];
    }
    let mut r = guarded(&acc, qerr, -std::f64::consts::LN_2)?;
    // the sign term is exact and dominates near the diagonal; do not let it trip the guard
    r.value += 0.5 * (a.u - b.u).signum();
    Ok(r)
}

/// The kernel S_N(x, y) in unscaled coordinates.
pub fn s_kernel(cache: &SOPCache, x: f64, y: f64) -> Result<KernelEval> {
    let a = cache.point_without_phi(x)?;
    let mut b = a.clone();
    if x != y {
        b = cache.point_without_phi(y)?;
    }
    let (phi, phi_err) = cache.phi_all(y)?;
    b.phi = phi;
    b.phi_err = phi_err;
    s_pair(&a, &b)
}

fn scale_eval(e: KernelEval, f: f64) -> KernelEval {
    KernelEval { value: e.value * f, abs_err_estimate: e.abs_err_estimate * f.abs() }
}

/// N S_N(Nx, Ny).
pub fn s_kernel_rescaled(cache: &SOPCache, x: f64, y: f64) -> Result<KernelEval> {
    let n = cache.params.nf();
    Ok(scale_eval(s_kernel(cache, n * x, n * y)?, n))
}

/// D_N(x, y) = -(1/N) d/dy of the rescaled kernel, in rescaled coordinates.
pub fn d_kernel(cache: &SOPCache, x: f64, y: f64) -> Result<KernelEval> {
    let n = cache.params.nf();
    let a = cache.point_without_phi(n * x)?;
    let b = cache.point_without_phi(n * y)?;
    Ok(scale_eval(d_pair(&a, &b)?, n))
}

/// I~_N(x, y) = int_x^y S_N(t, y) dt + sgn(x - y)/2 in rescaled coordinates, closed form.
pub fn itilde_kernel(cache: &SOPCache, x: f64, y: f64) -> Result<KernelEval> {
    let n = cache.params.nf();
    let a = phi_only_point(cache, n * x)?;
    let b = phi_only_point(cache, n * y)?;
    i_pair(&a, &b)
}

fn phi_only_point(cache: &SOPCache, u: f64) -> Result<KernelPoint> {
    let (phi, phi_err) = cache.phi_all(u)?;
    Ok(KernelPoint { u, ln_w: 0.0, p: Vec::new(), phi, phi_err })
}

/// I~_N by direct quadrature of the rescaled kernel in its first argument.
pub fn itilde_kernel_quadrature(cache: &SOPCache, x: f64, y: f64) -> Result<KernelEval> {
    let n = cache.params.nf();
    if x == y {
        return Ok(KernelEval { value: 0.0, abs_err_estimate: 0.0 });
    }
    let mut b = cache.point_without_phi(n * y).or_else(|_| phi_only_point(cache, n * y))?;
    let (phi, phi_err) = cache.phi_all(n * y)?;
    b.phi = phi;
    b.phi_err = phi_err;
    let failure = RefCell::new(None);
    let f = |t: f64, out: &mut [f64]| {
        let v = cache.point_without_phi(n * t).and_then(|a| s_pair(&a, &b));
        out[0] = match v {
            Ok(e) => n * e.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        };
    };
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_panels: 2000 };
    let r = integrate_vec(&f, 1, x, y, &[0.0], &opts);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let r = r?;
    Ok(KernelEval { value: r.values[0] + 0.5 * (x - y).signum(), abs_err_estimate: r.abs_err[0] })
}

/// One-point intensity R_N(x) = N S_N(Nx, Nx).
pub fn r_one_point(cache: &SOPCache, x: f64) -> Result<KernelEval> {
    s_kernel_rescaled(cache, x, x)
}

/// The 2x2 block K_N(x, y) of the Pfaffian kernel, rescaled coordinates.
pub fn matrix_kernel(cache: &SOPCache, x: f64, y: f64) -> Result<MatrixKernel2x2> {
    let n = cache.params.nf();
    let a = cache.point(n * x)?;
    let b = cache.point(n * y)?;
    Ok(MatrixKernel2x2 {
        d: n * d_pair(&a, &b)?.value,
        s_xy: n * s_pair(&a, &b)?.value,
        s_yx: n * s_pair(&b, &a)?.value,
        itilde: i_pair(&a, &b)?.value,
    })
}

/// Pfaffian of an antisymmetric matrix by skew Gaussian elimination with pivoting.
pub fn pfaffian(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n != a.ncols() {
        return domain("Pfaffian needs a square matrix");
    }
    let amax = a.amax();
    let defect = (a + a.transpose()).amax();
    if defect > 1e-12 * amax {
        return Err(Error::NotAntisymmetric { defect });
    }
    if n % 2 == 1 {
        return Ok(0.0);
    }
    let mut m = a.clone();
    let mut pf = 1.0;
    for k in (0..n.saturating_sub(1)).step_by(2) {
        let mut kp = k + 1;
        for i in k + 2..n {
            if m[(i, k)].abs() > m[(kp, k)].abs() {
                kp = i;
            }
        }
        if kp != k + 1 {
            m.swap_rows(k + 1, kp);
            m.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = m[(k, k + 1)];
        if piv == 0.0 {
            return Ok(0.0);
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| m[(k, j)] / piv).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| m[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    m[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    Ok(pf)
}

/// The 2k x 2k antisymmetric matrix [K_N(x_j, x_l)].
pub fn correlation_matrix(cache: &SOPCache, points: &[f64]) -> Result<DMatrix<f64>> {
    let n = cache.params.nf();
    let pts = points.iter().map(|&x| cache.point(n * x)).collect::<Result<Vec<_>>>()?;
    let k = pts.len();
    let mut m = DMatrix::zeros(2 * k, 2 * k);
    for j in 0..k {
        for l in j..k {
            let (a, b) = (&pts[j], &pts[l]);
            // upper triangle of [[D(j,l), S(j,l)], [-S(l,j), I(j,l)]]; lower = -transpose
            let d = n * d_pair(a, b)?.value;
            let s_jl = n * s_pair(a, b)?.value;
            let s_lj = n * s_pair(b, a)?.value;
            let it = i_pair(a, b)?.value;
            let blk = [[d, s_jl], [-s_lj, it]];
            for r in 0..2 {
                for c in 0..2 {
                    let (row, col) = (2 * j + r, 2 * l + c);
                    if row < col {
                        m[(row, col)] = blk[r][c];
                        m[(col, row)] = -blk[r][c];
                    }
                }
            }
        }
    }
    Ok(m)
}

/// k-point correlation R_{N,k}(x_1..x_k) = Pf[K_N(x_j, x_l)].
pub fn correlation_k(cache: &SOPCache, points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Ok(1.0);
    }
    pfaffian(&correlation_matrix(cache, points)?)
}

/// Expected number of real eigenvalues, int R_N(x) dx = int S_N(u, u) du.
pub fn expected_number(cache: &SOPCache) -> Result<KernelEval> {
    let params = &cache.params;
    let half = cache.n() / 2;
    let failure = RefCell::new(None);
    let f = |u: f64, out: &mut [f64]| {
        out[0] = match cache.point(u).and_then(|p| s_pair(&p, &p)) {
            Ok(e) => e.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        };
    };
    // |Phi_j| never exceeds its L1 norm
    let env = |u: f64| {
        let lw = match ln_weight(params, u) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let b = sop_bounds(params, cache.n(), u);
        let mut acc = LogSum::with_capacity(2 * half);
        for j in 0..half {
            let sc = -2.0 * cache.ln_sqrt_r[j];
            acc.push(b[2 * j + 1].scale_log(sc) * SignedLog::from_f64(cache.phi_l1[2 * j]));
            acc.push(b[2 * j].scale_log(sc) * SignedLog::from_f64(cache.phi_l1[2 * j + 1]));
        }
        lw + acc.abs_log()
    };
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-9, max_panels: 2000 };
    let mut total = 0.0;
    let mut err = 0.0;
    for dir in [Direction::Minus, Direction::Plus] {
        let t = truncation_point(&env, 0.0, dir)?;
        let r = integrate_vec(&f, 1, t.min(0.0), t.max(0.0), &[0.0], &opts);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        let r = r?;
        total += r.values[0];
        err += r.abs_err[0];
    }
    Ok(KernelEval { value: total, abs_err_estimate: err })
}

/// Normalised skew products G[a][b] = <p_a, p_b> / (sqrt(r_{a/2}) sqrt(r_{b/2})), a, b < count,
/// where <f, g> = int int sgn(v - u) w(u) w(v) f(u) g(v) du dv over the real line.
pub fn skew_gram(cache: &SOPCache, count: usize) -> Result<Vec<Vec<f64>>> {
    if count > cache.n() {
        return domain(format!("skew products need count <= N = {}", cache.n()));
    }
    let params = &cache.params;
    let failure = RefCell::new(None);
    // <p_a, p_b> = int w(v) p_b(v) Phi_a(v) dv
    let f = |v: f64, out: &mut [f64]| {
        let res = (|| -> Result<()> {
            let lw = ln_weight(params, v)?;
            let p = cache.scaled_p(v);
            let (phi, _) = cache.phi_all(v)?;
            for a in 0..count {
                for b in 0..count {
                    out[a * count + b] = p[b].scale_log(lw).to_f64() * phi[a];
                }
            }
            Ok(())
        })();
        if let Err(e) = res {
            failure.borrow_mut().get_or_insert(e);
            out.iter_mut().for_each(|o| *o = f64::NAN);
        }
    };
    let env = |v: f64| {
        ln_weight(params, v).unwrap_or(f64::INFINITY) + cache.ln_p_bound(v) + cache.phi_l1.iter().sum::<f64>().ln()
    };
    let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_panels: 2000 };
    let mut g = vec![0.0; count * count];
    for dir in [Direction::Minus, Direction::Plus] {
        let t = truncation_point(&env, 0.0, dir)?;
        let r = integrate_vec(&f, count * count, t.min(0.0), t.max(0.0), &[0.0], &opts);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        for (gi, v) in g.iter_mut().zip(r?.values) {
            *gi += v;
        }
    }
    Ok(g.chunks(count).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cache(n: usize, nu: f64, tau: f64) -> SOPCache {
        SOPCache::new(EnsembleParams::strong(n, nu, tau).unwrap()).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn weight_values() {
        let p = EnsembleParams::strong(4, 1.0, 0.0).unwrap();
        let w = weight_w(&p, 1.0).unwrap();
        assert_eq!(w.sign, 1);
        assert!(close(w.to_f64(), (PI / 2.0).sqrt() * (-1f64).exp(), 1e-13));
        let p = EnsembleParams::strong(4, 0.0, 0.5).unwrap();
        assert!(weight_w(&p, 0.0).is_err());
        let lim: Vec<f64> = [50.0, 100.0, 200.0]
            .iter()
            .map(|&x| (weight_w(&p, x).unwrap().logmag + x / 1.5).exp())
            .collect();
        assert!(lim.iter().all(|&v| v.is_finite() && v < 2.0));
        // |x|^{nu/2} K_{nu/2}(|x|/s) -> Gamma(nu/2)/2 (2s)^{nu/2} at the origin
        let p = EnsembleParams::strong(4, 2.0, 0.5).unwrap();
        assert!(close(weight_w(&p, 0.0).unwrap().to_f64(), 0.5 * 1.5, 1e-14));
    }

    #[test]
    fn low_polynomials() {
        let p = EnsembleParams::strong(4, 1.5, 0.3).unwrap();
        for &x in &[-2.0, 0.1, 3.7] {
            assert!(close(sop_p(&p, 0, x).to_f64(), 1.0, 1e-15));
            assert!(close(sop_p(&p, 1, x).to_f64(), x - 0.3 * 2.5, 1e-13));
            // p_2 = tau^2 * 2! * L_2(x/tau) = x^2 - 2 tau (nu + 2) x + tau^2 (nu+1)(nu+2)
            let want = x * x - 2.0 * 0.3 * 3.5 * x + 0.09 * 2.5 * 3.5;
            assert!(close(sop_p(&p, 2, x).to_f64(), want, 1e-12));
        }
        let p0 = EnsembleParams::strong(8, 2.0, 0.0).unwrap();
        let x: f64 = 1.7;
        assert!(close(sop_p(&p0, 4, x).to_f64(), x.powi(4), 1e-14));
        assert!(close(sop_p(&p0, 5, x).to_f64(), x.powi(5) - 4.0 * 6.0 * x.powi(3), 1e-14));
        assert!(close(sop_p(&p0, 1, x).to_f64(), x, 1e-15));
    }

    #[test]
    fn small_tau_matches_limit_branch() {
        let p0 = EnsembleParams::strong(8, 1.0, 0.0).unwrap();
        let pt = EnsembleParams::strong(8, 1.0, 1e-4).unwrap();
        for j in 0..8 {
            let a = sop_p(&p0, j, 1.3).to_f64();
            let b = sop_p(&pt, j, 1.3).to_f64();
            assert!((a - b).abs() < 1e-2 * a.abs().max(1.0), "j={j}: {a} vs {b}");
        }
    }

    #[test]
    fn bounds_dominate() {
        let p = EnsembleParams::strong(10, 0.5, 0.6).unwrap();
        for &x in &[-3.0, -0.2, 0.7, 5.0] {
            let v = sop_values(&p, 10, x);
            let b = sop_bounds(&p, 10, x);
            for j in 0..10 {
                assert!(v[j].abs().to_f64() <= b[j].to_f64() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn normalisations_and_totals() {
        let c = cache(4, 1.0, 0.5);
        let want = [2.170_803_763_674_803, 0.0, 4.341_607_527_349_606, 0.0];
        for j in 0..4 {
            let m = c.phi_total(j).to_f64();
            assert!((m - want[j]).abs() < 1e-10 * want[0], "M_{j} = {m}");
        }
        assert!(c.r.iter().all(|r| r.sign == 1));
        assert!(close(c.r[0].to_f64(), 2.0 * PI * 0.75 * 1.0, 1e-14));
    }

    #[test]
    fn phi_limits_and_derivative() {
        let c = cache(6, 0.0, 0.5);
        for j in 0..6 {
            let m = c.phi_total(j).to_f64();
            let hi = c.phi(j, 400.0).unwrap().value;
            let lo = c.phi(j, -200.0).unwrap().value;
            let scale = c.phi_l1[j] * c.ln_sqrt_r[j / 2].exp();
            assert!((hi - m).abs() < 1e-9 * scale);
            assert!((lo + m).abs() < 1e-9 * scale);
        }
        let h = 1e-5;
        for &y in &[-1.3, 0.4, 2.5] {
            for j in 0..6 {
                let fd = (c.phi(j, y + h).unwrap().value - c.phi(j, y - h).unwrap().value) / (2.0 * h);
                let an = 2.0 * (weight_w(&c.params, y).unwrap() * sop_p(&c.params, j, y)).to_f64();
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-3), "j={j} y={y}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn n2_hand_expansion() {
        // high-precision values of w(x)[p_1(x) Phi_0(y) - p_0(x) Phi_1(y)] / r_0
        let c = cache(2, 0.0, 0.5);
        let v = s_kernel(&c, 1.0, 0.5).unwrap();
        assert!(close(v.value, 0.275_349_437_766_931_13, 1e-9), "{}", v.value);
        let v = s_kernel(&c, -0.7, 1.3).unwrap();
        assert!(close(v.value, -0.031_683_593_868_453_299, 1e-9), "{}", v.value);
    }

    #[test]
    fn n4_reference_values() {
        let c = cache(4, 1.0, 0.5);
        assert!(close(s_kernel(&c, 1.0, 0.5).unwrap().value, 0.281_331_585_053_989_8, 1e-9));
        assert!(close(d_kernel(&c, 0.3, -0.2).unwrap().value, -0.304_014_005_063_479_18, 1e-9));
        assert!(close(itilde_kernel(&c, 0.3, -0.2).unwrap().value, -0.001_747_237_508_809_177_7, 1e-7));
        assert!(close(r_one_point(&c, 0.4).unwrap().value, 0.995_571_565_323_758_42, 1e-9));
    }

    #[test]
    fn rescaling_is_definitional() {
        let c = cache(6, 1.0, 0.4);
        for &(x, y) in &[(0.2, 0.5), (-0.1, 0.3), (0.7, 0.7)] {
            let a = s_kernel_rescaled(&c, x, y).unwrap().value;
            let b = 6.0 * s_kernel(&c, 6.0 * x, 6.0 * y).unwrap().value;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn d_matches_finite_difference() {
        let c = cache(6, 2.0, 0.5);
        let n = 6.0;
        for &(x, y) in &[(0.3, 0.5), (-0.2, 0.8), (1.0, -0.1)] {
            let h = 1e-4 * f64::abs(y) + 1e-6;
            let fd = -(s_kernel_rescaled(&c, x, y + h).unwrap().value - s_kernel_rescaled(&c, x, y - h).unwrap().value)
                / (2.0 * h)
                / n;
            let d = d_kernel(&c, x, y).unwrap().value;
            assert!((fd - d).abs() < 1e-5 * d.abs().max(1e-3), "({x},{y}): {fd} vs {d}");
        }
        assert_eq!(d_kernel(&c, 0.4, 0.4).unwrap().value, 0.0);
    }

    #[test]
    fn itilde_closed_form_matches_quadrature() {
        let c = cache(6, 1.0, 0.5);
        for &(x, y) in &[(0.3, 0.5), (-0.2, 0.4), (0.9, 0.1)] {
            let a = itilde_kernel(&c, x, y).unwrap().value;
            let b = itilde_kernel_quadrature(&c, x, y).unwrap().value;
            assert!((a - b).abs() < 1e-8, "({x},{y}): {a} vs {b}");
            let r = itilde_kernel(&c, y, x).unwrap().value;
            assert!((a + r).abs() < 1e-12);
        }
        assert_eq!(itilde_kernel(&c, 0.2, 0.2).unwrap().value, 0.0);
    }

    #[test]
    fn pfaffian_small_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 3.5, -3.5, 0.0]);
        assert_eq!(pfaffian(&a).unwrap(), 3.5);
        let (a12, a13, a14, a23, a24, a34) = (1.2, -0.7, 2.1, 0.4, -1.5, 0.9);
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, a12, a13, a14, -a12, 0.0, a23, a24, -a13, -a23, 0.0, a34, -a14, -a24, -a34, 0.0],
        );
        let want = a12 * a34 - a13 * a24 + a14 * a23;
        assert!((pfaffian(&m).unwrap() - want).abs() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(pfaffian(&bad), Err(Error::NotAntisymmetric { .. })));
    }

    #[test]
    fn correlations() {
        let c = cache(8, 0.0, 0.5);
        let x = 0.6;
        let r1 = correlation_k(&c, &[x]).unwrap();
        let r = r_one_point(&c, x).unwrap().value;
        assert!(close(r1, r, 1e-12));
        let a = correlation_k(&c, &[0.3, 1.1]).unwrap();
        let b = correlation_k(&c, &[1.1, 0.3]).unwrap();
        assert!((a - b).abs() < 1e-8 * a.abs());
        let m = correlation_matrix(&c, &[0.3, -0.4, 1.0]).unwrap();
        assert_eq!((&m + m.transpose()).amax(), 0.0);
    }

    #[test]
    fn expected_number_bounds() {
        let c = cache(8, 0.0, 0.5);
        let e = expected_number(&c).unwrap();
        assert!(e.value > 1.0 && e.value < 8.0, "{}", e.value);
        assert!(e.abs_err_estimate < 1e-6 * e.value);
    }

    #[test]
    fn one_point_nonnegative() {
        let c = cache(8, 1.0, 0.5);
        for i in 0..40 {
            let x = -1.5 + i as f64 * 0.1 + 0.013;
            assert!(r_one_point(&c, x).unwrap().value >= 0.0, "x={x}");
        }
    }
}
