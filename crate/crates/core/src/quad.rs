//! Adaptive Gauss-Kronrod quadrature with tanh-sinh end panels and
//! envelope-driven truncation of semi-infinite ranges.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 16] = [
    0.998_002_298_693_397_060_285_172_840_152_271,
    0.987_992_518_020_485_428_489_565_718_586_613,
    0.967_739_075_679_139_134_257_347_978_784_337,
    0.937_273_392_400_705_904_307_758_947_710_209,
    0.897_264_532_344_081_900_882_509_656_454_496,
    0.848_206_583_410_427_216_200_648_320_774_217,
    0.790_418_501_442_465_932_967_649_294_817_947,
    0.724_417_731_360_170_047_416_186_054_613_938,
    0.650_996_741_297_416_970_533_735_895_313_275,
    0.570_972_172_608_538_847_537_226_737_253_911,
    0.485_081_863_640_239_680_693_655_740_232_351,
    0.394_151_347_077_563_369_897_207_370_981_045,
    0.299_180_007_153_168_812_166_780_024_266_389,
    0.201_194_093_997_434_522_300_628_303_394_596,
    0.101_142_066_918_717_499_027_074_231_447_392,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 8] = [
    0.030_753_241_996_117_268_354_628_393_577_204,
    0.070_366_047_488_108_124_709_267_416_450_667,
    0.107_159_220_467_171_935_011_869_546_685_869,
    0.139_570_677_926_154_314_447_804_794_511_028,
    0.166_269_205_816_993_933_553_200_860_481_209,
    0.186_161_000_015_562_211_026_800_561_866_423,
    0.198_431_485_327_111_576_456_118_326_443_839,
    0.202_578_241_925_561_272_880_620_199_967_519,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 16] = [
    0.005_377_479_872_923_348_987_792_051_430_128,
    0.015_007_947_329_316_122_538_374_763_075_807,
    0.025_460_847_326_715_320_186_874_001_019_653,
    0.035_346_360_791_375_846_222_037_948_478_360,
    0.044_589_751_324_764_876_608_227_299_373_280,
    0.053_481_524_690_928_087_265_343_147_239_430,
    0.062_009_567_800_670_640_285_139_230_960_803,
    0.069_854_121_318_728_258_709_520_077_099_147,
    0.076_849_680_757_720_378_894_432_777_482_659,
    0.083_080_502_823_133_021_038_289_247_286_104,
    0.088_564_443_056_211_770_647_275_443_693_774,
    0.093_126_598_170_825_321_225_486_872_747_346,
    0.096_642_726_983_623_678_505_179_907_627_589,
    0.099_173_598_721_791_959_332_393_173_484_603,
    0.100_769_845_523_875_595_044_946_662_617_570,
    0.101_330_007_014_791_549_017_374_792_767_493,
];

/// Half-width of the tanh-sinh parameter range on singular end panels.
const TS_HALF_RANGE: f64 = 4.0;
/// Decades below the envelope maximum at which tails are dropped.
const TAIL_DECADES: f64 = 40.0;
const MAX_REACH: f64 = 1e6;

/// Result of a scalar integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err_estimate: f64,
    pub subdivisions: usize,
}

/// Result of a vector-valued integration, one entry per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VecQuadResult {
    pub values: Vec<f64>,
    pub abs_err: Vec<f64>,
    /// Estimates of the integral of |f_i|.
    pub l1: Vec<f64>,
    pub subdivisions: usize,
}

/// A scalar integrand with optional tail envelope and declared singular points.
pub struct Integrand<'a> {
    pub eval: &'a dyn Fn(f64) -> f64,
    /// Upper bound on ln|f|, used to truncate infinite ranges.
    pub log_envelope: Option<&'a dyn Fn(f64) -> f64>,
    /// Points where f may be infinite but integrable.
    pub singular_points: Vec<f64>,
}

impl<'a> Integrand<'a> {
    pub fn new(eval: &'a dyn Fn(f64) -> f64) -> Self {
        Integrand { eval, log_envelope: None, singular_points: Vec::new() }
    }

    pub fn with_envelope(mut self, env: &'a dyn Fn(f64) -> f64) -> Self {
        self.log_envelope = Some(env);
        self
    }

    pub fn with_singular(mut self, x: f64) -> Self {
        self.singular_points.push(x);
        self
    }
}

/// Which infinite end a semi-infinite integral runs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }
}

/// Tolerances and panel budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    /// Relative to the integral of |f| of each component.
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl QuadOptions {
    pub fn abs(tol: f64) -> Self {
        QuadOptions { abs_tol: tol, rel_tol: 0.0, max_panels: 2000 }
    }

    pub fn rel(tol: f64) -> Self {
        QuadOptions { abs_tol: 0.0, rel_tol: tol, max_panels: 2000 }
    }
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// x(u) on [a, b] with doubly exponential clustering at both ends.
    TanhSinh { a: f64, b: f64 },
}

impl Map {
    /// Returns (x, dx/du); a zero Jacobian means the node contributes nothing.
    fn apply(self, u: f64) -> (f64, f64) {
        match self {
            Map::Identity => (u, 1.0),
            Map::TanhSinh { a, b } => {
                let w = b - a;
                let e = (-PI * u.sinh()).exp();
                let t = 1.0 / (1.0 + e);
                let tc = e / (1.0 + e);
                let x = if t < 0.5 { a + w * t } else { b - w * tc };
                let jac = w * PI * u.cosh() * t * tc;
                if x <= a || x >= b || !jac.is_finite() {
                    (x, 0.0)
                } else {
                    (x, jac)
                }
            }
        }
    }
}

struct Panel {
    lo: f64,
    hi: f64,
    map: Map,
    val: Vec<f64>,
    err: Vec<f64>,
    abs: Vec<f64>,
    splittable: bool,
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut e = err.abs();
    if resasc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / resasc).powf(1.5);
        e = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * resabs);
    }
    e
}

/// One 15/31-point Gauss-Kronrod panel for a vector integrand.
fn gk31(f: &dyn Fn(f64, &mut [f64]), dim: usize, lo: f64, hi: f64, map: Map) -> Result<Panel> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut fv = vec![0.0; 31 * dim];
    let mut buf = vec![0.0; dim];
    let mut eval = |u: f64, slot: usize, fv: &mut [f64]| -> Result<()> {
        let (x, jac) = map.apply(u);
        let out = &mut fv[slot * dim..(slot + 1) * dim];
        if jac == 0.0 {
            out.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        f(x, &mut buf);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b * jac;
            if !o.is_finite() {
                return Err(Error::Domain(format!("integrand is not finite at x = {x}")));
            }
        }
        Ok(())
    };
    // slot 0: center; slots 2j+1, 2j+2: center -/+ half*XGK[j]
    eval(center, 0, &mut fv)?;
    for j in 0..15 {
        eval(center - half * XGK[j], 2 * j + 1, &mut fv)?;
        eval(center + half * XGK[j], 2 * j + 2, &mut fv)?;
    }
    let mut val = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut abs = vec![0.0; dim];
    for c in 0..dim {
        let at = |slot: usize| fv[slot * dim + c];
        let fc = at(0);
        let mut resk = fc * WGK[15];
        let mut resg = fc * WG[7];
        let mut resabs = (fc * WGK[15]).abs();
        for j in 0..15 {
            let (f1, f2) = (at(2 * j + 1), at(2 * j + 2));
            resk += WGK[j] * (f1 + f2);
            resabs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * resk;
        let mut resasc = WGK[15] * (fc - mean).abs();
        for j in 0..15 {
            resasc += WGK[j] * ((at(2 * j + 1) - mean).abs() + (at(2 * j + 2) - mean).abs());
        }
        let h = half.abs();
        val[c] = resk * half;
        abs[c] = resabs * h;
        err[c] = rescale_error((resk - resg) * half, resabs * h, resasc * h);
    }
    let width_ok = (hi - lo).abs() > 1e-13 * center.abs().max(1e-300) && (hi - lo).abs() > 1e-300;
    Ok(Panel { lo, hi, map, val, err, abs, splittable: width_ok })
}

fn breakpoints(a: f64, b: f64, singular: &[f64]) -> Vec<(f64, f64, Map)> {
    let mut pts = vec![a, b];
    if a < 0.0 && 0.0 < b {
        pts.push(0.0);
    }
    for &s in singular {
        if a < s && s < b {
            pts.push(s);
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let is_sing = |x: f64| singular.iter().any(|&s| s == x);
    let ts = |lo: f64, hi: f64| (-TS_HALF_RANGE, TS_HALF_RANGE, Map::TanhSinh { a: lo, b: hi });
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (sl, sh) = (is_sing(lo), is_sing(hi));
        if !sl && !sh {
            out.push((lo, hi, Map::Identity));
            continue;
        }
        // keep the clustered map on a unit-length piece next to the singularity
        let reach = if sl && sh { 2.0 } else { 1.0 };
        if hi - lo <= 2.0 * reach {
            out.push(ts(lo, hi));
            continue;
        }
        if sl {
            out.push(ts(lo, lo + 1.0));
            lo += 1.0;
        }
        if sh {
            out.push(ts(hi - 1.0, hi));
            hi -= 1.0;
        }
        out.push((lo, hi, Map::Identity));
    }
    out
}

/// Integrates a vector-valued function over [a, b].
///
/// Component i is accepted once its error estimate is below
/// max(abs_tol, rel_tol * integral of |f_i|, 50 eps * integral of |f_i|).
pub fn integrate_vec(
    f: &dyn Fn(f64, &mut [f64]),
    dim: usize,
    a: f64,
    b: f64,
    singular: &[f64],
    opts: &QuadOptions,
) -> Result<VecQuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(VecQuadResult { values: vec![0.0; dim], abs_err: vec![0.0; dim], l1: vec![0.0; dim], subdivisions: 0 });
    }
    if a > b {
        let mut r = integrate_vec(f, dim, b, a, singular, opts)?;
        r.values.iter_mut().for_each(|v| *v = -*v);
        return Ok(r);
    }
    let mut panels = Vec::new();
    for (lo, hi, map) in breakpoints(a, b, singular) {
        panels.push(gk31(f, dim, lo, hi, map)?);
    }
    loop {
        let mut tot_err = vec![0.0; dim];
        let mut tot_abs = vec![0.0; dim];
        for p in &panels {
            for c in 0..dim {
                tot_err[c] += p.err[c];
                tot_abs[c] += p.abs[c];
            }
        }
        let tol: Vec<f64> = (0..dim)
            .map(|c| opts.abs_tol.max(opts.rel_tol * tot_abs[c]).max(60.0 * f64::EPSILON * tot_abs[c]))
            .collect();
        let done = (0..dim).all(|c| tot_err[c] <= tol[c]);
        let finish = |panels: &Vec<Panel>| {
            let mut values = vec![0.0; dim];
            for c in 0..dim {
                values[c] = crate::specfun::neumaier_sum(panels.iter().map(|p| p.val[c]));
            }
            VecQuadResult { values, abs_err: tot_err.clone(), l1: tot_abs.clone(), subdivisions: panels.len() }
        };
        if done {
            return Ok(finish(&panels));
        }
        // worst panel relative to the per-component tolerance
        let mut worst = None;
        let mut worst_score = 0.0;
        for (i, p) in panels.iter().enumerate() {
            if !p.splittable {
                continue;
            }
            let score = (0..dim)
                .filter(|&c| tot_err[c] > tol[c])
                .map(|c| p.err[c] / tol[c].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            if score > worst_score {
                worst_score = score;
                worst = Some(i);
            }
        }
        let Some(i) = worst else {
            // nothing left to refine: accept what the rule can resolve
            let worst_c = (0..dim).max_by(|&x, &y| (tot_err[x] / tol[x]).partial_cmp(&(tot_err[y] / tol[y])).unwrap()).unwrap();
            return Err(Error::NonConvergence { estimate: tot_err[worst_c], tol: tol[worst_c] });
        };
        if panels.len() >= opts.max_panels {
            let c = (0..dim).max_by(|&x, &y| (tot_err[x] / tol[x]).partial_cmp(&(tot_err[y] / tol[y])).unwrap()).unwrap();
            return Err(Error::NonConvergence { estimate: tot_err[c], tol: tol[c] });
        }
        let p = panels.swap_remove(i);
        let mid = 0.5 * (p.lo + p.hi);
        panels.push(gk31(f, dim, p.lo, mid, p.map)?);
        panels.push(gk31(f, dim, mid, p.hi, p.map)?);
    }
}

/// Finds where the envelope has dropped 40 decades below its sampled maximum.
pub fn truncation_point(log_env: &dyn Fn(f64) -> f64, a: f64, dir: Direction) -> Result<f64> {
    let d = dir.sign();
    let mut samples = Vec::new();
    let mut h = 1e-3;
    while h <= MAX_REACH {
        samples.push((h, log_env(a + d * h)));
        h *= 1.5;
    }
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, &(_, v)) in samples.iter().enumerate() {
        if v.is_finite() && v > best {
            best = v;
            arg = k;
        }
    }
    if best == f64::NEG_INFINITY {
        // integrand vanishes identically on the sampled range
        return Ok(a + d * 1e-3);
    }
    let cut = best - TAIL_DECADES * std::f64::consts::LN_10;
    samples[arg..]
        .iter()
        .find(|&&(_, v)| v < cut)
        .map(|&(h, _)| a + d * h)
        .ok_or(Error::EnvelopeNotDecaying)
}

/// Integrates a vector-valued function over [a, inf) or (-inf, a].
pub fn integrate_vec_semi_infinite(
    f: &dyn Fn(f64, &mut [f64]),
    dim: usize,
    a: f64,
    dir: Direction,
    log_env: &dyn Fn(f64) -> f64,
    singular: &[f64],
    opts: &QuadOptions,
) -> Result<VecQuadResult> {
    let t = truncation_point(log_env, a, dir)?;
    integrate_vec(f, dim, a.min(t), a.max(t), singular, opts)
}

fn scalar(f: &Integrand, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    let g = |x: f64, out: &mut [f64]| out[0] = (f.eval)(x);
    let r = integrate_vec(&g, 1, a, b, &f.singular_points, opts)?;
    Ok(QuadResult { value: r.values[0], abs_err_estimate: r.abs_err[0], subdivisions: r.subdivisions })
}

/// Integral over the finite interval [a, b] to absolute tolerance `tol`.
pub fn integrate(f: &Integrand, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    scalar(f, a, b, &QuadOptions::abs(tol))
}

/// Integral over [a, b] with explicit options.
pub fn integrate_with(f: &Integrand, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    scalar(f, a, b, opts)
}

/// Integral over [a, inf) or (-inf, a]; requires a log envelope.
pub fn integrate_semi_infinite(f: &Integrand, a: f64, dir: Direction, tol: f64) -> Result<QuadResult> {
    integrate_semi_infinite_with(f, a, dir, &QuadOptions::abs(tol))
}

pub fn integrate_semi_infinite_with(f: &Integrand, a: f64, dir: Direction, opts: &QuadOptions) -> Result<QuadResult> {
    let env = f
        .log_envelope
        .ok_or_else(|| Error::Domain("semi-infinite integration needs a log envelope".into()))?;
    let t = truncation_point(env, a, dir)?;
    scalar(f, a.min(t), a.max(t), opts)
}
