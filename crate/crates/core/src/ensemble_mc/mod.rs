//! Monte Carlo sampling of the matrix model and statistics of its real eigenvalues.

mod sample;
pub mod schur;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::limits::DensityCurve;
use crate::params::EnsembleParams;
use crate::quad::{integrate_with, Integrand, QuadOptions};

pub use sample::{sample_matrix, trial_rng};

/// Cross-check threshold for the optional imaginary-part classification.
pub const IMAG_THRESHOLD: f64 = 1e-9;

/// Real-eigenvalue statistics of a batch of independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBatch {
    pub params: EnsembleParams,
    pub seed: u64,
    pub trials: usize,
    pub real_counts: Vec<usize>,
    /// Real eigenvalues of all trials, in trial order.
    pub pooled_reals: Vec<f64>,
}

impl TrialBatch {
    pub fn mean_count(&self) -> f64 {
        self.real_counts.iter().sum::<usize>() as f64 / self.trials as f64
    }

    /// Standard error of the mean count.
    pub fn stderr_count(&self) -> f64 {
        let m = self.mean_count();
        let k = self.trials as f64;
        if self.trials < 2 {
            return f64::NAN;
        }
        let var = self.real_counts.iter().map(|&c| (c as f64 - m).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    }
}

/// All eigenvalues of one sampled matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub trial: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Spectrum {
    pub fn reals(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).filter(|(_, i)| **i == 0.0).map(|(r, _)| *r).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Bin masses sum to one (over all pooled reals, including any outside the edges).
    Density,
    /// Mean number of real eigenvalues per matrix in each bin.
    CountPerMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    pub normalization: Normalization,
    /// Mass that fell outside the edges.
    pub outside: f64,
}

/// Real eigenvalues of `x`, read off from the converged 1x1 and real 2x2 blocks.
pub fn real_eigenvalues(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (re, im) = schur::eigenvalues(x).ok_or(Error::EigenNonConvergence { seed: 0, trial: 0 })?;
    Ok(re.iter().zip(&im).filter(|(_, i)| **i == 0.0).map(|(r, _)| *r).collect())
}

/// Real eigenvalues by the threshold |Im| <= 1e-9 (1 + |lambda|); only for solver cross-checks.
pub fn real_eigenvalues_threshold(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (re, im) = schur::eigenvalues(x).ok_or(Error::EigenNonConvergence { seed: 0, trial: 0 })?;
    Ok(re.iter().zip(&im).filter(|(r, i)| i.abs() <= IMAG_THRESHOLD * (1.0 + r.abs())).map(|(r, _)| *r).collect())
}

fn one_trial(params: &EnsembleParams, seed: u64, trial: usize) -> Result<Spectrum> {
    let mut rng = trial_rng(seed, trial as u64);
    let x = sample_matrix(params, &mut rng)?;
    let (re, im) = schur::eigenvalues(&x).ok_or(Error::EigenNonConvergence { seed, trial: trial as u64 })?;
    Ok(Spectrum { trial, re, im })
}

/// Full spectra of `trials` independent matrices, ordered by trial index.
pub fn sample_spectra(params: &EnsembleParams, trials: usize, seed: u64) -> Result<Vec<Spectrum>> {
    params.validate()?;
    params.nu_integer()?;
    (0..trials).into_par_iter().map(|t| one_trial(params, seed, t)).collect()
}

/// Counts and pooled real eigenvalues over `trials` independent matrices.
pub fn run_trials(params: &EnsembleParams, trials: usize, seed: u64) -> Result<TrialBatch> {
    if trials == 0 {
        return Err(Error::EmptyBatch);
    }
    params.validate()?;
    params.nu_integer()?;
    let reals: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| one_trial(params, seed, t).map(|s| s.reals()))
        .collect::<Result<_>>()?;
    Ok(TrialBatch {
        params: *params,
        seed,
        trials,
        real_counts: reals.iter().map(Vec::len).collect(),
        pooled_reals: reals.into_iter().flatten().collect(),
    })
}

/// Histogram of the pooled reals on the given sorted edges.
pub fn histogram_on(batch: &TrialBatch, edges: &[f64], normalization: Normalization) -> Result<Histogram> {
    if batch.pooled_reals.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams("histogram edges must be strictly increasing".into()));
    }
    let nb = edges.len() - 1;
    let mut counts = vec![0usize; nb];
    let mut outside = 0usize;
    for &x in &batch.pooled_reals {
        if x < edges[0] || x > edges[nb] {
            outside += 1;
            continue;
        }
        let k = edges.partition_point(|e| *e <= x).saturating_sub(1).min(nb - 1);
        counts[k] += 1;
    }
    let denom = match normalization {
        Normalization::Density => batch.pooled_reals.len() as f64,
        Normalization::CountPerMatrix => batch.trials as f64,
    };
    Ok(Histogram {
        edges: edges.to_vec(),
        masses: counts.iter().map(|&c| c as f64 / denom).collect(),
        normalization,
        outside: outside as f64 / denom,
    })
}

/// Density-normalised histogram with `bins` equal bins spanning the pooled reals.
pub fn histogram_density(batch: &TrialBatch, bins: usize) -> Result<Histogram> {
    let lo = batch.pooled_reals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = batch.pooled_reals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return Err(Error::EmptyBatch);
    }
    let bins = bins.max(1);
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
    histogram_on(batch, &edges, Normalization::Density)
}

fn interpolate(curve: &DensityCurve, x: f64) -> f64 {
    let g = &curve.grid;
    if g.is_empty() || x < g[0] || x > g[g.len() - 1] {
        return 0.0;
    }
    let k = g.partition_point(|v| *v <= x).clamp(1, g.len() - 1);
    let (x0, x1) = (g[k - 1], g[k]);
    let (y0, y1) = (curve.values[k - 1], curve.values[k]);
    let (y0, y1) = (if y0.is_finite() { y0 } else { y1 }, if y1.is_finite() { y1 } else { y0 });
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// L1 distance between a density histogram and a sampled curve evaluated at the bin midpoints.
pub fn l1_distance(h: &Histogram, curve: &DensityCurve) -> f64 {
    let mut d = h.outside;
    for (k, m) in h.masses.iter().enumerate() {
        let (a, b) = (h.edges[k], h.edges[k + 1]);
        d += (m - interpolate(curve, 0.5 * (a + b)) * (b - a)).abs();
    }
    d
}

/// L1 distance between a density histogram and a density function, with bin masses integrated exactly.
///
/// `singular` lists points where the density may be infinite but integrable.
pub fn l1_distance_exact(h: &Histogram, density: &dyn Fn(f64) -> f64, singular: &[f64]) -> Result<f64> {
    let mut d = h.outside;
    for (k, m) in h.masses.iter().enumerate() {
        let (a, b) = (h.edges[k], h.edges[k + 1]);
        let mut f = Integrand::new(density);
        for &s in singular.iter().filter(|s| **s >= a && **s <= b) {
            f = f.with_singular(s);
        }
        let mass = integrate_with(&f, a, b, &QuadOptions::abs(1e-10))?.value;
        d += (m - mass).abs();
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_mean() {
        let params = EnsembleParams::strong(6, 2.0, 0.4).unwrap();
        let trials = 1000;
        let traces: Vec<f64> = (0..trials)
            .map(|t| sample_matrix(&params, &mut trial_rng(11, t)).unwrap().trace())
            .collect();
        let m = traces.iter().sum::<f64>() / trials as f64;
        let sd = (traces.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (trials as f64 - 1.0)).sqrt();
        let expect = 0.4 * (6.0 + 2.0);
        assert!((m - expect).abs() < 3.0 * sd / (trials as f64).sqrt(), "{m} {expect}");
    }

    #[test]
    fn determinism_and_parity() {
        let params = EnsembleParams::strong(10, 1.0, 0.5).unwrap();
        let a = run_trials(&params, 30, 5).unwrap();
        let b = run_trials(&params, 30, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.real_counts.iter().all(|c| c % 2 == 0 && *c <= 10));
        let c = run_trials(&params, 30, 6).unwrap();
        assert_ne!(a.pooled_reals, c.pooled_reals);
        let m1 = sample_matrix(&params, &mut trial_rng(3, 4)).unwrap();
        let m2 = sample_matrix(&params, &mut trial_rng(3, 4)).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn near_symmetric_is_mostly_real() {
        let params = EnsembleParams::strong(20, 0.0, 0.9999).unwrap();
        let b = run_trials(&params, 20, 1).unwrap();
        assert!(b.mean_count() >= 0.95 * 20.0);
    }

    #[test]
    fn classification_agrees_with_threshold() {
        let params = EnsembleParams::strong(30, 3.0, 0.3).unwrap();
        for t in 0..10 {
            let x = sample_matrix(&params, &mut trial_rng(2, t)).unwrap();
            assert_eq!(real_eigenvalues(&x).unwrap().len(), real_eigenvalues_threshold(&x).unwrap().len());
        }
    }

    #[test]
    fn histogram_masses() {
        let params = EnsembleParams::strong(12, 0.0, 0.5).unwrap();
        let b = run_trials(&params, 50, 9).unwrap();
        let h = histogram_density(&b, 7).unwrap();
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let empty = TrialBatch { pooled_reals: vec![], ..b.clone() };
        assert!(matches!(histogram_density(&empty, 4), Err(Error::EmptyBatch)));
        assert!(run_trials(&params, 0, 1).is_err());
    }

    #[test]
    fn l1_of_a_flat_histogram() {
        let h = Histogram { edges: vec![0.0, 0.5, 1.0], masses: vec![0.5, 0.5], normalization: Normalization::Density, outside: 0.0 };
        let curve = DensityCurve { grid: vec![0.0, 1.0], values: vec![1.0, 1.0], total_mass: 1.0, label: "flat".into() };
        assert!(l1_distance(&h, &curve) < 1e-15);
        assert!(l1_distance_exact(&h, &|_| 1.0, &[]).unwrap() < 1e-12);
    }
}
