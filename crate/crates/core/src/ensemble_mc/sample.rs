use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::params::EnsembleParams;

/// The generator for one trial: the seed fixes the key, the trial index picks the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// X = X_+ X_-^T with X_pm = sqrt(1+tau) P +- sqrt(1-tau) Q and P, Q of size N x (N+nu),
/// entries iid normal with variance 1/(2N).
pub fn sample_matrix<R: Rng>(params: &EnsembleParams, rng: &mut R) -> Result<DMatrix<f64>> {
    params.validate()?;
    let n = params.n;
    let cols = n + params.nu_integer()?;
    let sigma = (0.5 / n as f64).sqrt();
    let draw = |rng: &mut R| DMatrix::<f64>::from_fn(n, cols, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    let p = draw(rng);
    let q = draw(rng);
    let (a, b) = ((1.0 + params.tau).sqrt(), (1.0 - params.tau).sqrt());
    let xp = &p * a + &q * b;
    let xm = &p * a - &q * b;
    Ok(xp * xm.transpose())
}
