//! Real-eigenvalue statistics of asymmetric Wishart matrices.
//!
//! The crate covers the exact finite-N Pfaffian kernel of the real eigenvalues,
//! its decomposition through the complex-ensemble kernel, the large-N limiting
//! densities and counting coefficients, and a Monte Carlo sampler used to
//! validate all of them.

pub mod complex_kernel;
pub mod decomposition;
pub mod ensemble_mc;
pub mod error;
pub mod limits;
pub mod params;
pub mod quad;
pub mod sop_kernel;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
pub use params::{EnsembleParams, Regime};
