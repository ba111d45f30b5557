//! Random walks in a one-dimensional i.i.d. random environment in the
//! sub-ballistic regime.
//!
//! The crate is organised bottom-up:
//!
//! * [`env_model`]: environment laws, sampling, the moment generating function of
//!   `log rho` and the tail exponent `kappa`.
//! * [`potential`]: the potential `V`, ladder epochs, excursions and deep valleys.
//! * [`quenched`]: exact quenched formulas on finite chains, Doob h-transforms, a
//!   linear-solve oracle and walk samplers.
//! * [`constants`]: Kesten, Iglehart and Feller constants and the limit-law scale.
//! * [`stable`]: positive stable variables and the inverse stable subordinator.
//! * [`experiments`]: reproducible Monte Carlo drivers, manifests and reports.

pub mod constants;
pub mod env_model;
mod error;
pub mod experiments;
pub mod potential;
pub mod quenched;
pub mod rng;
pub mod special;
pub mod stable;
pub mod stats;

pub use error::{Error, Result, Side};
