//! Particle smoothing engine for state-space models.
//!
//! The crate provides forward particle filters over a Feynman-Kac model
//! abstraction, the full family of backward kernels used by skeleton-based
//! smoothers (dense backward rows, genealogy tracking, sparse Monte Carlo
//! rows, independent Metropolis-Hastings moves and coupling-based kernels
//! for intractable transition densities), instrumented rejection samplers,
//! generic offline and online smoothers, Gaussian and Euler-scheme couplers,
//! exact linear-Gaussian oracles, and an experiment harness that writes
//! reproducible CSV/JSON result files.
//!
//! Start with the `examples/` directory: each example is a runnable tour of
//! one capability. The `smcsmooth` binary drives the experiment harness from
//! a TOML config.

pub mod backward;
pub mod bench;
pub mod cost;
pub mod coupling;
pub mod error;
pub mod fk;
pub mod hilbert;
pub mod models;
pub mod numeric;
pub mod resample;
pub mod rng;
pub mod sampler;
pub mod smoother;

pub use error::{Result, SmcError};
