//! Sequential Bayesian parameter estimation with ensemble Kalman filters and
//! sequential Monte Carlo samplers whose forward kernel is an EnKF update.
//!
//! The crate is organised bottom-up:
//!
//! - [`gaussmath`]: dense Cholesky machinery and multivariate normals.
//! - [`model`]: forward models `G_t`, priors, the RK4 integrator and the
//!   Bernoulli, Lorenz 63, ERK pathway and linear-Gaussian benchmarks.
//! - [`enkf`]: the artificial-dynamics EnKF for static parameters.
//! - [`smcs`]: EnKF-SMCS (exact weights every step) and EnKF-SMCS-WR
//!   (approximate weights with occasional exact refinement).
//! - [`experiments`]: configuration, persistence and seed sweeps behind the CLI.
//!
//! Per-particle work runs on rayon when the `parallel` feature is enabled
//! (the default). Every particle draws from its own counter-based random
//! stream, so results are bitwise identical with or without the feature.

pub mod enkf;
pub mod error;
pub mod experiments;
pub mod gaussmath;
pub mod model;
pub mod parallel;
pub mod record;
pub mod rng;
pub mod smcs;

pub use error::{Error, Result};
pub use gaussmath::{GaussianDist, Matrix, Vector};
pub use model::{ForwardModel, ObservationRecord, PriorSpec};
pub use record::RunRecord;
pub use smcs::{Algorithm, SmcsConfig};
