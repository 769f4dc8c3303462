//! Closed-loop Volterra series estimation for scalar time series.
//!
//! A closed-loop Volterra model predicts the next value of a series as a
//! polynomial in its own `m` most recent values. Instead of materialising the
//! combinatorially large monomial basis, models are fitted in the reproducing
//! kernel Hilbert space of a polynomial kernel, so training reduces to a
//! regularised linear solve against the Gram matrix. The individual Volterra
//! operators (and, when the basis is small enough, their monomial
//! coefficients) can be recovered from the fitted dual weights afterwards.
//!
//! The crate covers the full workflow:
//!
//! - [`series`]: series containers and delay embedding,
//! - [`kernels`]: kernel evaluation, Gram matrices and explicit feature maps,
//! - [`solver`]: regularised fitting, prediction and operator recovery,
//! - [`selection`]: k-fold cross-validated hyperparameter search,
//! - [`kspa`]: Kolmogorov-Smirnov predictive accuracy tests on error samples,
//! - [`simulation`]: seeded process generators, baselines and the Monte-Carlo
//!   harness,
//! - [`metrics`]: RMSE and basis-dimension helpers.

pub mod error;
pub mod kernels;
pub mod kspa;
pub mod metrics;
pub mod selection;
pub mod series;
pub mod simulation;
pub mod solver;

pub use error::{Result, VolterraError};
pub use kernels::KernelSpec;
pub use series::{embed, ModelConfig, TimeSeries, TrajectoryMatrix};
pub use solver::{FitOptions, VolterraModel};
