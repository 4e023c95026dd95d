//! Joint activity detection and channel estimation (JADE) for massive
//! machine-type access, posed as structured group-sparse recovery.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] draws synthetic instances `Y = QΘ₀ + N` and maps the complex
//!   model onto its real embedding.
//! * [`statdim`] evaluates statistical-dimension bounds for the group norm and
//!   its smoothed variant, and turns them into sequence-length predictions.
//! * [`solvers`] holds the smoothed dual first-order method and a projected
//!   gradient reference solver for the norm-constrained least-squares problem.
//! * [`detect`] thresholds estimates into activity decisions and computes the
//!   error metrics.
//! * [`harness`] runs seeded Monte Carlo sweeps and writes CSV.
//! * [`instance`] reads and writes plain-text problem instances.

// `!(x >= 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detect;
pub mod error;
pub mod harness;
pub mod instance;
pub mod linalg;
pub mod model;
pub mod solvers;
pub mod statdim;

pub use error::{Error, Result};
pub use model::{ComplexMatrix, GroundTruth, Observation, RealMatrix, SystemConfig};
pub use solvers::{Estimate, SolverOptions, ZStepVariant};
pub use statdim::{NoisyPrediction, StatDimResult, TransitionPrediction};
