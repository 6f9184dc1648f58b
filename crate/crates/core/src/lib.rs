//! Dynamic security assessment workbench.
//!
//! The crate covers the full offline pipeline for PMU-based security
//! classification of a transmission network:
//!
//! - [`network`]: network data model, admittance matrices and Newton-Raphson
//!   power flow.
//! - [`scenario`]: seasonal load profiles, operating conditions, N-k
//!   contingencies and solar replacement.
//! - [`dynamics`]: classical multi-machine transient simulation sampled at
//!   30 Hz.
//! - [`security`]: transient stability index and short-term voltage criterion.
//! - [`pmu`]: optimal PMU placement, measurement windows and additive error
//!   injection.
//! - [`ml`]: CART, random forest, RBF-kernel SVM and SELU multilayer
//!   perceptron written from scratch, plus splitting, cross-validation and
//!   confidence intervals.
//! - [`pipeline`]: dataset generation, the error-sweep experiment and report
//!   rendering used by the `dsa` command line tool.

pub mod dynamics;
pub mod error;
pub mod ml;
pub mod network;
pub mod pipeline;
pub mod pmu;
pub mod scenario;
pub mod security;
pub mod seed;

pub use error::{Error, Result};
