//! Phase retrieval via linear programming in the natural parameter space.
//!
//! Recovers a real signal x0 (up to global sign) from magnitude-only
//! Gaussian measurements y_i = |<a_i, x0>| by maximizing <phi, x> over
//! the polytope {-y_i <= <a_i, x> <= y_i}, where phi is an anchor vector
//! from a spectral initializer. The crate bundles the LP solver, the
//! initializers, concentration-of-measure experiments, and a sweep
//! harness with reproducible seeded output.

pub mod error;
pub mod harness;
pub mod lpcore;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use model::{Ensemble, RecoveryMetric, Signal, SignalDist};
pub use spectral::{Anchor, AnchorMethod, EigResult};
pub use lpcore::{KktReport, LpInstance, LpSolution, LpStatus, OracleOutcome};
pub use theory::{AngleQuery, CertificateParams, CertificateReport, ConcentrationReport};
pub use harness::{SweepConfig, SweepResult, TrialConfig, TrialRecord};
