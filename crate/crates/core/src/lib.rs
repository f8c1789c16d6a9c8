//! Data pruning by constraint data-value maximization (CDVM).
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! - [`dataset`]: synthetic clustered classification data and deterministic toy learners.
//! - [`games`]: cooperative games over training points, including the analytic
//!   clustered-utility game.
//! - [`semivalues`]: leave-one-out, exact and sampled Shapley, exact Banzhaf, out-of-bag
//!   values and the closed-form cluster values.
//! - [`attribution`]: maximum-sample-reuse estimation of the train x validation
//!   attribution matrix and its sparse storage.
//! - [`cdvm`]: the pruning linear program, its bounded-variable simplex solver,
//!   top-S rounding, the default slack threshold and grid search.
//! - [`bench`]: removal curves, retention-level evaluation, overlap and frequency analysis.
//!
//! All randomness is derived from a master seed through [`rng::derive_seed`], so
//! parallel and serial runs produce identical results.

pub mod attribution;
pub mod bench;
pub mod cdvm;
pub mod dataset;
pub mod error;
pub mod games;
pub mod rng;
pub mod semivalues;

pub use error::{Error, Result};
