//! Randomised tests for the strict stationarity of first-order random
//! coefficient autoregressions,
//!
//! ```text
//! X_t = (phi + b_t) X_{t-1} + e_t,
//! ```
//!
//! that remain valid under heavy tails (infinite variance, even infinite
//! mean) and nest the plain AR(1) case (`b_t = 0`).
//!
//! The crate is organised bottom-up:
//!
//! - [`rngdist`]: counter-based random streams and the error/randomisation laws.
//! - [`dgp`]: path simulation and regime classification via `E ln|phi + b_0|`.
//! - [`stat`]: the scale-invariant diagnostic `D_T` and data preprocessing.
//! - [`rtest`]: the randomised statistic `Theta`, both null orientations, and
//!   the strong decision rule.
//! - [`mc`]: a parallel Monte Carlo harness over scenario grids.

pub mod dgp;
pub mod error;
pub mod mc;
mod quad;
pub mod rngdist;
pub mod rtest;
mod serde_float;
pub mod series;
pub mod stat;

pub use dgp::{RcarParams, Regime, RegimeLabel};
pub use error::{Error, Result};
pub use rngdist::{Dist, RngStream};
pub use rtest::{Decision, DecisionReport, NullHypothesis, TestConfig, TestOutcome};
pub use series::TimeSeries;
pub use stat::{DiagnosticConfig, DiagnosticResult, Preprocess};
