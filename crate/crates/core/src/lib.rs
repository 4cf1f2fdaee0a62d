//! Finite-volume solvers for self-organized hydrodynamics (SOH) with a
//! congestion constraint.
//!
//! The crate provides:
//!
//! - [`grid`]: periodic structured grids, model parameters and field storage.
//! - [`pressure`]: the singular congestion pressure and its explicit/implicit split.
//! - [`scheme`]: the asymptotic-preserving (AP) time stepper and an explicit
//!   Rusanov reference stepper.
//! - [`analysis`]: closed-form wave analysis used as test oracles.
//! - [`scenarios`]: initial data for the Riemann and cluster-collision runs,
//!   shock tracking and congestion measurements.
//! - [`twofluid`]: the two-species crowd model with its lane diagnostics.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod pressure;
pub mod scenarios;
pub mod scheme;
pub mod twofluid;

pub use error::{AnalysisError, GridError, PressureError, SchemeError};
pub use grid::{omega_of, wrap_index, FieldState, Grid, ModelParams, RHO_MIN};
pub use pressure::{PressureMode, PressureModel};
pub use scheme::{ap_step, conservative_step, explicit_step, relaxation_step, StepReport};
