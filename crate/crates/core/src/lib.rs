//! Forecasting toolkit for high-dimensional time series that regenerate
//! every day.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] turns raw floating-car logs into a [`DayTensor`] of
//!   per-slot speeds, imputes missing cells and splits by whole days.
//! * [`solver`] holds the penalized least-squares engines (coordinate
//!   descent for lasso / elastic net, block coordinate descent for the
//!   column-grouped lasso) and the day-fold cross-validation of λ.
//! * [`varmodel`] assembles per-line solutions into a daily VAR predictor
//!   `b_t + A W_{t-1}`, plus baselines and moment-based oracles.
//! * [`regime`] fits two-regime predictors and locates the switch by
//!   cross-validated risk.
//! * [`simgen`] is the seeded synthetic benchmark generator.
//! * [`analysis`] has metrics, support-recovery scores, the influence
//!   criterion and graph exports.

pub mod analysis;
pub mod dataset;
pub mod linalg;
pub mod regime;
pub mod simgen;
pub mod solver;
pub mod varmodel;

pub use dataset::DayTensor;
pub use linalg::{SparseMatrix, SparseVector};
pub use regime::{RiskCurve, SwitchPredictor};
pub use simgen::{GeneratorSpec, GeneratorTruth};
pub use solver::{Penalty, PenaltyFamily, SolverConfig};
pub use varmodel::{DayPredictor, LinearPredictor};
