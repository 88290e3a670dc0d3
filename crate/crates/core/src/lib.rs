//! Simulation library for flocking-coupled asynchronous stochastic gradient
//! optimization, with a centralized N-sample-average baseline, closed-form
//! cohesion/convergence bound calculators, a real multithreaded runtime, and
//! a continuum-limit (SDE + Gibbs) verification lab.
//!
//! The main entry points are [`config::preset`] / [`config::ExperimentConfig`]
//! to describe an experiment, [`engine::run`] or [`analysis::ensemble`] to
//! produce traces, and [`analysis::bound_report`] for the closed-form bounds.

// Validation deliberately writes `!(x > 0.0)` so NaN parameters fail too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod csv_io;
pub mod engine;
mod error;
mod linalg;
pub mod objective;
pub mod parallel;
pub mod potential;
pub mod sde;
pub mod stochastic;
pub mod topology;

pub use analysis::{bound_report, ensemble, BoundReport, EnsembleStats};
pub use config::{preset, EngineKind, ExperimentConfig, Mode, PRESET_NAMES};
pub use engine::{run, run_experiment, Trace};
pub use error::{Error, Result};
pub use objective::Objective;
pub use potential::Potential;
pub use topology::Graph;
