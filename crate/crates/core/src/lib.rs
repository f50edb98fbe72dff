//! Design and simulation toolkit for robust fixed-time indirect model
//! reference adaptive control of unknown LTI systems.
//!
//! The pipeline: filter plant trajectories into a linear-regression form,
//! estimate the unknown dynamics with a fixed-time parameter law, certify a
//! homogeneous error-feedback design, then simulate the two-phase closed loop
//! (direct adaptive startup, indirect homogeneous control after the switch).

// Validation gates use `!(x > 0.0)` so NaN fails them; the suggested
// `x <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod controller;
pub mod design;
pub mod estimator;
pub mod excitation;
pub mod filters;
pub mod homogeneity;
pub mod linalg;
pub mod model;
pub mod sim;
pub mod verify;

use thiserror::Error;

/// Unified error type for design, configuration, and simulation failures.
#[derive(Debug, Error)]
pub enum Error {
    /// Structural misuse: wrong dimensions, invalid parameter ranges.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A design step has no solution or its certificate fails verification.
    #[error("design infeasible: {0}")]
    Infeasible(String),

    /// Numerical breakdown inside an otherwise valid computation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Configuration file rejected (schema, types, or value validation).
    #[error("bad config: {0}")]
    Config(String),

    /// Simulation produced a non-finite state.
    #[error("simulation diverged at t = {t:.6} (step {step})")]
    Diverged { t: f64, step: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
