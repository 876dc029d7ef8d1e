//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by model validation, estimation, bounding, and sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model (or one of its cells) violates a structural invariant.
    /// `path` points at the offending field, e.g. `cells[2].u_probs`.
    InvalidModel { path: String, reason: String },
    /// Cell id outside `0..cell_count`.
    CellOutOfRange { cell: usize, cell_count: usize },
    /// Regime length does not match the model or dataset cell count.
    RegimeLengthMismatch { expected: usize, got: usize },
    /// An instrument-strength value too close to zero for a weighted
    /// objective to be evaluated.
    WeakInstrument { cell: usize, strength: f64 },
    /// Requested an empty sample.
    EmptySample,
    /// A dataset row violates the record domain (`z`, `a` in `{-1, 1}`,
    /// finite `y`, `l` within range).
    InvalidRecord { row: usize, reason: String },
    /// A cell lacks adequate rows in one instrument arm.
    MissingArm { cell: usize, arm: i8 },
    /// Bounds require a binary outcome; a row carried something else.
    NonBinaryOutcome { row: usize, value: f64 },
    /// Observed cell frequencies are inconsistent with every latent
    /// response-type distribution.
    Infeasible { cell: usize, residual: f64 },
    /// A perturbation would push a probability outside `[0, 1]` or has no
    /// degree of freedom to act on.
    InvalidPerturbation { path: String, reason: String },
    /// An argument outside an operation's domain (zero `n`, empty grid,
    /// non-positive tolerance, ...).
    InvalidArgument { reason: String },
    /// The solver exceeded its iteration budget or lost rank.
    NumericalFailure { detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidModel { path, reason } => write!(f, "invalid model at {path}: {reason}"),
            Error::CellOutOfRange { cell, cell_count } => {
                write!(f, "cell id {cell} out of range (cell count {cell_count})")
            }
            Error::RegimeLengthMismatch { expected, got } => {
                write!(f, "regime length {got} does not match cell count {expected}")
            }
            Error::WeakInstrument { cell, strength } => {
                write!(f, "instrument too weak in cell {cell}: strength {strength:e}")
            }
            Error::EmptySample => write!(f, "sample size must be at least 1"),
            Error::InvalidRecord { row, reason } => write!(f, "invalid record {row}: {reason}"),
            Error::MissingArm { cell, arm } => {
                write!(f, "cell {cell} has too few rows in instrument arm {arm}")
            }
            Error::NonBinaryOutcome { row, value } => {
                write!(f, "row {row}: outcome {value} is not binary")
            }
            Error::Infeasible { cell, residual } => write!(
                f,
                "cell {cell}: observed frequencies are infeasible (residual {residual:e})"
            ),
            Error::InvalidPerturbation { path, reason } => {
                write!(f, "invalid perturbation at {path}: {reason}")
            }
            Error::InvalidArgument { reason } => write!(f, "invalid argument: {reason}"),
            Error::NumericalFailure { detail } => write!(f, "numerical failure: {detail}"),
        }
    }
}

impl core::error::Error for Error {}
