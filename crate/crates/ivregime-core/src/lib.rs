//! Individualized treatment regimes under treatment endogeneity with a
//! binary instrument.
//!
//! The crate is organized around a latent-confounder structural model over
//! finite covariate cells and the quantities it induces:
//!
//! * [`model`] — the structural model itself, exact (enumeration-based)
//!   population objectives, regime values, and assumption diagnostics;
//! * [`sampler`] — seeded, platform-independent generation of observed
//!   `(l, z, a, y)` records from a model;
//! * [`estimator`] — plug-in nuisance estimation and regime selection from
//!   observed data alone;
//! * [`bounds`] — sharp partial-identification bounds on counterfactual
//!   means via linear programming over canonical response types, and the
//!   regime maximizing the lower value bound;
//! * [`analysis`] — the binary-latent-type covariance algebra, regret
//!   experiments against simulation ground truth, and misspecification
//!   sweeps.
//!
//! Everything here is pure computation over immutable inputs: the crate is
//! `no_std` (with `alloc`) and all randomness flows from caller-provided
//! seeds through a fixed counter-based mixing function, so results are
//! reproducible bit-for-bit across platforms and thread schedules. File
//! formats and the command-line front end live in the companion
//! `ivregime-cli` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod estimator;
pub mod model;
pub mod sampler;
mod simplex;

pub use error::Error;
pub use model::{AssumptionReport, CellSpec, Objective, Regime, StructuralModel};
pub use sampler::{Dataset, ObservedRow};

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
