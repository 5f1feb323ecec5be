//! Information loss and information loss rates of piecewise bijective
//! functions applied to stationary processes.
//!
//! The building blocks are [`pbf::PiecewiseFunction`] (the system),
//! [`process::StationaryProcess`] (the input), the numerical estimators in
//! [`estimate`], the Markov-output check in [`lumpability`], and the loss
//! quantities in [`lossrate`] and [`relloss`]. [`cli`] wires them into the
//! `infoloss` binary.

pub mod cli;
pub mod error;
pub mod estimate;
pub mod lossrate;
pub mod lumpability;
pub mod pbf;
pub mod process;
pub mod relloss;

pub use error::{Error, Result};
