//! Gaussian-process emulators for stochastic simulators and component-wise
//! validation against replicated out-of-sample runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod rng;

pub use error::{Error, Result};
pub use rng::RngStream;
pub mod data;
pub mod design;
pub mod diagnostics;
pub mod emulator;
pub mod simulators;
