//! Recursive reconstruction of sparse signal sequences with slowly changing
//! supports: signal generation, sensing, partial-support l1 recovery,
//! sufficient-condition checking and experiment harness.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod l1_solver;
pub mod recovery;
pub mod rng;
pub mod sensing;
pub mod signal_model;

pub use error::{Error, Result};
