//! Weak-measurement statistics for finite-dimensional quantum systems.
//!
//! Weak values, transient (post-selected) density operators, weak conditional
//! quasi-probabilities and conditional uncertainties, together with a Monte
//! Carlo von Neumann pointer simulator and linear-inversion tomography of the
//! transient operator.

pub mod cli;
pub mod error;
pub mod exec;
pub mod numerics;
pub mod simulator;
pub mod states;
pub mod tomography;
pub mod uncertainty;
pub mod weak;

pub use error::{Error, Result};
