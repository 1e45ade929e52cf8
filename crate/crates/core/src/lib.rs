//! Numerical laboratory for the hydrodynamic limit of a kinetic-fluid system
//! under strong local alignment.
//!
//! The crate is organised bottom-up: [`grid`] and [`poisson`] supply the
//! discretisation, [`kinetic`], [`fluid`] and [`limit`] the three solvers,
//! [`entropy`] the monitored functionals and [`harness`] the coupled runs
//! and ε sweeps. [`cli`] wraps everything behind a flat config file.

pub mod cli;
pub mod entropy;
pub mod error;
pub mod fluid;
pub mod grid;
pub mod harness;
pub mod kinetic;
pub mod limit;
pub mod poisson;

pub use error::{Error, Result};
pub use grid::PhaseGrid;
