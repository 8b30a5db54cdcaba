//! Boundary-only neural operators trained against a Monte-Carlo
//! boundary-integral loss, with classical reference solvers.

pub mod autodiff;
pub mod bie;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod geometry;
pub mod gradcheck;
pub mod kernels;
pub mod operator_net;
pub mod oracles;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
