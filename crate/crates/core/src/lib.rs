//! Inclusion detection for the 2D acoustic wave equation from boundary measurements.
//!
//! The crate simulates the Neumann-to-Dirichlet map of a wave speed with an
//! embedded fast inclusion, recovers volumes of domains of influence from it by
//! regularised boundary control, and turns those volumes into boundary
//! distances to the inclusion, its boundary distance hull and direction
//! segments. A fast-marching geometry module provides the ground truth.

pub mod cli;
pub mod control;
pub mod detect;
pub mod error;
pub mod fixtures;
pub mod forward;
pub mod geometry;
pub mod io;

pub use error::{Error, Result};
