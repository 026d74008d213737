//! Synthetic acoustic wave data and direct-sampling reconstruction of the
//! initial sources that produced it.
//!
//! The crate covers the full loop: define an analytic initial source, solve
//! the forward problem for near-field traces or far-field patterns, corrupt
//! the data with measured-SNR noise, move to the frequency domain, and map
//! the source back with sampling-type indicator functions that need no
//! iteration and no forward solves.

pub mod config;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod indicators;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod pipeline;
mod quadrature;
pub mod sources;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
