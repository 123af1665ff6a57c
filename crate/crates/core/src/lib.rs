//! Phase-space stochastic simulation of the degenerate optical parametric
//! oscillator.
//!
//! Three representations are integrated with the explicit Euler scheme:
//!
//! * **positive-W**: stochastic difference equations in a doubled phase space
//!   whose increments carry, besides drift and Gaussian diffusion, non-Gaussian
//!   σ noises scaled by Δt^{1/3} that reproduce the third-order derivative
//!   terms of the Wigner equation ([`noise::draw_sigma`]);
//! * **positive-P**: the usual Itô SDEs with diffusion κβ;
//! * **truncated Wigner**: the Wigner equation with the third-order terms
//!   dropped.
//!
//! [`oracle`] integrates the Lindblad master equation in a truncated Fock
//! space and serves as independent ground truth for all three.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod integrators;
pub mod io;
pub mod model;
pub mod noise;
pub mod oracle;

pub use error::{Error, Result};
pub use model::{Branch, ModelParams, PhasePoint};
