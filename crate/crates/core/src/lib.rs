//! Numerical workbench for the binary annihilation chain `A + A -> 0` and
//! its representations: master equation, exact stochastic simulation,
//! generating functions, factorial moments, the imaginary-noise SDE
//! `dphi = -phi^2 dt + i phi dW`, and distributional amplitudes.

pub mod distributional;
pub mod error;
pub mod genfunc;
pub mod io;
pub mod moments;
pub mod ode;
pub mod reaction;
pub mod rng;
pub mod runner;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
