//! Sigmoidal bounded-confidence opinion dynamics on graphs with zealots.
//!
//! Nodes hold real opinions. Zealots are pinned; every other node moves toward the
//! weighted mean of its neighbors, where a neighbor at distance `d` carries weight
//! `1 / (1 + exp(-gamma (delta - d^2)))`. The crate simulates the flow, finds and
//! classifies its steady states, and evaluates closed-form stability results for
//! paths and balanced-exposure graphs.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod integrate;
pub mod ode;
pub mod reduced;
pub mod spectral;
pub mod steady;

pub use dynamics::{influence, omega, residual, velocity, ModelParams, OpinionState};
pub use error::{Error, Result};
pub use graph::Graph;
pub use integrate::{integrate, IntegrationOptions, Trajectory};
pub use ode::StepControl;
pub use spectral::{eigen_report, jacobian, Classification, JacobianDecomposition, SpectralReport};
