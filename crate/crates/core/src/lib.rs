//! Spectral simulation of nonlinear Schrödinger equations of convolution
//! type on the circle, Hofer-norm estimates, Floer strips by continuation in
//! the cut-off parameter, and fixed points of the projectivized time-one map.

pub mod config;
pub mod error;
pub mod experiment;
pub mod fixedpoint;
pub mod floer;
pub mod flow;
pub mod hamiltonian;
mod linalg;
pub mod par;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
