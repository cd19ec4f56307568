//! Simulator and rate-analysis toolkit for a cavity-QED quantum repeater built
//! on coherent light pulses, atom-controlled displacements and gate-free
//! purification and swapping.
//!
//! The crate is layered bottom-up:
//!
//! - [`qmat`]: dense density-operator algebra on explicit tensor-product spaces.
//! - [`field`]: exact coherent-state branch algebra for the optical pulse.
//! - [`distribution`]: heralded two-atom and four-atom entanglement.
//! - [`purification`]: XY-ring purification of a distributed pair.
//! - [`swapping`]: conventional and XX-dynamical entanglement swapping, chains.
//! - [`effective`]: full atom-cavity-laser dynamics vs. effective Hamiltonians.
//! - [`planner`]: success probabilities, repeater rates and dataset emission.
//! - [`cli`]: command-line orchestration.

pub mod cli;
pub mod distribution;
pub mod effective;
mod error;
pub mod field;
pub mod planner;
pub mod purification;
pub mod qmat;
pub mod swapping;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
