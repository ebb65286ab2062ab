//! Simulation engine for adiabatic passage through degenerate dark states
//! on networks of fiber-coupled atom–cavity nodes.

pub mod darkstates;
pub mod error;
pub mod evolve;
pub mod hamiltonian;
pub mod lattice;
pub mod protocol;
pub mod sector;
pub mod target;

pub use error::{Error, Result};
