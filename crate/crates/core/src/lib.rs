//! Deformation retractions toward well-rounded lattices and toward the thick
//! part and systole spine of genus-2 Teichmüller space.

pub mod cli;
pub mod dirichlet;
pub mod error;
pub mod exec;
mod gluing;
pub mod lattice;
pub mod lattice_retract;
pub mod hyperbolic;
pub mod spectrum;
pub mod surface;
pub mod word;

pub use error::{Error, Result};
pub use exec::Execution;
