//! Hall conductance of gapped lattice fermion systems.

pub mod block;
pub mod conductance;
pub mod config;
pub mod error;
pub mod fock;
pub mod interaction;
pub mod lattice;
pub mod lga;
pub mod linalg;
pub mod models;
pub mod neass;
pub mod odmap;
pub mod properties;
pub mod report;
pub mod run;
pub mod spectral;
pub mod weightfn;

pub use error::{Error, Result};
