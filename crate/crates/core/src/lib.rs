//! Classical simulation and verification toolkit for divide-and-conquer
//! ground-state preparation on binary-tree Hamiltonians.

pub mod bounds;
pub mod entanglement;
pub mod error;
pub mod experiments;
pub mod fermion;
pub mod fmt;
pub mod linalg;
pub mod operator;
pub mod prep;
pub mod spectra;
pub mod tree;

pub use error::{Error, Result};
pub use operator::{OperatorSum, Pauli, PauliString, PauliTerm, StateVector, C64};
