pub mod cli;
pub mod error;
pub mod feynman_kac;
pub mod functionals;
pub mod geom;
pub mod growth;
pub mod kernels;
pub mod potentials;
pub mod quadrature;
pub mod real;
pub mod special;
pub mod sup;
pub mod verify;

pub use error::{BridgeError, Result};
