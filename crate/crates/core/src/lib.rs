//! Fixed-energy inverse scattering for the discrete Schrödinger operator on `Z^d`.

pub mod dn;
pub mod equivalence;
pub mod error;
pub mod geometry;
pub mod green;
pub mod lattice;
pub mod matrix;
pub mod quadrature;
pub mod reconstruction;
pub mod scattering;

pub use error::{Error, Result};
