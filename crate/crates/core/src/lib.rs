//! Geodesics and harmonic maps into a Riemannian target equipped with a metric
//! connection with torsion `∇ = ∇^LC + A`, plus numerical checks of the
//! identities these objects satisfy.

pub mod error;
pub mod field;
pub mod geodesic;
pub mod geometry;
pub mod io;
pub mod jacobi;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
