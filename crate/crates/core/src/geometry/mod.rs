//! Target-manifold geometry: charts, torsion endomorphisms, Cartan decomposition
//! and curvature.

pub mod chart;
pub mod curvature;
pub mod decompose;
pub mod torsion;

pub use chart::Chart;
pub use curvature::{curvature, curvature_relation, sectional, Connection, CurvatureTensor};
pub use decompose::{cartan_decompose, tensor_inner, TorsionDecomposition};
pub use torsion::{lc_derivative, torsion_tensor, Stencil, TorsionCoeffs, TorsionField};
