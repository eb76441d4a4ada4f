//! Orthogonal splitting of an admissible torsion tensor into its vectorial,
//! totally antisymmetric and Cartan-type components.
//!
//! The vector of the vectorial part is recovered from the trace
//! `c12(A)(Z) = Σ_i A(e_i, e_i, Z)` over an `h`-orthonormal frame. For
//! `A_{XYZ} = ⟨X,Y⟩⟨V,Z⟩ − ⟨X,Z⟩⟨V,Y⟩` that trace is `(n − 1)⟨V, Z⟩`, so
//! `V = c12(A)^♯ / (n − 1)`. The antisymmetric part is the cyclic average and
//! the Cartan part is whatever remains.

use nalgebra::DMatrix;

use super::torsion::{vectorial_lowered, TorsionCoeffs};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Skew-adjointness violations above this (relative to the largest entry) are rejected.
pub const SKEW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TorsionDecomposition {
    pub vectorial_part: TorsionCoeffs,
    /// Contravariant components `V^a`.
    pub vector_v: Vec<f64>,
    pub antisymmetric_part: TorsionCoeffs,
    pub cartan_part: TorsionCoeffs,
}

impl TorsionDecomposition {
    pub fn sum(&self) -> Tensor3 {
        self.vectorial_part
            .lowered
            .add(&self.antisymmetric_part.lowered)
            .add(&self.cartan_part.lowered)
    }
}

/// `⟨A, B⟩ = A_{abc} B_{a'b'c'} h^{aa'} h^{bb'} h^{cc'}`.
pub fn tensor_inner(a: &Tensor3, b: &Tensor3, hinv: &DMatrix<f64>) -> f64 {
    let n = a.dim();
    // raise all three slots of b, then contract
    let mut b1 = Tensor3::zeros(n);
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                b1[(x, y, z)] = (0..n).map(|w| hinv[(x, w)] * b[(w, y, z)]).sum();
            }
        }
    }
    let mut b2 = Tensor3::zeros(n);
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                b2[(x, y, z)] = (0..n).map(|w| hinv[(y, w)] * b1[(x, w, z)]).sum();
            }
        }
    }
    let mut s = 0.0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let b3: f64 = (0..n).map(|w| hinv[(z, w)] * b2[(x, y, w)]).sum();
                s += a[(x, y, z)] * b3;
            }
        }
    }
    s
}

/// `c12(A)_Z = Σ_i A(e_i, e_i, Z)` for the orthonormal frame `e_i = L^{-T} ∂_i`
/// obtained from the Cholesky factor `h = L Lᵀ`.
pub fn trace12(a: &Tensor3, h: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.dim();
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Validation("metric is not positive definite".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Validation("singular Cholesky factor".into()))?;
    // frame vector e_i has coordinates (L^{-T})_{·i} = row i of L^{-1}
    let mut c = vec![0.0; n];
    for (z, cz) in c.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..n {
            for x in 0..n {
                for y in 0..n {
                    s += linv[(i, x)] * linv[(i, y)] * a[(x, y, z)];
                }
            }
        }
        *cz = s;
    }
    Ok(c)
}

pub fn cartan_decompose(a: &TorsionCoeffs, h: &DMatrix<f64>) -> Result<TorsionDecomposition> {
    let n = a.dim();
    if n < 2 {
        return Err(Error::Validation(format!("dimension {n} < 2")));
    }
    let scale = a.lowered.max_abs().max(1.0);
    let violation = a.skew_violation();
    if violation > SKEW_TOLERANCE * scale {
        return Err(Error::Validation(format!(
            "torsion tensor is not skew-adjoint: max |A_xyz + A_xzy| = {violation:e}"
        )));
    }
    let hinv = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Validation("metric is not positive definite".into()))?
        .inverse();

    let c12 = trace12(&a.lowered, h)?;
    let v_low: Vec<f64> = c12.iter().map(|c| c / (n - 1) as f64).collect();
    let vector_v: Vec<f64> = (0..n)
        .map(|x| (0..n).map(|w| hinv[(x, w)] * v_low[w]).sum())
        .collect();

    let l = &a.lowered;
    let vectorial = vectorial_lowered(h, &vector_v);
    let antisym = Tensor3::from_fn(n, |x, y, z| {
        (l[(x, y, z)] + l[(y, z, x)] + l[(z, x, y)]) / 3.0
    });
    let cartan = l.sub(&vectorial).sub(&antisym);

    Ok(TorsionDecomposition {
        vectorial_part: TorsionCoeffs::from_lowered(vectorial, &hinv),
        vector_v,
        antisymmetric_part: TorsionCoeffs::from_lowered(antisym, &hinv),
        cartan_part: TorsionCoeffs::from_lowered(cartan, &hinv),
    })
}

/// Largest cyclic sum `|S_{xyz} + S_{yzx} + S_{zxy}|`.
pub fn cyclic_sum_violation(s: &Tensor3) -> f64 {
    let n = s.dim();
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                worst = worst.max((s[(x, y, z)] + s[(y, z, x)] + s[(z, x, y)]).abs());
            }
        }
    }
    worst
}
