//! Curvature of the Levi-Civita connection and of the metric connection with
//! torsion `∇ = ∇^LC + A`, with sign convention
//! `R(X, Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`.

use super::chart::{metric_fd_step, Chart};
use super::torsion::{lc_derivative, Stencil, TorsionField};
use crate::error::Result;
use crate::tensor::{Tensor3, Tensor4};

/// Default finite-difference step for derivatives of connection coefficients.
pub const CURVATURE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connection {
    LeviCivita,
    Torsion,
}

/// `values[(a, b, c, d)] = R^a_{bcd}`, the `a`-component of `R(∂_c, ∂_d)∂_b`.
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    pub values: Tensor4,
    pub connection: Connection,
    /// Torsion mode only: max difference between the finite-difference tensor and
    /// the one assembled from the Levi-Civita curvature and derivatives of `A`.
    pub discrepancy: Option<f64>,
}

impl CurvatureTensor {
    pub fn dim(&self) -> usize {
        self.values.dim()
    }

    /// `R(x, y)z`.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let r = &self.values;
        let mut out = vec![0.0; n];
        for (a, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for b in 0..n {
                if z[b] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    if x[c] == 0.0 {
                        continue;
                    }
                    for d in 0..n {
                        s += r[(a, b, c, d)] * z[b] * x[c] * y[d];
                    }
                }
            }
            *o = s;
        }
        out
    }
}

/// Coefficients `C^a_{bc}` with `∇_{∂_b}∂_c = C^a_{bc}∂_a`.
fn connection_coeffs(
    chart: &Chart,
    field: &TorsionField,
    connection: Connection,
    y: &[f64],
) -> Result<Tensor3> {
    let gamma = chart.christoffel(y)?;
    match connection {
        Connection::Torsion if !field.is_zero() => Ok(gamma.add(&field.eval(chart, y)?.raised)),
        _ => Ok(gamma),
    }
}

pub(crate) fn riemann_from(
    coeffs: &Tensor3,
    derivs: &[Tensor3], // derivs[m] = ∂_m C
) -> Tensor4 {
    let n = coeffs.dim();
    let mut r = Tensor4::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut s = derivs[c][(a, d, b)] - derivs[d][(a, c, b)];
                    for e in 0..n {
                        s += coeffs[(a, c, e)] * coeffs[(e, d, b)]
                            - coeffs[(a, d, e)] * coeffs[(e, c, b)];
                    }
                    r[(a, b, c, d)] = s;
                }
            }
        }
    }
    r
}

fn finite_difference_curvature(
    chart: &Chart,
    field: &TorsionField,
    connection: Connection,
    y: &[f64],
    step: f64,
    stencil: Stencil,
) -> Result<Tensor4> {
    let n = chart.dim();
    let coeffs = connection_coeffs(chart, field, connection, y)?;
    let derivs = (0..n)
        .map(|m| {
            stencil
                .derivative(y, m, step, |p| {
                    Ok(connection_coeffs(chart, field, connection, p)?
                        .as_slice()
                        .to_vec())
                })
                .map(|d| Tensor3::from_vec(n, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(riemann_from(&coeffs, &derivs))
}

/// Curvature at `y` with derivative step `step`.
///
/// Levi-Civita mode differentiates the Christoffel symbols with second-order
/// central differences. Torsion mode does the same for `Γ + A` and compares the
/// result against [`curvature_relation`], recording the largest entry difference.
pub fn curvature(
    chart: &Chart,
    field: &TorsionField,
    y: &[f64],
    connection: Connection,
    step: f64,
) -> Result<CurvatureTensor> {
    chart.check_inside(y, 2.0 * step + metric_fd_step(y))?;
    let values = finite_difference_curvature(chart, field, connection, y, step, Stencil::Central2)?;
    let discrepancy = match connection {
        Connection::LeviCivita => None,
        Connection::Torsion => {
            let relation = curvature_relation(chart, field, y, step)?;
            Some(values.max_abs_diff(&relation.values))
        }
    };
    Ok(CurvatureTensor {
        values,
        connection,
        discrepancy,
    })
}

/// `R^Tor(X,Y)Z = R^LC(X,Y)Z + (∇_X A)(Y,Z) − (∇_Y A)(X,Z) + A(X,A(Y,Z)) − A(Y,A(X,Z))`,
/// every derivative taken with fourth-order stencils.
pub fn curvature_relation(
    chart: &Chart,
    field: &TorsionField,
    y: &[f64],
    step: f64,
) -> Result<CurvatureTensor> {
    chart.check_inside(y, 2.0 * step + metric_fd_step(y))?;
    let n = chart.dim();
    let mut r = finite_difference_curvature(
        chart,
        field,
        Connection::LeviCivita,
        y,
        step,
        Stencil::Central4,
    )?;
    if !field.is_zero() {
        let a = field.eval(chart, y)?.raised;
        let da = lc_derivative(field, chart, y, step, Stencil::Central4)?;
        for x in 0..n {
            for z in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        // (R(∂c, ∂d)∂z)^x
                        let mut s = da[(c, x, d, z)] - da[(d, x, c, z)];
                        for e in 0..n {
                            s += a[(x, c, e)] * a[(e, d, z)] - a[(x, d, e)] * a[(e, c, z)];
                        }
                        r[(x, z, c, d)] += s;
                    }
                }
            }
        }
    }
    Ok(CurvatureTensor {
        values: r,
        connection: Connection::Torsion,
        discrepancy: None,
    })
}

/// Sectional curvature `⟨R(X,Y)Y, X⟩ / (|X|²|Y|² − ⟨X,Y⟩²)` of the coordinate plane `(i, j)`.
pub fn sectional(chart: &Chart, r: &CurvatureTensor, y: &[f64], i: usize, j: usize) -> Result<f64> {
    let h = chart.metric(y)?;
    let n = chart.dim();
    let mut ei = vec![0.0; n];
    let mut ej = vec![0.0; n];
    ei[i] = 1.0;
    ej[j] = 1.0;
    let rv = r.apply(&ei, &ej, &ej);
    let num: f64 = (0..n).map(|a| h[(a, i)] * rv[a]).sum();
    Ok(num / (h[(i, i)] * h[(j, j)] - h[(i, j)] * h[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn flat_torsion_free_curvature_vanishes() {
        let chart = Chart::flat(3);
        let r = curvature(
            &chart,
            &TorsionField::Zero,
            &[0.1, 0.2, 0.3],
            Connection::LeviCivita,
            1e-4,
        )
        .unwrap();
        assert!(r.values.max_abs() < 1e-10);
    }

    #[test]
    fn unit_sphere_has_sectional_curvature_one() {
        let chart = Chart::sphere2();
        for &theta in &[PI / 2.0, 1.0, 2.3] {
            let y = [theta, 0.0];
            let r = curvature(
                &chart,
                &TorsionField::Zero,
                &y,
                Connection::LeviCivita,
                1e-4,
            )
            .unwrap();
            let k = sectional(&chart, &r, &y, 0, 1).unwrap();
            assert!((k - 1.0).abs() < 2e-6, "θ={theta}: K={k}");
        }
    }

    #[test]
    fn hyperbolic_plane_has_sectional_curvature_minus_one() {
        let chart = Chart::hyperbolic2();
        let y = [0.3, 1.7];
        let r = curvature(
            &chart,
            &TorsionField::Zero,
            &y,
            Connection::LeviCivita,
            1e-4,
        )
        .unwrap();
        let k = sectional(&chart, &r, &y, 0, 1).unwrap();
        assert!((k + 1.0).abs() < 1e-6, "K={k}");
    }

    #[test]
    fn both_connections_are_antisymmetric_in_the_direction_pair() {
        let chart = Chart::sphere2();
        let field = TorsionField::vectorial(|y| vec![0.2 * y[1].cos(), 0.5]);
        let y = [1.2, 0.4];
        for conn in [Connection::LeviCivita, Connection::Torsion] {
            let r = curvature(&chart, &field, &y, conn, 1e-4).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        for d in 0..2 {
                            let s = r.values[(a, b, c, d)] + r.values[(a, b, d, c)];
                            assert!(s.abs() < 1e-12, "{conn:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn constant_flat_vectorial_torsion_paths_agree() {
        let chart = Chart::flat(3);
        let field = TorsionField::vectorial_const(vec![1.0, 0.0, 0.0]);
        let r = curvature(&chart, &field, &[0.0, 0.0, 0.0], Connection::Torsion, 1e-3).unwrap();
        assert!(r.discrepancy.unwrap() < 1e-14);
        // R^Tor = A∘A terms only; nonzero for V ≠ 0
        assert!(r.values.max_abs() > 0.5);
    }

    #[test]
    fn varying_torsion_discrepancy_is_second_order() {
        let chart = Chart::flat(3);
        let field = TorsionField::vectorial(|y| vec![y[1].sin(), (0.5 * y[2]).cos(), y[0] * y[1]]);
        let y = [0.3, 0.7, -0.2];
        let d = |h: f64| {
            curvature(&chart, &field, &y, Connection::Torsion, h)
                .unwrap()
                .discrepancy
                .unwrap()
        };
        let order = (d(1e-2) / d(1e-3)).log10();
        assert!((1.8..2.2).contains(&order), "order {order}");
    }

    #[test]
    fn insufficient_margin_is_a_domain_error() {
        let chart = Chart::sphere2();
        assert!(curvature(
            &chart,
            &TorsionField::Zero,
            &[0.0501, 0.0],
            Connection::LeviCivita,
            1e-4
        )
        .is_err());
    }
}
