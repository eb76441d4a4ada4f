use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

pub type MetricFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
/// Returns `[∂h/∂y^0, ∂h/∂y^1, ...]`.
pub type MetricDerivFn = dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync;
pub type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type GradientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Coordinate clearance kept from the pole in the spherical chart.
pub const SPHERE_POLE_MARGIN: f64 = 0.05;

/// Central-difference step for metric derivatives when no analytic closure exists.
pub fn metric_fd_step(y: &[f64]) -> f64 {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    1e-5 * norm.max(1.0)
}

/// A single coordinate patch of the target manifold.
#[derive(Clone)]
pub struct Chart {
    name: String,
    dim: usize,
    metric: Arc<MetricFn>,
    metric_derivs: Option<Arc<MetricDerivFn>>,
    bounds: Vec<(f64, f64)>,
    periods: Vec<Option<f64>>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_derivs", &self.metric_derivs.is_some())
            .field("bounds", &self.bounds)
            .field("periods", &self.periods)
            .finish()
    }
}

impl Chart {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        metric: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        bounds: Vec<(f64, f64)>,
    ) -> Self {
        assert_eq!(bounds.len(), dim, "one interval per coordinate");
        Self {
            name: name.into(),
            dim,
            metric: Arc::new(metric),
            metric_derivs: None,
            bounds,
            periods: vec![None; dim],
        }
    }

    pub fn with_metric_derivs(
        mut self,
        derivs: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.metric_derivs = Some(Arc::new(derivs));
        self
    }

    /// Marks coordinate `coord` as an angle with the given period.
    pub fn with_period(mut self, coord: usize, period: f64) -> Self {
        self.periods[coord] = Some(period);
        self
    }

    /// Euclidean space with the identity metric.
    pub fn flat(n: usize) -> Self {
        Self::new(
            "flat",
            n,
            move |_| DMatrix::identity(n, n),
            vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        )
        .with_metric_derivs(move |_| vec![DMatrix::zeros(n, n); n])
    }

    /// Flat torus `R^n / (2π Z)^n`.
    pub fn flat_torus(n: usize) -> Self {
        let mut chart = Self::flat(n);
        chart.name = "flat_torus".into();
        for c in 0..n {
            chart = chart.with_period(c, 2.0 * PI);
        }
        chart
    }

    /// Round unit sphere in coordinates `(θ, φ)`, `h = diag(1, sin²θ)`.
    pub fn sphere2() -> Self {
        Self::new(
            "sphere2",
            2,
            |y| {
                let s = y[0].sin();
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s * s])
            },
            vec![
                (SPHERE_POLE_MARGIN, PI - SPHERE_POLE_MARGIN),
                (f64::NEG_INFINITY, f64::INFINITY),
            ],
        )
        .with_metric_derivs(|y| {
            let d = (2.0 * y[0]).sin();
            vec![
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, d]),
                DMatrix::zeros(2, 2),
            ]
        })
        .with_period(1, 2.0 * PI)
    }

    /// Upper half-plane model of the hyperbolic plane, `h = diag(1, 1) / y₂²`.
    pub fn hyperbolic2() -> Self {
        Self::new(
            "hyperbolic2",
            2,
            |y| {
                let w = 1.0 / (y[1] * y[1]);
                DMatrix::from_row_slice(2, 2, &[w, 0.0, 0.0, w])
            },
            vec![(f64::NEG_INFINITY, f64::INFINITY), (0.0, f64::INFINITY)],
        )
        .with_metric_derivs(|y| {
            let d = -2.0 / (y[1] * y[1] * y[1]);
            vec![
                DMatrix::zeros(2, 2),
                DMatrix::from_row_slice(2, 2, &[d, 0.0, 0.0, d]),
            ]
        })
    }

    /// Built-in chart by name. `dim` is only used by `flat` and `flat_torus`.
    pub fn by_name(name: &str, dim: usize) -> Option<Self> {
        match name {
            "flat" => Some(Self::flat(dim)),
            "flat_torus" => Some(Self::flat_torus(dim)),
            "sphere2" => Some(Self::sphere2()),
            "hyperbolic2" => Some(Self::hyperbolic2()),
            _ => None,
        }
    }

    /// The chart with metric `e^{2v} h`. Derivatives stay analytic when the base
    /// chart has analytic derivatives.
    pub fn conformal(
        &self,
        v: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad_v: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let v: Arc<ScalarFn> = Arc::new(v);
        let grad_v: Arc<GradientFn> = Arc::new(grad_v);
        let base = self.metric.clone();
        let v_m = v.clone();
        let mut chart = Self {
            name: format!("{}~conformal", self.name),
            dim: self.dim,
            metric: Arc::new(move |y| base(y) * (2.0 * v_m(y)).exp()),
            metric_derivs: None,
            bounds: self.bounds.clone(),
            periods: self.periods.clone(),
        };
        if let Some(base_d) = self.metric_derivs.clone() {
            let base = self.metric.clone();
            chart.metric_derivs = Some(Arc::new(move |y| {
                let w = (2.0 * v(y)).exp();
                let h = base(y);
                let g = grad_v(y);
                base_d(y)
                    .into_iter()
                    .zip(g)
                    .map(|(dh, dv)| (dh + &h * (2.0 * dv)) * w)
                    .collect()
            }));
        }
        chart
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn period(&self, coord: usize) -> Option<f64> {
        self.periods[coord]
    }

    pub fn has_analytic_derivs(&self) -> bool {
        self.metric_derivs.is_some()
    }

    /// Difference `to - from` in coordinate `coord`, reduced to the principal
    /// branch for periodic coordinates.
    pub fn coord_diff(&self, coord: usize, from: f64, to: f64) -> f64 {
        let d = to - from;
        match self.periods[coord] {
            Some(p) => d - p * (d / p).round(),
            None => d,
        }
    }

    /// Fails unless `y` lies inside every open interval shrunk by `margin`.
    pub fn check_inside(&self, y: &[f64], margin: f64) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::Validation(format!(
                "point has {} coordinates, chart `{}` has dimension {}",
                y.len(),
                self.name,
                self.dim
            )));
        }
        for (c, (&v, &(lo, hi))) in y.iter().zip(&self.bounds).enumerate() {
            if !v.is_finite() || v <= lo + margin || v >= hi - margin {
                return Err(Error::Domain {
                    chart: self.name.clone(),
                    point: y.to_vec(),
                    coord: c,
                    margin,
                });
            }
        }
        Ok(())
    }

    /// Metric coefficients without a domain check.
    pub fn metric_unchecked(&self, y: &[f64]) -> DMatrix<f64> {
        (self.metric)(y)
    }

    pub fn metric(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        self.check_inside(y, 0.0)?;
        Ok(self.metric_unchecked(y))
    }

    pub fn cholesky(&self, y: &[f64]) -> Result<Cholesky<f64, Dyn>> {
        let h = self.metric(y)?;
        Cholesky::new(h).ok_or_else(|| Error::Conditioning {
            chart: self.name.clone(),
            point: y.to_vec(),
        })
    }

    pub fn inverse_metric(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.cholesky(y)?.inverse())
    }

    /// `[∂h/∂y^γ]`, analytic if available, otherwise central differences.
    pub fn metric_derivatives(&self, y: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        if let Some(d) = &self.metric_derivs {
            self.check_inside(y, 0.0)?;
            return Ok(d(y));
        }
        let step = metric_fd_step(y);
        self.check_inside(y, step)?;
        let mut out = Vec::with_capacity(self.dim);
        let mut yp = y.to_vec();
        for g in 0..self.dim {
            yp[g] = y[g] + step;
            let hp = self.metric_unchecked(&yp);
            yp[g] = y[g] - step;
            let hm = self.metric_unchecked(&yp);
            yp[g] = y[g];
            out.push((hp - hm) / (2.0 * step));
        }
        Ok(out)
    }

    /// Levi-Civita coefficients `Γ[(a, b, c)] = Γ^a_{bc}`.
    pub fn christoffel(&self, y: &[f64]) -> Result<Tensor3> {
        let hinv = self.inverse_metric(y)?;
        let dh = self.metric_derivatives(y)?;
        let n = self.dim;
        // lowered Γ_{d b c} = ½(∂_b h_{dc} + ∂_c h_{db} − ∂_d h_{bc})
        let lowered = Tensor3::from_fn(n, |d, b, c| {
            0.5 * (dh[b][(d, c)] + dh[c][(d, b)] - dh[d][(b, c)])
        });
        Ok(Tensor3::from_fn(n, |a, b, c| {
            (0..n).map(|d| hinv[(a, d)] * lowered[(d, b, c)]).sum()
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_christoffel_vanishes() {
        let chart = Chart::flat(3);
        let g = chart.christoffel(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn sphere_christoffel_matches_closed_form() {
        let chart = Chart::sphere2();
        for &theta in &[PI / 2.0, PI / 4.0, 1.1] {
            let g = chart.christoffel(&[theta, 0.0]).unwrap();
            assert_abs_diff_eq!(g[(0, 1, 1)], -theta.sin() * theta.cos(), epsilon = 1e-15);
            assert_abs_diff_eq!(g[(1, 0, 1)], theta.cos() / theta.sin(), epsilon = 1e-14);
            assert_abs_diff_eq!(g[(1, 1, 0)], g[(1, 0, 1)], epsilon = 0.0);
            assert_abs_diff_eq!(g[(0, 0, 0)], 0.0);
        }
        let g = chart.christoffel(&[PI / 4.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g[(0, 1, 1)], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(1, 0, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn numeric_derivatives_match_analytic() {
        let analytic = Chart::hyperbolic2();
        let numeric = Chart::new(
            "hyp-numeric",
            2,
            |y| {
                let w = 1.0 / (y[1] * y[1]);
                DMatrix::from_row_slice(2, 2, &[w, 0.0, 0.0, w])
            },
            vec![(f64::NEG_INFINITY, f64::INFINITY), (0.0, f64::INFINITY)],
        );
        let y = [0.4, 1.3];
        let a = analytic.christoffel(&y).unwrap();
        let b = numeric.christoffel(&y).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-9);
    }

    #[test]
    fn numeric_derivatives_converge_at_second_order() {
        let exact = Chart::sphere2();
        let y = [0.9, 0.2];
        let dh = exact.metric_derivatives(&y).unwrap()[0][(1, 1)];
        let err = |step: f64| {
            let hp = exact.metric_unchecked(&[y[0] + step, y[1]])[(1, 1)];
            let hm = exact.metric_unchecked(&[y[0] - step, y[1]])[(1, 1)];
            ((hp - hm) / (2.0 * step) - dh).abs()
        };
        let order = (err(1e-2) / err(5e-3)).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn domain_violations_are_reported() {
        let chart = Chart::sphere2();
        assert!(matches!(
            chart.metric(&[0.01, 0.0]),
            Err(Error::Domain { coord: 0, .. })
        ));
        assert!(chart.check_inside(&[1.0, 100.0], 0.0).is_ok());
        let hyp = Chart::hyperbolic2();
        assert!(hyp.christoffel(&[0.0, -1.0]).is_err());
    }

    #[test]
    fn indefinite_metric_is_a_conditioning_error() {
        let chart = Chart::new(
            "bad",
            2,
            |_| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            vec![(-1.0, 1.0); 2],
        );
        assert!(matches!(
            chart.inverse_metric(&[0.0, 0.0]),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn periodic_differences_wrap() {
        let chart = Chart::sphere2();
        assert_abs_diff_eq!(
            chart.coord_diff(1, 6.2, 0.1),
            0.1 + 2.0 * PI - 6.2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(chart.coord_diff(0, 0.2, 0.3), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn conformal_chart_uses_analytic_derivatives() {
        let base = Chart::flat(2);
        let conf = base.conformal(|y| 0.1 * y[0], |_| vec![0.1, 0.0]);
        assert!(conf.has_analytic_derivs());
        let y = [0.3, 0.4];
        let d = conf.metric_derivatives(&y).unwrap();
        let w = (0.2 * y[0]).exp();
        assert_abs_diff_eq!(d[0][(0, 0)], 0.2 * w, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1][(1, 1)], 0.0);
    }
}
