use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TorsionField;
use crate::jacobi::{JacobiForm, JacobiOperator};
use crate::tensor::sup_norm;

use super::grid::{GridDomain, MapState};
use super::tension::{dirichlet_energy, tension_tor};

/// Residual growth factor over the initial residual that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;
/// Relative tolerance of the inner Laplacian solve.
pub const LAPLACIAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    Diverged,
    LeftChart,
    /// Newton line search found no step that lowers the residual.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub method: SolverMethod,
    pub iterations: usize,
    pub initial_residual: f64,
    /// Sup-norm of `τ^tor` after each iteration.
    pub residual_history: Vec<f64>,
    pub terminated: Termination,
    pub final_residual: f64,
    pub final_energy: f64,
}

impl ConvergenceReport {
    fn finish(
        method: SolverMethod,
        initial: f64,
        history: Vec<f64>,
        terminated: Termination,
        map: &MapState,
    ) -> Self {
        Self {
            method,
            iterations: history.len(),
            initial_residual: initial,
            final_residual: history.last().copied().unwrap_or(initial),
            residual_history: history,
            terminated,
            final_energy: dirichlet_energy(map),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            damping: 1.0,
            tol: 1e-8,
            max_iters: 500,
        }
    }
}

/// What the Newton step does when the Jacobian is numerically singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelPolicy {
    /// Minimum-norm step through the truncated pseudo-inverse.
    #[default]
    MinimumNorm,
    /// Fail with [`Error::SingularJacobian`].
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Singular values below `rcond · σ_max` count as zero.
    pub rcond: f64,
    pub kernel: KernelPolicy,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 20,
            rcond: 1e-10,
            kernel: KernelPolicy::MinimumNorm,
            max_halvings: 30,
        }
    }
}

/// `L = −Δ_h / s` on the periodic grid, applied to one scalar component.
fn apply_laplacian(domain: &GridDomain, u: &[f64], out: &mut [f64]) {
    let (ihx2, ihy2) = (1.0 / domain.hx().powi(2), 1.0 / domain.hy().powi(2));
    let ginv = 1.0 / domain.metric_scale;
    for k in 0..domain.nodes() {
        let c = u[k];
        let lap = (u[domain.shift(k, 1, 0)] - 2.0 * c + u[domain.shift(k, -1, 0)]) * ihx2
            + (u[domain.shift(k, 0, 1)] - 2.0 * c + u[domain.shift(k, 0, -1)]) * ihy2;
        out[k] = -ginv * lap;
    }
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero-mean solution of `L u = f − mean(f)` by conjugate gradients.
pub fn solve_laplacian(domain: &GridDomain, f: &[f64]) -> Vec<f64> {
    let n = domain.nodes();
    let mut r = f.to_vec();
    remove_mean(&mut r);
    let mut u = vec![0.0; n];
    let target = LAPLACIAN_TOLERANCE * dot(&r, &r).sqrt();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for _ in 0..10 * n {
        if rr.sqrt() <= target || rr == 0.0 {
            break;
        }
        apply_laplacian(domain, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        remove_mean(&mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    remove_mean(&mut u);
    u
}

/// Residual of `map`, or `None` when some node has left the chart.
fn residual(map: &MapState, field: &TorsionField) -> Result<Option<Vec<f64>>> {
    match tension_tor(map, field) {
        Ok(t) => Ok(Some(t)),
        Err(Error::Domain { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Damped Picard iteration `φ ← φ + λ L⁻¹ τ^tor(φ)`.
///
/// The mean mode of each component is left unchanged by the update.
pub fn solve_fixed_point(
    initial: &MapState,
    field: &TorsionField,
    cfg: &FixedPointConfig,
) -> Result<(MapState, ConvergenceReport)> {
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::Validation(format!(
            "damping must lie in (0, 1], got {}",
            cfg.damping
        )));
    }
    initial.validate()?;
    let method = SolverMethod::FixedPoint;
    let n = initial.dim();
    let nodes = initial.domain.nodes();
    let mut map = initial.clone();
    let Some(mut tau) = residual(&map, field)? else {
        return Ok((
            map.clone(),
            ConvergenceReport::finish(method, f64::NAN, vec![], Termination::LeftChart, &map),
        ));
    };
    let initial_residual = sup_norm(&tau);
    let mut history = Vec::new();
    if initial_residual < cfg.tol {
        let report = ConvergenceReport::finish(
            method,
            initial_residual,
            history,
            Termination::Converged,
            &map,
        );
        return Ok((map, report));
    }
    let mut component = vec![0.0; nodes];
    for _ in 0..cfg.max_iters {
        let mut values = map.values.clone();
        for a in 0..n {
            for k in 0..nodes {
                component[k] = tau[k * n + a];
            }
            let du = solve_laplacian(&map.domain, &component);
            for k in 0..nodes {
                values[k * n + a] += cfg.damping * du[k];
            }
        }
        let next = match MapState::new(map.domain, map.chart.clone(), values) {
            Ok(m) => m,
            Err(Error::Domain { .. }) => {
                let report = ConvergenceReport::finish(
                    method,
                    initial_residual,
                    history,
                    Termination::LeftChart,
                    &map,
                );
                return Ok((map, report));
            }
            Err(e) => return Err(e),
        };
        let Some(next_tau) = residual(&next, field)? else {
            let report = ConvergenceReport::finish(
                method,
                initial_residual,
                history,
                Termination::LeftChart,
                &map,
            );
            return Ok((map, report));
        };
        map = next;
        tau = next_tau;
        let r = sup_norm(&tau);
        history.push(r);
        let terminated = if r < cfg.tol {
            Some(Termination::Converged)
        } else if !r.is_finite() || r > DIVERGENCE_FACTOR * initial_residual {
            Some(Termination::Diverged)
        } else {
            None
        };
        if let Some(t) = terminated {
            let report = ConvergenceReport::finish(method, initial_residual, history, t, &map);
            return Ok((map, report));
        }
    }
    let report = ConvergenceReport::finish(
        method,
        initial_residual,
        history,
        Termination::MaxIters,
        &map,
    );
    Ok((map, report))
}

fn l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Newton iteration on `J^LC_φ(η) = −τ^tor(φ)` with backtracking on `‖τ^tor‖₂`.
///
/// Under [`KernelPolicy::Reject`] the Jacobian at the initial map is checked
/// before the convergence test, so a degenerate starting point is reported even
/// when it already solves the equation.
pub fn solve_newton(
    initial: &MapState,
    field: &TorsionField,
    cfg: &NewtonConfig,
) -> Result<(MapState, ConvergenceReport)> {
    initial.validate()?;
    let method = SolverMethod::Newton;
    let mut map = initial.clone();
    let Some(mut tau) = residual(&map, field)? else {
        return Ok((
            map.clone(),
            ConvergenceReport::finish(method, f64::NAN, vec![], Termination::LeftChart, &map),
        ));
    };
    let initial_residual = sup_norm(&tau);
    let mut history = Vec::new();
    let mut checked_initial = cfg.kernel != KernelPolicy::Reject;

    loop {
        let r = history.last().copied().unwrap_or(initial_residual);
        if checked_initial && r < cfg.tol {
            let report = ConvergenceReport::finish(
                method,
                initial_residual,
                history,
                Termination::Converged,
                &map,
            );
            return Ok((map, report));
        }
        if history.len() >= cfg.max_iters {
            let report = ConvergenceReport::finish(
                method,
                initial_residual,
                history,
                Termination::MaxIters,
                &map,
            );
            return Ok((map, report));
        }

        let op = JacobiOperator::assemble(&map, field, JacobiForm::LeviCivita)?;
        let svd = op.matrix.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let sigma_min = svd.singular_values.min();
        let cutoff = cfg.rcond * sigma_max;
        let singular = sigma_min <= cutoff;
        if singular && cfg.kernel == KernelPolicy::Reject {
            return Err(Error::SingularJacobian {
                sigma_min,
                sigma_max,
            });
        }
        checked_initial = true;
        if r < cfg.tol {
            continue;
        }

        let rhs = DVector::from_iterator(tau.len(), tau.iter().map(|v| -v));
        let step = pseudo_solve(&svd, &rhs, cutoff)?;
        let base_norm = l2(&tau);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial = map.perturbed(step.as_slice(), alpha);
            if let Ok(trial) = trial {
                if let Some(t) = residual(&trial, field)? {
                    if l2(&t) < base_norm {
                        accepted = Some((trial, t));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((next, next_tau)) = accepted else {
            if singular {
                return Err(Error::SingularJacobian {
                    sigma_min,
                    sigma_max,
                });
            }
            let report = ConvergenceReport::finish(
                method,
                initial_residual,
                history,
                Termination::Stalled,
                &map,
            );
            return Ok((map, report));
        };
        map = next;
        tau = next_tau;
        let r = sup_norm(&tau);
        history.push(r);
        if !r.is_finite() || r > DIVERGENCE_FACTOR * initial_residual {
            let report = ConvergenceReport::finish(
                method,
                initial_residual,
                history,
                Termination::Diverged,
                &map,
            );
            return Ok((map, report));
        }
    }
}

fn pseudo_solve(
    svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: &DVector<f64>,
    cutoff: f64,
) -> Result<DVector<f64>> {
    let (Some(u), Some(vt)) = (&svd.u, &svd.v_t) else {
        return Err(Error::Validation("SVD factors unavailable".into()));
    };
    let mut coeffs: DVector<f64> = u.transpose() * rhs;
    for (c, s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c = if *s > cutoff { *c / s } else { 0.0 };
    }
    let out: DMatrix<f64> =
        vt.transpose() * DMatrix::from_column_slice(coeffs.len(), 1, coeffs.as_slice());
    Ok(DVector::from_column_slice(out.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::initial::{constant_map, equator_wrap};
    use crate::geometry::Chart;
    use std::f64::consts::PI;

    fn torus(n: usize) -> GridDomain {
        GridDomain::new(n, n, 2.0 * PI, 2.0 * PI).unwrap()
    }

    #[test]
    fn laplacian_solve_inverts_the_operator_on_zero_mean_data() {
        let d = GridDomain::new(12, 10, 1.0, 2.0).unwrap();
        let mut f: Vec<f64> = (0..d.nodes())
            .map(|k| ((k * 7 % 13) as f64).sin())
            .collect();
        remove_mean(&mut f);
        let u = solve_laplacian(&d, &f);
        let mut lu = vec![0.0; d.nodes()];
        apply_laplacian(&d, &u, &mut lu);
        let err = lu
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10 * sup_norm(&f), "{err}");
        assert!(u.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn exact_solution_needs_no_iterations() {
        let m = constant_map(torus(8), Chart::sphere2(), &[1.0, 0.5]).unwrap();
        let (out, rep) =
            solve_fixed_point(&m, &TorsionField::Zero, &FixedPointConfig::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.terminated, Termination::Converged);
        assert_eq!(out.values, m.values);
        let (_, rep) = solve_newton(&m, &TorsionField::Zero, &NewtonConfig::default()).unwrap();
        assert_eq!(
            (rep.iterations, rep.terminated),
            (0, Termination::Converged)
        );
    }

    #[test]
    fn bad_damping_is_rejected() {
        let m = constant_map(torus(8), Chart::flat(2), &[0.0, 0.0]).unwrap();
        let cfg = FixedPointConfig {
            damping: 1.5,
            ..Default::default()
        };
        assert!(solve_fixed_point(&m, &TorsionField::Zero, &cfg).is_err());
    }

    #[test]
    fn history_length_matches_iterations() {
        let m = equator_wrap(torus(8), 1).unwrap();
        let cfg = FixedPointConfig {
            max_iters: 5,
            ..Default::default()
        };
        let (_, rep) =
            solve_fixed_point(&m, &TorsionField::vectorial_const(vec![1.0, 0.0]), &cfg).unwrap();
        assert_eq!(rep.residual_history.len(), rep.iterations);
        assert!((rep.initial_residual - 1.0).abs() < 1e-12);
        assert_ne!(rep.terminated, Termination::Converged);
    }

    #[test]
    fn reject_policy_reports_the_constant_kernel() {
        let m = constant_map(torus(8), Chart::flat(2), &[0.3, 0.1]).unwrap();
        let cfg = NewtonConfig {
            kernel: KernelPolicy::Reject,
            ..Default::default()
        };
        match solve_newton(&m, &TorsionField::Zero, &cfg) {
            Err(Error::SingularJacobian {
                sigma_min,
                sigma_max,
            }) => assert!(sigma_min < 1e-10 * sigma_max),
            other => panic!("{other:?}"),
        }
    }
}
