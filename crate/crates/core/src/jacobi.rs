//! Jacobi operator of `τ^tor`: the linearization of the torsion tension field,
//! in its Levi-Civita and torsion-connection forms.
//!
//! Levi-Civita form:
//! `J(η) = Δη + R(η, dφ)dφ + (∇_η A)(dφ, dφ) + A(∇η, dφ) + A(dφ, ∇η)`.
//! Torsion-connection form, with `∇^T = ∇ + A` and its curvature `R^T`:
//! `J(η) = Δ^T η + R^T(η, dφ)dφ + (∇_{dφ}A)(η, dφ) − (∇_{dφ}A)(dφ, η)
//!        + A(∇η, dφ) − A(dφ, ∇η) + A(dφ, A(η, dφ)) − A(dφ, A(dφ, η)) + A(η, τ) − A(τ, η)`.
//! Every `dφ` pair is traced over the domain.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::grid::SectionStencil;
use crate::field::tension::tension_with_jets;
use crate::field::{tension_tor, MapJets, MapState};
use crate::geometry::chart::metric_fd_step;
use crate::geometry::curvature::{riemann_from, CURVATURE_STEP};
use crate::geometry::{Chart, Stencil, TorsionField};
use crate::tensor::{sup_norm, Tensor3, Tensor4};

/// Largest `N·n` for dense assembly.
pub const ASSEMBLY_CAP: usize = 20_000;
/// Sweeps of complex inverse iteration per eigenvalue.
pub const MAX_EIGEN_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobiForm {
    LeviCivita,
    TorsionConnection,
}

/// Connection data at the image of one node.
#[derive(Debug, Clone)]
struct NodeGeometry {
    gamma: Tensor3,
    /// `∂_m Γ`
    dgamma: Vec<Tensor3>,
    r_lc: Tensor4,
    a: Tensor3,
    /// `∂_m A`
    da: Vec<Tensor3>,
    /// `(∇_m A)^a_{bc}` at `[(m, a, b, c)]`
    nabla_a: Tensor4,
    r_tor: Tensor4,
}

fn coeff_derivs(
    y: &[f64],
    n: usize,
    f: impl Fn(&[f64]) -> Result<Tensor3>,
) -> Result<Vec<Tensor3>> {
    (0..n)
        .map(|m| {
            Stencil::Central2
                .derivative(y, m, CURVATURE_STEP, |p| Ok(f(p)?.as_slice().to_vec()))
                .map(|d| Tensor3::from_vec(n, d))
        })
        .collect()
}

impl NodeGeometry {
    fn at(chart: &Chart, field: &TorsionField, y: &[f64]) -> Result<Self> {
        let n = chart.dim();
        chart.check_inside(y, CURVATURE_STEP + metric_fd_step(y))?;
        let gamma = chart.christoffel(y)?;
        let dgamma = coeff_derivs(y, n, |p| chart.christoffel(p))?;
        let r_lc = riemann_from(&gamma, &dgamma);
        if field.is_zero() {
            return Ok(Self {
                r_tor: r_lc.clone(),
                gamma,
                dgamma,
                r_lc,
                a: Tensor3::zeros(n),
                da: vec![Tensor3::zeros(n); n],
                nabla_a: Tensor4::zeros(n),
            });
        }
        let a = field.eval(chart, y)?.raised;
        let da = coeff_derivs(y, n, |p| Ok(field.eval(chart, p)?.raised))?;
        let mut nabla_a = Tensor4::zeros(n);
        for m in 0..n {
            for x in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let mut s = da[m][(x, b, c)];
                        for e in 0..n {
                            s += gamma[(x, m, e)] * a[(e, b, c)]
                                - gamma[(e, m, b)] * a[(x, e, c)]
                                - gamma[(e, m, c)] * a[(x, b, e)];
                        }
                        nabla_a[(m, x, b, c)] = s;
                    }
                }
            }
        }
        let c = gamma.add(&a);
        let dc: Vec<Tensor3> = dgamma.iter().zip(&da).map(|(g, d)| g.add(d)).collect();
        let r_tor = riemann_from(&c, &dc);
        Ok(Self {
            gamma,
            dgamma,
            r_lc,
            a,
            da,
            nabla_a,
            r_tor,
        })
    }
}

fn add_into(out: &mut [f64], v: &[f64]) {
    for (o, x) in out.iter_mut().zip(v) {
        *o += x;
    }
}

fn sub_into(out: &mut [f64], v: &[f64]) {
    for (o, x) in out.iter_mut().zip(v) {
        *o -= x;
    }
}

/// `out^a = w^m t[(m, a, b, c)] u^b v^c`.
fn contract_derivative(t: &Tensor4, w: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.dim();
    (0..n)
        .map(|a| {
            let mut s = 0.0;
            for m in 0..n {
                if w[m] == 0.0 {
                    continue;
                }
                for b in 0..n {
                    for c in 0..n {
                        s += w[m] * t[(m, a, b, c)] * u[b] * v[c];
                    }
                }
            }
            s
        })
        .collect()
}

/// `Σ_d w^d ∂_d C(u, v)`.
fn contract_coeff_derivs(dc: &[Tensor3], w: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for (d, t) in dc.iter().enumerate() {
        if w[d] != 0.0 {
            for (o, x) in out.iter_mut().zip(t.contract(u, v)) {
                *o += w[d] * x;
            }
        }
    }
    out
}

fn fr(r: &Tensor4, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    let n = r.dim();
    (0..n)
        .map(|a| {
            let mut s = 0.0;
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s += r[(a, b, c, d)] * z[b] * x[c] * y[d];
                    }
                }
            }
            s
        })
        .collect()
}

/// Jacobi operator of a base map, with per-node connection data cached.
#[derive(Debug, Clone)]
pub struct JacobiOperator {
    pub base_map: MapState,
    pub field: TorsionField,
    pub form: JacobiForm,
    /// Dense `(N·n) × (N·n)` matrix, node-major; empty until [`JacobiOperator::assemble`].
    pub matrix: DMatrix<f64>,
    geometry: Vec<NodeGeometry>,
    jets: MapJets,
    /// Coordinate-trace tension, without the domain metric factor.
    tau_coord: Vec<f64>,
}

impl JacobiOperator {
    pub fn new(map: &MapState, field: &TorsionField, form: JacobiForm) -> Result<Self> {
        let geometry = (0..map.domain.nodes())
            .map(|k| NodeGeometry::at(&map.chart, field, map.node(k)))
            .collect::<Result<Vec<_>>>()?;
        let jets = MapJets::new(map);
        let s = map.domain.metric_scale;
        let tau_coord = tension_with_jets(map, &jets)?
            .into_iter()
            .map(|t| t * s)
            .collect();
        Ok(Self {
            base_map: map.clone(),
            field: field.clone(),
            form,
            matrix: DMatrix::zeros(0, 0),
            geometry,
            jets,
            tau_coord,
        })
    }

    /// Operator with its dense matrix; column `k` is [`Self::apply`] on the `k`-th unit vector.
    pub fn assemble(map: &MapState, field: &TorsionField, form: JacobiForm) -> Result<Self> {
        let size = map.values.len();
        if size > ASSEMBLY_CAP {
            return Err(Error::SizeCap {
                size,
                cap: ASSEMBLY_CAP,
            });
        }
        let mut op = Self::new(map, field, form)?;
        let n = map.dim();
        let d = map.domain;
        let mut matrix = DMatrix::zeros(size, size);
        let mut eta = vec![0.0; size];
        for col in 0..size {
            eta[col] = 1.0;
            let k = col / n;
            let mut rows = vec![
                k,
                d.shift(k, 1, 0),
                d.shift(k, -1, 0),
                d.shift(k, 0, 1),
                d.shift(k, 0, -1),
            ];
            rows.sort_unstable();
            rows.dedup();
            for node in rows {
                let v = op.apply_at(&eta, node);
                for a in 0..n {
                    matrix[(node * n + a, col)] = v[a];
                }
            }
            eta[col] = 0.0;
        }
        op.matrix = matrix;
        Ok(op)
    }

    pub fn size(&self) -> usize {
        self.base_map.values.len()
    }

    pub fn apply(&self, eta: &[f64]) -> Result<Vec<f64>> {
        if eta.len() != self.size() {
            return Err(Error::Validation(format!(
                "section has {} entries, expected {}",
                eta.len(),
                self.size()
            )));
        }
        Ok((0..self.base_map.domain.nodes())
            .flat_map(|k| self.apply_at(eta, k))
            .collect())
    }

    fn apply_at(&self, eta: &[f64], k: usize) -> Vec<f64> {
        let n = self.base_map.dim();
        let stencil = SectionStencil {
            domain: &self.base_map.domain,
            n,
        };
        let (ex, ey, elap) = stencil.jets(eta, k);
        let e = &eta[k * n..(k + 1) * n];
        let g = &self.geometry[k];
        let xs = [self.jets.dx(k), self.jets.dy(k)];
        let ds = [ex.as_slice(), ey.as_slice()];
        let lap_phi = self.jets.laplacian(k);
        let tau = &self.tau_coord[k * n..(k + 1) * n];
        // ∇^LC_i η
        let nabla: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                let mut v = ds[i].to_vec();
                add_into(&mut v, &g.gamma.contract(xs[i], e));
                v
            })
            .collect();

        let mut out = elap.clone();
        match self.form {
            JacobiForm::LeviCivita => {
                add_into(&mut out, &g.gamma.contract(&lap_phi, e));
                for i in 0..2 {
                    add_into(&mut out, &contract_coeff_derivs(&g.dgamma, xs[i], xs[i], e));
                    add_into(&mut out, &g.gamma.contract(xs[i], ds[i]));
                    add_into(&mut out, &g.gamma.contract(xs[i], &nabla[i]));
                    add_into(&mut out, &fr(&g.r_lc, e, xs[i], xs[i]));
                }
                if !self.field.is_zero() {
                    for i in 0..2 {
                        add_into(&mut out, &contract_derivative(&g.nabla_a, e, xs[i], xs[i]));
                        add_into(&mut out, &g.a.contract(&nabla[i], xs[i]));
                        add_into(&mut out, &g.a.contract(xs[i], &nabla[i]));
                    }
                }
            }
            JacobiForm::TorsionConnection => {
                let c = g.gamma.add(&g.a);
                let dc: Vec<Tensor3> = g.dgamma.iter().zip(&g.da).map(|(x, y)| x.add(y)).collect();
                add_into(&mut out, &c.contract(&lap_phi, e));
                for i in 0..2 {
                    let mut nabla_t = ds[i].to_vec();
                    add_into(&mut nabla_t, &c.contract(xs[i], e));
                    add_into(&mut out, &contract_coeff_derivs(&dc, xs[i], xs[i], e));
                    add_into(&mut out, &c.contract(xs[i], ds[i]));
                    add_into(&mut out, &c.contract(xs[i], &nabla_t));
                    add_into(&mut out, &fr(&g.r_tor, e, xs[i], xs[i]));
                }
                if !self.field.is_zero() {
                    let a = &g.a;
                    for i in 0..2 {
                        let x = xs[i];
                        add_into(&mut out, &contract_derivative(&g.nabla_a, x, e, x));
                        sub_into(&mut out, &contract_derivative(&g.nabla_a, x, x, e));
                        add_into(&mut out, &a.contract(&nabla[i], x));
                        sub_into(&mut out, &a.contract(x, &nabla[i]));
                        add_into(&mut out, &a.contract(x, &a.contract(e, x)));
                        sub_into(&mut out, &a.contract(x, &a.contract(x, e)));
                    }
                    add_into(&mut out, &a.contract(e, tau));
                    sub_into(&mut out, &a.contract(tau, e));
                }
            }
        }
        let ginv = 1.0 / self.base_map.domain.metric_scale;
        out.iter_mut().for_each(|v| *v *= ginv);
        out
    }

    /// `max |M − Mᵀ|` of the assembled matrix.
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Matrix as CSV rows, 17 significant digits.
    pub fn matrix_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.matrix.nrows() {
            let row: Vec<String> = self
                .matrix
                .row(r)
                .iter()
                .map(|v| crate::io::fmt_f64(*v))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `J(η)` without assembling a matrix.
pub fn jacobi_apply(op: &JacobiOperator, eta: &[f64]) -> Result<Vec<f64>> {
    op.apply(eta)
}

/// `A(η, τ^tor)` nodewise.
pub fn torsion_of_residual(map: &MapState, field: &TorsionField, eta: &[f64]) -> Result<Vec<f64>> {
    let n = map.dim();
    let tau = tension_tor(map, field)?;
    let mut out = Vec::with_capacity(eta.len());
    for k in 0..map.domain.nodes() {
        let a = field.eval(&map.chart, map.node(k))?;
        out.extend(a.apply(&eta[k * n..(k + 1) * n], &tau[k * n..(k + 1) * n]));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationReport {
    pub value: f64,
    pub t: f64,
    pub convention: String,
}

pub const LINEARIZATION_CONVENTION: &str =
    "chart coordinates, corrected to first order in normal coordinates at the base image by Γ(η, τ^tor)";

/// `sup |(τ^tor(φ + tη) − τ^tor(φ))/t + Γ(η, τ^tor(φ)) − J^LC(η)|`.
///
/// The Christoffel term converts the chart-coordinate difference quotient into
/// the covariant derivative along the variation; it vanishes on flat charts.
pub fn linearization_check(
    map: &MapState,
    field: &TorsionField,
    eta: &[f64],
    t: f64,
) -> Result<LinearizationReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Validation(format!("t must be positive, got {t}")));
    }
    let n = map.dim();
    let moved = map.perturbed(eta, t)?;
    let base = tension_tor(map, field)?;
    let shifted = tension_tor(&moved, field)?;
    let op = JacobiOperator::new(map, field, JacobiForm::LeviCivita)?;
    let j = op.apply(eta)?;
    let mut diff = Vec::with_capacity(eta.len());
    for k in 0..map.domain.nodes() {
        let r = k * n..(k + 1) * n;
        let corr = op.geometry[k]
            .gamma
            .contract(&eta[r.clone()], &base[r.clone()]);
        for (a, c) in corr.iter().enumerate() {
            let i = k * n + a;
            diff.push((shifted[i] - base[i]) / t + c - j[i]);
        }
    }
    Ok(LinearizationReport {
        value: sup_norm(&diff),
        t,
        convention: LINEARIZATION_CONVENTION.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Eigenvalue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

fn spectral_order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.norm()
        .total_cmp(&b.norm())
        .then(a.re.total_cmp(&b.re))
        .then(a.im.total_cmp(&b.im))
}

/// The `k` eigenvalues of smallest modulus, ordered by `(|λ|, Re λ, Im λ)`.
///
/// Candidates come from a dense eigenvalue solver and are each refined by
/// complex shifted inverse iteration until `‖Mv − λv‖ ≤ 1e-10·‖M‖_F`.
pub fn spectrum(op: &JacobiOperator, k: usize) -> Result<Vec<Eigenvalue>> {
    let m = &op.matrix;
    let size = m.nrows();
    if k == 0 {
        return Ok(vec![]);
    }
    if size == 0 {
        return Err(Error::Validation("operator matrix is not assembled".into()));
    }
    if k > size {
        return Err(Error::Validation(format!(
            "requested {k} eigenvalues of a {size}×{size} matrix"
        )));
    }
    let dense = faer::Mat::<f64>::from_fn(size, size, |i, j| m[(i, j)]);
    let mut candidates: Vec<Complex64> = dense
        .eigenvalues()
        .map_err(|_| Error::EigenNonConvergence {
            sweeps: 0,
            residual: f64::NAN,
        })?
        .into_iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    candidates.sort_by(spectral_order);
    candidates.truncate(k);

    let mc = m.map(|x| Complex64::new(x, 0.0));
    let scale = m.norm().max(1.0);
    let tol = 1e-10 * scale;
    let mut refined = Vec::with_capacity(k);
    for lambda in candidates {
        refined.push(refine_eigenvalue(&mc, lambda, tol)?);
    }
    refined.sort_by(spectral_order);
    Ok(refined.into_iter().map(Eigenvalue::from).collect())
}

fn refine_eigenvalue(mc: &DMatrix<Complex64>, lambda: Complex64, tol: f64) -> Result<Complex64> {
    let size = mc.nrows();
    let offset = 1e-10 * lambda.norm().max(1.0);
    let shift = lambda + Complex64::new(offset, offset);
    let shifted = mc - DMatrix::from_diagonal_element(size, size, shift);
    let lu = shifted.lu();
    let mut v = nalgebra::DVector::from_fn(size, |i, _| {
        Complex64::new(1.0 + 0.1 * (i as f64).sin(), 0.05 * (i as f64).cos())
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_EIGEN_SWEEPS {
        let Some(w) = lu.solve(&v) else {
            // shift hit the spectrum to working precision; the Schur value stands
            return Ok(lambda);
        };
        let norm = w.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Ok(lambda);
        }
        v = w / Complex64::new(norm, 0.0);
        let mv = mc * &v;
        let estimate = v.dotc(&mv);
        residual = (&mv - &v * estimate).norm();
        if residual <= tol {
            return Ok(estimate);
        }
    }
    Err(Error::EigenNonConvergence {
        sweeps: MAX_EIGEN_SWEEPS,
        residual,
    })
}

/// `J(η) − A(η, τ^tor)` for the torsion-connection form, which should match the
/// Levi-Civita form.
pub fn form_gap(map: &MapState, field: &TorsionField, eta: &[f64]) -> Result<f64> {
    let lc = JacobiOperator::new(map, field, JacobiForm::LeviCivita)?.apply(eta)?;
    let tor = JacobiOperator::new(map, field, JacobiForm::TorsionConnection)?.apply(eta)?;
    let corr = torsion_of_residual(map, field, eta)?;
    Ok(lc
        .iter()
        .zip(&tor)
        .zip(&corr)
        .map(|((l, t), c)| (t - c - l).abs())
        .fold(0.0, f64::max))
}
