//! The round sphere embedded in `ℝ³`, where the map equation reads
//! `Δφ + |dφ|²φ + A(dφ, dφ) = 0` up to tangential projection.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{Chart, TorsionField};

use super::grid::{GridDomain, MapState};

/// Embedded node norms must be 1 within this before any computation.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

const Q: usize = 3;

/// Map into the unit sphere `S² ⊂ ℝ³`, `values[3k + α]`.
#[derive(Debug, Clone)]
pub struct EmbeddedMapState {
    pub domain: GridDomain,
    pub values: Vec<f64>,
}

/// `ι(θ, φ) = (sin θ cos φ, sin θ sin φ, cos θ)`.
pub fn embed(y: &[f64]) -> [f64; 3] {
    let (st, ct) = y[0].sin_cos();
    let (sp, cp) = y[1].sin_cos();
    [st * cp, st * sp, ct]
}

/// Chart coordinates of a unit vector.
pub fn chart_point(p: &[f64]) -> [f64; 2] {
    [p[2].clamp(-1.0, 1.0).acos(), p[1].atan2(p[0])]
}

/// Columns `∂ι/∂θ`, `∂ι/∂φ`.
fn tangent_basis(y: &[f64]) -> [[f64; 3]; 2] {
    let (st, ct) = y[0].sin_cos();
    let (sp, cp) = y[1].sin_cos();
    [[ct * cp, ct * sp, -st], [-st * sp, st * cp, 0.0]]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Chart components of the tangential part of an ambient vector at `y`.
fn pull_back(y: &[f64], v: &[f64]) -> [f64; 2] {
    let [et, ep] = tangent_basis(y);
    let s2 = y[0].sin().powi(2);
    [dot(&et, v), dot(&ep, v) / s2]
}

fn push_forward_at(y: &[f64], x: &[f64]) -> [f64; 3] {
    let [et, ep] = tangent_basis(y);
    [0, 1, 2].map(|c| et[c] * x[0] + ep[c] * x[1])
}

fn require_sphere(chart: &Chart) -> Result<()> {
    if chart.name() != "sphere2" {
        return Err(Error::Validation(format!(
            "extrinsic formulation needs the sphere2 chart, got `{}`",
            chart.name()
        )));
    }
    Ok(())
}

impl EmbeddedMapState {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        domain.validate()?;
        if values.len() != domain.nodes() * Q {
            return Err(Error::Validation(format!(
                "expected {} values, got {}",
                domain.nodes() * Q,
                values.len()
            )));
        }
        let map = Self { domain, values };
        for k in 0..domain.nodes() {
            let norm = dot(map.node(k), map.node(k)).sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::Validation(format!(
                    "node {k} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(map)
    }

    pub fn from_chart_map(map: &MapState) -> Result<Self> {
        require_sphere(&map.chart)?;
        let values = (0..map.domain.nodes())
            .flat_map(|k| embed(map.node(k)))
            .collect();
        let mut out = Self::new(map.domain, values)?;
        out.renormalize();
        Ok(out)
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * Q..(k + 1) * Q]
    }

    /// Projects every node back onto the unit sphere.
    pub fn renormalize(&mut self) {
        for p in self.values.chunks_mut(Q) {
            let norm = dot(p, p).sqrt();
            p.iter_mut().for_each(|v| *v /= norm);
        }
    }

    /// Central differences `(∂_x φ, ∂_y φ, Δφ)` at node `k`.
    fn jets(&self, k: usize) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let d = &self.domain;
        let (hx, hy) = (d.hx(), d.hy());
        let at = |di, dj| self.node(d.shift(k, di, dj));
        let (xp, xm, yp, ym, c) = (at(1, 0), at(-1, 0), at(0, 1), at(0, -1), self.node(k));
        let dx = [0, 1, 2].map(|a| (xp[a] - xm[a]) / (2.0 * hx));
        let dy = [0, 1, 2].map(|a| (yp[a] - ym[a]) / (2.0 * hy));
        let lap = [0, 1, 2].map(|a| {
            (xp[a] - 2.0 * c[a] + xm[a]) / (hx * hx) + (yp[a] - 2.0 * c[a] + ym[a]) / (hy * hy)
        });
        (dx, dy, lap)
    }
}

/// Tangential projection of `Δφ + |dφ|²φ + A(dφ, dφ)`, node-major in `ℝ³`.
///
/// `A` acts on the chart components of the tangential parts of `∂_iφ`.
pub fn tension_tor_extrinsic(map: &EmbeddedMapState, field: &TorsionField) -> Result<Vec<f64>> {
    let chart = Chart::sphere2();
    let ginv = 1.0 / map.domain.metric_scale;
    let mut out = Vec::with_capacity(map.values.len());
    for k in 0..map.domain.nodes() {
        let p = map.node(k);
        let (dx, dy, lap) = map.jets(k);
        let energy = dot(&dx, &dx) + dot(&dy, &dy);
        let mut w = [0, 1, 2].map(|a| lap[a] + energy * p[a]);
        if !field.is_zero() {
            let y = chart_point(p);
            let a = field.eval(&chart, &y)?;
            let (ux, uy) = (pull_back(&y, &dx), pull_back(&y, &dy));
            let mut ac = a.apply(&ux, &ux);
            for (c, v) in ac.iter_mut().zip(a.apply(&uy, &uy)) {
                *c += v;
            }
            let amb = push_forward_at(&y, &ac);
            for a in 0..Q {
                w[a] += amb[a];
            }
        }
        let normal = dot(&w, p);
        out.extend((0..Q).map(|a| ginv * (w[a] - normal * p[a])));
    }
    Ok(out)
}

/// Ambient image `dι(section)` of a chart section along a sphere2 map.
pub fn push_forward(map: &MapState, section: &[f64]) -> Result<Vec<f64>> {
    require_sphere(&map.chart)?;
    Ok((0..map.domain.nodes())
        .flat_map(|k| push_forward_at(map.node(k), &section[2 * k..2 * k + 2]))
        .collect())
}

/// Ambient matrices `B_i` of the endomorphisms `A(∂_iφ, ·)` on `T S²`,
/// extended by zero on the normal line; entry `2k + i` is node `k`, direction `i`.
pub fn ambient_torsion_matrices(
    map: &EmbeddedMapState,
    field: &TorsionField,
) -> Result<Vec<DMatrix<f64>>> {
    let chart = Chart::sphere2();
    let mut out = Vec::with_capacity(2 * map.domain.nodes());
    for k in 0..map.domain.nodes() {
        let y = chart_point(map.node(k));
        let a = field.eval(&chart, &y)?;
        let hinv = chart.inverse_metric(&y)?;
        let basis = tangent_basis(&y);
        let e = DMatrix::from_fn(Q, 2, |r, c| basis[c][r]);
        let (dx, dy, _) = map.jets(k);
        for d in [dx, dy] {
            let u = pull_back(&y, &d);
            let m = DMatrix::from_fn(2, 2, |r, c| {
                (0..2).map(|b| a.raised[(r, b, c)] * u[b]).sum()
            });
            out.push(&e * m * &hinv * e.transpose());
        }
    }
    Ok(out)
}

/// `max |B + Bᵀ|` over the matrices from [`ambient_torsion_matrices`].
pub fn antisymmetry_violation(mats: &[DMatrix<f64>]) -> f64 {
    mats.iter()
        .map(|m| (m + m.transpose()).amax())
        .fold(0.0, f64::max)
}
