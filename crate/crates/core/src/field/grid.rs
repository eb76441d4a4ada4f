use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Chart;

fn unit_scale() -> f64 {
    1.0
}

/// Uniform periodic grid on the flat torus `[0, lx) × [0, ly)`.
///
/// The domain metric is `metric_scale · δ`; the default scale is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDomain {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    #[serde(default = "unit_scale")]
    pub metric_scale: f64,
}

impl GridDomain {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let d = Self {
            nx,
            ny,
            lx,
            ly,
            metric_scale: 1.0,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::Validation(format!(
                "grid must be at least 4×4, got {}×{}",
                self.nx, self.ny
            )));
        }
        for (name, v) in [
            ("lx", self.lx),
            ("ly", self.ly),
            ("metric_scale", self.metric_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Same grid with domain metric multiplied by `e^{2u}`.
    pub fn conformally_scaled(self, u: f64) -> Self {
        Self {
            metric_scale: self.metric_scale * (2.0 * u).exp(),
            ..self
        }
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    /// Node reached from `k` by `(di, dj)` steps with periodic wraparound.
    pub fn shift(&self, k: usize, di: isize, dj: isize) -> usize {
        let (i, j) = self.ij(k);
        let i = (i as isize + di).rem_euclid(self.nx as isize) as usize;
        let j = (j as isize + dj).rem_euclid(self.ny as isize) as usize;
        self.index(i, j)
    }

    /// Coordinate area of one cell.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }
}

/// Map from the grid into a chart, `values[k * n + a] = φ^a(node k)`.
#[derive(Debug, Clone)]
pub struct MapState {
    pub domain: GridDomain,
    pub chart: Chart,
    pub values: Vec<f64>,
}

impl MapState {
    pub fn new(domain: GridDomain, chart: Chart, values: Vec<f64>) -> Result<Self> {
        domain.validate()?;
        if values.len() != domain.nodes() * chart.dim() {
            return Err(Error::Validation(format!(
                "expected {} values, got {}",
                domain.nodes() * chart.dim(),
                values.len()
            )));
        }
        let map = Self {
            domain,
            chart,
            values,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn from_fn(
        domain: GridDomain,
        chart: Chart,
        f: impl Fn(f64, f64) -> Vec<f64>,
    ) -> Result<Self> {
        let n = chart.dim();
        let mut values = Vec::with_capacity(domain.nodes() * n);
        for k in 0..domain.nodes() {
            let (x, y) = domain.coords(k);
            let p = f(x, y);
            if p.len() != n {
                return Err(Error::Validation(format!(
                    "map returned {} components, chart has {n}",
                    p.len()
                )));
            }
            values.extend(p);
        }
        Self::new(domain, chart, values)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        let n = self.dim();
        &self.values[k * n..(k + 1) * n]
    }

    /// Every node strictly inside the chart.
    pub fn validate(&self) -> Result<()> {
        for k in 0..self.domain.nodes() {
            self.chart.check_inside(self.node(k), 0.0)?;
        }
        Ok(())
    }

    /// `φ + t·η`, validated.
    pub fn perturbed(&self, eta: &[f64], t: f64) -> Result<Self> {
        if eta.len() != self.values.len() {
            return Err(Error::Validation(format!(
                "perturbation has {} entries, map has {}",
                eta.len(),
                self.values.len()
            )));
        }
        let values = self
            .values
            .iter()
            .zip(eta)
            .map(|(p, e)| p + t * e)
            .collect();
        Self::new(self.domain, self.chart.clone(), values)
    }

    /// Same map on a conformally rescaled domain.
    pub fn with_domain(&self, domain: GridDomain) -> Result<Self> {
        Self::new(domain, self.chart.clone(), self.values.clone())
    }
}

/// Second-order central-difference jets of a map, coordinate differences
/// taken on the principal branch of periodic target coordinates.
#[derive(Debug, Clone)]
pub struct MapJets {
    n: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dxx: Vec<f64>,
    pub dyy: Vec<f64>,
    pub dxy: Vec<f64>,
}

impl MapJets {
    pub fn new(map: &MapState) -> Self {
        let d = &map.domain;
        let n = map.dim();
        let nodes = d.nodes();
        let (hx, hy) = (d.hx(), d.hy());
        let mut jets = Self {
            n,
            dx: vec![0.0; nodes * n],
            dy: vec![0.0; nodes * n],
            dxx: vec![0.0; nodes * n],
            dyy: vec![0.0; nodes * n],
            dxy: vec![0.0; nodes * n],
        };
        let diff = |a: usize, from: usize, to: usize| {
            map.chart
                .coord_diff(a, map.values[from * n + a], map.values[to * n + a])
        };
        for k in 0..nodes {
            let xp = d.shift(k, 1, 0);
            let xm = d.shift(k, -1, 0);
            let yp = d.shift(k, 0, 1);
            let ym = d.shift(k, 0, -1);
            let pp = d.shift(k, 1, 1);
            let pm = d.shift(k, 1, -1);
            let mp = d.shift(k, -1, 1);
            let mm = d.shift(k, -1, -1);
            for a in 0..n {
                let (fx, bx) = (diff(a, k, xp), diff(a, xm, k));
                let (fy, by) = (diff(a, k, yp), diff(a, ym, k));
                let idx = k * n + a;
                jets.dx[idx] = (fx + bx) / (2.0 * hx);
                jets.dy[idx] = (fy + by) / (2.0 * hy);
                jets.dxx[idx] = (fx - bx) / (hx * hx);
                jets.dyy[idx] = (fy - by) / (hy * hy);
                jets.dxy[idx] = (diff(a, pm, pp) - diff(a, mm, mp)) / (4.0 * hx * hy);
            }
        }
        jets
    }

    pub fn dx(&self, k: usize) -> &[f64] {
        &self.dx[k * self.n..(k + 1) * self.n]
    }

    pub fn dy(&self, k: usize) -> &[f64] {
        &self.dy[k * self.n..(k + 1) * self.n]
    }

    /// Coordinate Laplacian `∂²_x φ + ∂²_y φ` (5-point stencil).
    pub fn laplacian(&self, k: usize) -> Vec<f64> {
        let r = k * self.n..(k + 1) * self.n;
        self.dxx[r.clone()]
            .iter()
            .zip(&self.dyy[r])
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Central-difference helpers for sections along a map (no wraparound in values).
pub(crate) struct SectionStencil<'a> {
    pub domain: &'a GridDomain,
    pub n: usize,
}

impl SectionStencil<'_> {
    /// `(∂_x η, ∂_y η, Δη)` at node `k`.
    pub fn jets(&self, eta: &[f64], k: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = self.domain;
        let n = self.n;
        let (hx, hy) = (d.hx(), d.hy());
        let xp = d.shift(k, 1, 0) * n;
        let xm = d.shift(k, -1, 0) * n;
        let yp = d.shift(k, 0, 1) * n;
        let ym = d.shift(k, 0, -1) * n;
        let c = k * n;
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; n];
        let mut lap = vec![0.0; n];
        for a in 0..n {
            dx[a] = (eta[xp + a] - eta[xm + a]) / (2.0 * hx);
            dy[a] = (eta[yp + a] - eta[ym + a]) / (2.0 * hy);
            lap[a] = (eta[xp + a] - 2.0 * eta[c + a] + eta[xm + a]) / (hx * hx)
                + (eta[yp + a] - 2.0 * eta[c + a] + eta[ym + a]) / (hy * hy);
        }
        (dx, dy, lap)
    }
}
