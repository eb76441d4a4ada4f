use crate::error::{Error, Result};
use crate::geometry::TorsionField;
use crate::tensor::{inner, Tensor3};

use super::grid::{MapJets, MapState};

/// `t(dφ(e_x), dφ(e_x)) + t(dφ(e_y), dφ(e_y))`.
pub(crate) fn trace_pair(t: &Tensor3, dx: &[f64], dy: &[f64]) -> Vec<f64> {
    let mut out = t.contract(dx, dx);
    for (o, v) in out.iter_mut().zip(t.contract(dy, dy)) {
        *o += v;
    }
    out
}

/// Tension field `τ(φ) = g^{ij}(∂_i∂_jφ + Γ(∂_iφ, ∂_jφ))`, node-major.
pub fn tension(map: &MapState) -> Result<Vec<f64>> {
    let jets = MapJets::new(map);
    tension_with_jets(map, &jets)
}

pub(crate) fn tension_with_jets(map: &MapState, jets: &MapJets) -> Result<Vec<f64>> {
    let n = map.dim();
    let ginv = 1.0 / map.domain.metric_scale;
    let mut out = Vec::with_capacity(map.values.len());
    for k in 0..map.domain.nodes() {
        let gamma = map.chart.christoffel(map.node(k))?;
        let quad = trace_pair(&gamma, jets.dx(k), jets.dy(k));
        let lap = jets.laplacian(k);
        out.extend((0..n).map(|a| ginv * (lap[a] + quad[a])));
    }
    Ok(out)
}

/// `τ^tor(φ) = τ(φ) + g^{ij} A(∂_iφ, ∂_jφ)`, node-major.
pub fn tension_tor(map: &MapState, field: &TorsionField) -> Result<Vec<f64>> {
    let jets = MapJets::new(map);
    let mut tau = tension_with_jets(map, &jets)?;
    if field.is_zero() {
        return Ok(tau);
    }
    let n = map.dim();
    let ginv = 1.0 / map.domain.metric_scale;
    for k in 0..map.domain.nodes() {
        let a = field.eval(&map.chart, map.node(k))?;
        let quad = trace_pair(&a.raised, jets.dx(k), jets.dy(k));
        for (t, q) in tau[k * n..(k + 1) * n].iter_mut().zip(quad) {
            *t += ginv * q;
        }
    }
    Ok(tau)
}

/// Torsion contribution `g^{ij} A(∂_iφ, ∂_jφ)` alone.
pub fn torsion_term(map: &MapState, field: &TorsionField) -> Result<Vec<f64>> {
    let jets = MapJets::new(map);
    let n = map.dim();
    let ginv = 1.0 / map.domain.metric_scale;
    let mut out = vec![0.0; map.values.len()];
    if field.is_zero() {
        return Ok(out);
    }
    for k in 0..map.domain.nodes() {
        let a = field.eval(&map.chart, map.node(k))?;
        for (o, q) in
            out[k * n..(k + 1) * n]
                .iter_mut()
                .zip(trace_pair(&a.raised, jets.dx(k), jets.dy(k)))
        {
            *o = ginv * q;
        }
    }
    Ok(out)
}

/// Energy owned by each node: the two forward edges, metric evaluated at
/// the edge midpoint.
pub fn node_energies(map: &MapState) -> Vec<f64> {
    let d = &map.domain;
    let n = map.dim();
    let (hx, hy) = (d.hx(), d.hy());
    let area = d.cell_area();
    let edge = |k: usize, nb: usize, h: f64| {
        let p = map.node(k);
        let diff: Vec<f64> = (0..n)
            .map(|a| map.chart.coord_diff(a, p[a], map.node(nb)[a]))
            .collect();
        let mid: Vec<f64> = p.iter().zip(&diff).map(|(v, dv)| v + 0.5 * dv).collect();
        inner(&map.chart.metric_unchecked(&mid), &diff, &diff) / (h * h)
    };
    (0..d.nodes())
        .map(|k| (edge(k, d.shift(k, 1, 0), hx) + edge(k, d.shift(k, 0, 1), hy)) * area)
        .collect()
}

/// `E(φ) = ∫ |dφ|² dvol_g`. In two domain dimensions the conformal factor of
/// the domain metric cancels.
pub fn dirichlet_energy(map: &MapState) -> f64 {
    node_energies(map).iter().sum()
}

/// Energy restricted to the nodes selected by `mask`.
pub fn local_energy(map: &MapState, mask: &[bool]) -> Result<f64> {
    if mask.len() != map.domain.nodes() {
        return Err(Error::Validation(format!(
            "mask has {} entries, grid has {} nodes",
            mask.len(),
            map.domain.nodes()
        )));
    }
    Ok(node_energies(map)
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(e, _)| e)
        .sum())
}

/// `sup_{x, r} (∫_{B_r(x)} |dφ|²)^{1/2}` over grid centres and the given radii,
/// with balls measured in the periodic coordinate distance.
pub fn morrey_norm(map: &MapState, radii: &[f64]) -> Result<f64> {
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::Validation(format!(
            "radius must be positive, got {r}"
        )));
    }
    let d = &map.domain;
    let energies = node_energies(map);
    let periodic = |i: usize, len: usize, h: f64| (i.min(len - i)) as f64 * h;
    let mut best: f64 = 0.0;
    for &r in radii {
        let offsets: Vec<(isize, isize)> = (0..d.nx)
            .flat_map(|i| (0..d.ny).map(move |j| (i, j)))
            .filter(|&(i, j)| periodic(i, d.nx, d.hx()).hypot(periodic(j, d.ny, d.hy())) <= r)
            .map(|(i, j)| (i as isize, j as isize))
            .collect();
        for c in 0..d.nodes() {
            let s: f64 = offsets
                .iter()
                .map(|&(di, dj)| energies[d.shift(c, di, dj)])
                .sum();
            best = best.max(s.sqrt());
        }
    }
    Ok(best)
}

/// Grid pairing `Σ_k h(φ_k)(p_k, q_k) dvol`.
pub fn grid_pairing(map: &MapState, p: &[f64], q: &[f64]) -> Result<f64> {
    let n = map.dim();
    let dvol = map.domain.metric_scale * map.domain.cell_area();
    let mut s = 0.0;
    for k in 0..map.domain.nodes() {
        let h = map.chart.metric(map.node(k))?;
        s += inner(&h, &p[k * n..(k + 1) * n], &q[k * n..(k + 1) * n]);
    }
    Ok(s * dvol)
}

fn check_step(t: f64) -> Result<()> {
    if !(1e-6..=1e-2).contains(&t) {
        return Err(Error::Validation(format!(
            "step t must lie in [1e-6, 1e-2], got {t}"
        )));
    }
    Ok(())
}

/// `|(E(φ + t p) − E(φ))/t + 2⟨p, τ(φ)⟩|`.
///
/// `E = ∫|dφ|²` has first variation `−2⟨p, τ⟩`. Neither side depends on the
/// torsion field, which is accepted only to make that explicit.
pub fn energy_gradient_check(
    map: &MapState,
    _field: &TorsionField,
    probe: &[f64],
    t: f64,
) -> Result<f64> {
    check_step(t)?;
    let moved = map.perturbed(probe, t)?;
    let slope = (dirichlet_energy(&moved) - dirichlet_energy(map)) / t;
    let pairing = grid_pairing(map, probe, &tension(map)?)?;
    Ok((slope + 2.0 * pairing).abs())
}

/// Symmetric-difference variant `|(E(φ + t p) − E(φ − t p))/(2t) + 2⟨p, τ(φ)⟩|`,
/// whose remainder is second order in `t`.
pub fn energy_gradient_check_central(
    map: &MapState,
    _field: &TorsionField,
    probe: &[f64],
    t: f64,
) -> Result<f64> {
    check_step(t)?;
    let plus = map.perturbed(probe, t)?;
    let minus = map.perturbed(probe, -t)?;
    let slope = (dirichlet_energy(&plus) - dirichlet_energy(&minus)) / (2.0 * t);
    let pairing = grid_pairing(map, probe, &tension(map)?)?;
    Ok((slope + 2.0 * pairing).abs())
}
