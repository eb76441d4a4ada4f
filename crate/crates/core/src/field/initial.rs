use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Chart;

use super::grid::{GridDomain, MapState};

/// Highest Fourier index used by [`smooth_random_field`].
pub const MAX_MODE: i32 = 2;

pub fn constant_map(domain: GridDomain, chart: Chart, point: &[f64]) -> Result<MapState> {
    if point.len() != chart.dim() {
        return Err(Error::Validation(format!(
            "point has {} coordinates, chart has {}",
            point.len(),
            chart.dim()
        )));
    }
    MapState::from_fn(domain, chart, |_, _| point.to_vec())
}

/// `(θ, φ) = (π/2, 2πk·x/lx)` into the sphere, reduced to `[0, 2π)`.
pub fn equator_wrap(domain: GridDomain, winding: i64) -> Result<MapState> {
    MapState::from_fn(domain, Chart::sphere2(), |x, _| {
        vec![
            PI / 2.0,
            (TAU * winding as f64 * x / domain.lx).rem_euclid(TAU),
        ]
    })
}

/// Zero-mean trigonometric field with Fourier indices in `[-MAX_MODE, MAX_MODE]²`,
/// scaled to sup-norm `amplitude`. Component `a` draws its coefficients from
/// ChaCha stream `a` of `seed`, so the result does not depend on evaluation order.
pub fn smooth_random_field(
    domain: GridDomain,
    components: usize,
    amplitude: f64,
    seed: u64,
) -> Vec<f64> {
    let mut out = vec![0.0; domain.nodes() * components];
    for a in 0..components {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(a as u64);
        let mut modes = Vec::new();
        for p in -MAX_MODE..=MAX_MODE {
            for q in -MAX_MODE..=MAX_MODE {
                if (p, q) != (0, 0) {
                    modes.push((
                        p,
                        q,
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ));
                }
            }
        }
        for k in 0..domain.nodes() {
            let (x, y) = domain.coords(k);
            out[k * components + a] = modes
                .iter()
                .map(|&(p, q, c, s)| {
                    let arg = TAU * (p as f64 * x / domain.lx + q as f64 * y / domain.ly);
                    c * arg.cos() + s * arg.sin()
                })
                .sum();
        }
    }
    let sup = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup > 0.0 {
        out.iter_mut().for_each(|v| *v *= amplitude / sup);
    }
    out
}

/// `base + smooth_random_field(amplitude, seed)`.
pub fn perturbed(base: &MapState, amplitude: f64, seed: u64) -> Result<MapState> {
    let eta = smooth_random_field(base.domain, base.dim(), amplitude, seed);
    base.perturbed(&eta, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_field_is_reproducible_and_zero_mean() {
        let d = GridDomain::new(16, 12, 2.0, 3.0).unwrap();
        let a = smooth_random_field(d, 2, 0.1, 7);
        assert_eq!(a, smooth_random_field(d, 2, 0.1, 7));
        assert_ne!(a, smooth_random_field(d, 2, 0.1, 8));
        for c in 0..2 {
            let mean: f64 = a.iter().skip(c).step_by(2).sum::<f64>() / d.nodes() as f64;
            assert!(mean.abs() < 1e-15);
        }
        let sup = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((sup - 0.1).abs() < 1e-15);
    }

    #[test]
    fn equator_wrap_stays_in_the_principal_branch() {
        let d = GridDomain::new(8, 4, TAU, TAU).unwrap();
        let m = equator_wrap(d, 3).unwrap();
        assert!(m.values.iter().all(|v| (0.0..TAU).contains(v)));
    }
}
