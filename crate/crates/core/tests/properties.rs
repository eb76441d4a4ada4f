use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;

use torsion_harmonic::field::initial::smooth_random_field;
use torsion_harmonic::field::{tension, tension_tor, GridDomain, MapState};
use torsion_harmonic::geodesic::{geodesic_rhs, GeodesicState};
use torsion_harmonic::geometry::torsion::{full_antisymmetrization, skew_last_two};
use torsion_harmonic::geometry::{cartan_decompose, Chart, TorsionCoeffs, TorsionField};
use torsion_harmonic::jacobi::form_gap;
use torsion_harmonic::tensor::Tensor3;
use torsion_harmonic::verify::conformal_domain_residual;

fn tensor(n: usize) -> impl Strategy<Value = Tensor3> {
    prop::collection::vec(-1.0..1.0f64, n * n * n).prop_map(move |v| Tensor3::from_vec(n, v))
}

fn metric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-0.4..0.4f64, n * n).prop_map(move |v| {
        let b = DMatrix::from_vec(n, n, v);
        DMatrix::identity(n, n) + &b * b.transpose()
    })
}

fn torus(n: usize) -> GridDomain {
    GridDomain::new(n, n, 2.0 * PI, 2.0 * PI).unwrap()
}

fn sphere_map(seed: u64, amplitude: f64) -> MapState {
    let d = torus(12);
    let eta = smooth_random_field(d, 2, amplitude, seed);
    MapState::from_fn(d, Chart::sphere2(), |x, y| {
        vec![PI / 2.0 + 0.2 * (x + y).sin(), x]
    })
    .unwrap()
    .perturbed(&eta, 1.0)
    .unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evaluated_coefficients_are_skew_adjoint(
        v in prop::collection::vec(-2.0..2.0f64, 2),
        theta in 0.3..2.8f64,
        phi in 0.0..6.0f64,
    ) {
        let chart = Chart::sphere2();
        let y = [theta, phi];
        for field in [
            TorsionField::vectorial_const(v.clone()),
            TorsionField::general(|y| Tensor3::from_fn(2, |a, b, c| (a + 2 * b) as f64 * y[0] - c as f64)),
        ] {
            prop_assert!(field.eval(&chart, &y).unwrap().skew_violation() < 1e-12);
        }
    }

    #[test]
    fn decomposition_is_idempotent((h, t) in (3usize..6).prop_flat_map(|n| (metric(n), tensor(n)))) {
        let n = h.nrows();
        let hinv = h.clone().try_inverse().unwrap();
        let a = TorsionCoeffs::from_lowered(skew_last_two(&t), &hinv);
        let d = cartan_decompose(&a, &h).unwrap();
        for part in [&d.vectorial_part, &d.antisymmetric_part, &d.cartan_part] {
            let again = cartan_decompose(part, &h).unwrap();
            prop_assert!(again.sum().max_abs_diff(&part.lowered) < 1e-12);
            let hits = [&again.vectorial_part, &again.antisymmetric_part, &again.cartan_part]
                .iter()
                .filter(|p| p.lowered.max_abs_diff(&Tensor3::zeros(n)) > 1e-12)
                .count();
            prop_assert!(hits <= 1);
        }
    }

    #[test]
    fn geodesic_rhs_is_affine_in_the_torsion(
        t in tensor(2),
        y in prop::collection::vec(0.3..2.8f64, 2),
        v in prop::collection::vec(-1.0..1.0f64, 2),
    ) {
        let chart = Chart::sphere2();
        let state = GeodesicState { gamma: y, gamma_prime: v };
        let plus = TorsionField::general(move |_| t.clone());
        let minus = plus.scaled(-1.0);
        let a = geodesic_rhs(&chart, &plus, &state).unwrap();
        let b = geodesic_rhs(&chart, &minus, &state).unwrap();
        let c = geodesic_rhs(&chart, &TorsionField::Zero, &state).unwrap();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let twice: Vec<f64> = c.iter().map(|x| 2.0 * x).collect();
        prop_assert!(max_diff(&sum, &twice) < 1e-12);
    }

    #[test]
    fn zero_torsion_tension_is_bitwise_levi_civita(seed in any::<u64>()) {
        let map = sphere_map(seed, 0.2);
        prop_assert_eq!(tension_tor(&map, &TorsionField::Zero).unwrap(), tension(&map).unwrap());
    }

    #[test]
    fn totally_antisymmetric_torsion_leaves_the_tension(t in tensor(3), seed in any::<u64>()) {
        let d = torus(10);
        let map = MapState::new(d, Chart::flat(3), smooth_random_field(d, 3, 1.0, seed)).unwrap();
        let s = full_antisymmetrization(&t);
        let field = TorsionField::antisymmetric(move |_| s.clone());
        prop_assert!(max_diff(&tension_tor(&map, &field).unwrap(), &tension(&map).unwrap()) < 1e-12);
    }

    #[test]
    fn constant_domain_rescaling_scales_the_tension(
        seed in any::<u64>(),
        u in -1.5..1.5f64,
        v in prop::collection::vec(-1.0..1.0f64, 2),
    ) {
        let map = sphere_map(seed, 0.2);
        let (t, a) = conformal_domain_residual(&map, &TorsionField::vectorial_const(v), u).unwrap();
        prop_assert!(t < 1e-12 && a < 1e-12, "{t} {a}");
    }

    #[test]
    fn jacobi_forms_differ_by_the_residual_torsion(seed in any::<u64>(), v in prop::collection::vec(-1.0..1.0f64, 2)) {
        let map = sphere_map(seed, 0.2);
        let eta = smooth_random_field(map.domain, 2, 0.5, seed.wrapping_add(1));
        prop_assert!(form_gap(&map, &TorsionField::vectorial_const(v), &eta).unwrap() < 1e-6);
    }
}
