use num_complex::Complex64;
use proptest::prelude::*;
use stellar_core::fock::{fidelity, inner, project_rank, tensor, trace_distance_pure, FockState};
use stellar_core::ops::{apply_circuit, displacement_matrix, rotation_matrix, squeezing_matrix, GaussianCircuit};

fn amps(dim: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn single_mode(cutoff: usize) -> impl Strategy<Value = FockState> {
    amps(cutoff + 1).prop_map(move |a| FockState::normalized(1, cutoff, a, 0.0).unwrap())
}

/// A state supported on `|k| <= support` but stored at a larger cutoff, so
/// moderate Gaussian operations do not push it out of range.
fn low_state(support: usize, cutoff: usize) -> impl Strategy<Value = FockState> {
    amps(support + 1).prop_map(move |mut a| {
        a.resize(cutoff + 1, Complex64::new(0.0, 0.0));
        FockState::normalized(1, cutoff, a, 0.0).unwrap()
    })
}

fn block_unitarity_error(m: &nalgebra::DMatrix<Complex64>, block: usize) -> f64 {
    let prod = m.adjoint() * m;
    let mut worst: f64 = 0.0;
    for i in 0..=block {
        for j in 0..=block {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fidelity_triangle_bound(a in single_mode(5), b in single_mode(5), t in single_mode(5)) {
        let gap = (fidelity(&a, &t).unwrap() - fidelity(&b, &t).unwrap()).abs();
        let d = trace_distance_pure(&a, &b).unwrap();
        prop_assert!(gap <= d + 1e-12, "gap {gap} > D {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in single_mode(6), b in single_mode(6)) {
        let fab = fidelity(&a, &b).unwrap();
        let fba = fidelity(&b, &a).unwrap();
        prop_assert!((fab - fba).abs() < 1e-14);
        prop_assert!((-1e-14..=1.0 + 1e-12).contains(&fab));
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_is_a_metric(a in single_mode(4), b in single_mode(4), c in single_mode(4)) {
        let ab = trace_distance_pure(&a, &b).unwrap();
        let bc = trace_distance_pure(&b, &c).unwrap();
        let ac = trace_distance_pure(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn tensor_products_multiply_overlaps(
        a in single_mode(3), b in single_mode(3), c in single_mode(3), d in single_mode(3)
    ) {
        let left = inner(&tensor(&a, &b).unwrap(), &tensor(&c, &d).unwrap()).unwrap();
        let right = inner(&a, &c).unwrap() * inner(&b, &d).unwrap();
        prop_assert!((left - right).norm() < 1e-12);
        prop_assert!((tensor(&a, &b).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_projection_weight_is_monotone(a in single_mode(8)) {
        let mut prev = 0.0;
        for n in 0..=8 {
            let w = project_rank(&a, n).unwrap().weight;
            prop_assert!(w >= prev - 1e-15);
            prev = w;
        }
        prop_assert!((prev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fock_serialization_round_trips(a in single_mode(5)) {
        let back = FockState::from_json(&a.to_json()).unwrap();
        prop_assert_eq!(back, a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn displacement_and_rotation_blocks_are_unitary(re in -1.0f64..1.0, im in -1.0f64..1.0, phi in 0.0f64..6.3) {
        // D|30> spreads over ~|α|√61 photons; cutoff 100 keeps its tail below 1e-8.
        let d = displacement_matrix(Complex64::new(re, im), 100);
        prop_assert!(block_unitarity_error(&d, 30) < 1e-8);
        let r = rotation_matrix(phi, 60);
        prop_assert!(block_unitarity_error(&r, 30) < 1e-8);
    }

    #[test]
    fn squeezing_blocks_are_unitary(r in -0.6f64..0.6, phase in 0.0f64..6.3) {
        let s = squeezing_matrix(r, phase, 120).unwrap();
        prop_assert!(block_unitarity_error(&s, 20) < 1e-8);
    }

    #[test]
    fn gaussian_unitaries_preserve_fidelity(
        a in low_state(3, 80), b in low_state(3, 80),
        phi in 0.0f64..6.3, re in -0.8f64..0.8, im in -0.8f64..0.8, r in -0.5f64..0.5
    ) {
        let g = GaussianCircuit::from_params(1, &[phi, re, im, r]).unwrap();
        let ga = apply_circuit(&g, &a).unwrap();
        let gb = apply_circuit(&g, &b).unwrap();
        let before = fidelity(&a, &b).unwrap();
        let after = fidelity(&ga, &gb).unwrap();
        prop_assert!((before - after).abs() < 1e-8, "{before} vs {after}");
    }
}
