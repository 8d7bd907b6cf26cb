//! Property tests for the structural invariants: CSV round-trips, inverse
//! involution, spectral identities, and causality nonnegativity over
//! randomly drawn stable models.

use proptest::prelude::*;

use lgc_core::*;

fn stable_params() -> impl Strategy<Value = VarParams> {
    // coefficients drawn small enough to stay well inside the stable
    // region; innovation covariance through its Cholesky factor
    (
        prop::collection::vec(-0.45f64..0.45, 4),
        0.4f64..1.6,
        -0.6f64..0.6,
        0.4f64..1.6,
    )
        .prop_filter_map("stable", |(a_entries, l11, l21, l22)| {
            let a = RMat::from_rows(&[
                vec![a_entries[0], a_entries[1]],
                vec![a_entries[2], a_entries[3]],
            ]);
            let l = RMat::from_rows(&[vec![l11, 0.0], vec![l21, l22]]);
            let s = l.mul(&l.transpose());
            VarParams::new(a, s).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_preserves_values(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)
    ) {
        let panel = TimeSeriesPanel::new(RMat::from_rows(&rows), None).unwrap();
        let back = parse_csv(&render_csv(&panel)).unwrap();
        prop_assert_eq!(panel.values(), back.values());
    }

    #[test]
    fn inverse_is_an_involution(params in stable_params()) {
        // cinv ∘ cinv = identity on well-conditioned inputs
        let f = var_spectral_density(&params, 0.73).unwrap();
        let ff = cinv(&cinv(&f).unwrap()).unwrap();
        prop_assert!(ff.sub(&f).max_abs() < 1e-9 * f.max_abs().max(1.0));
    }

    #[test]
    fn density_determinant_matches_eigenvalue_product(params in stable_params()) {
        let f = var_spectral_density(&params, 1.1).unwrap();
        let (vals, _) = hermitian_eigen(&f.hermitize()).unwrap();
        let prod: f64 = vals.iter().product();
        let det = cdet(&f).re;
        prop_assert!((det - prod).abs() <= 1e-8 * prod.abs().max(1e-12));
    }

    #[test]
    fn psd_sqrt_commutes_with_argument(params in stable_params()) {
        let s = params.s().to_cmat();
        let r = psd_sqrt(&s).unwrap();
        let defect = r.mul(&s).sub(&s.mul(&r)).max_abs();
        prop_assert!(defect < 1e-9 * s.max_abs().max(1.0));
    }

    #[test]
    fn gc_is_nonnegative_and_sign_invariant(params in stable_params()) {
        let part = Partition::new(1, 1).unwrap();
        let grid = FreqGrid::new(128).unwrap();
        let gc = gc_measure(&params, &part, &grid).unwrap().gc;
        prop_assert!(gc >= -1e-10);
        let flipped = VarParams::new(params.a().scale(-1.0), params.s().clone()).unwrap();
        let gc_flipped = gc_measure(&flipped, &part, &grid).unwrap().gc;
        prop_assert!((gc - gc_flipped).abs() < 1e-9 * gc.abs().max(1.0));
    }

    #[test]
    fn kernel_weights_have_compact_support_and_unit_mass(
        b in 0.05f64..1.0,
        u in 0.0f64..1.0,
        t_len in 50usize..400
    ) {
        let spec = KernelSpec::epanechnikov(b).unwrap();
        let w = kernel_weights(&spec, u, t_len);
        prop_assert_eq!(w.len(), t_len);
        for (k0, &wk) in w.iter().enumerate() {
            prop_assert!(wk >= 0.0);
            if ((u - (k0 + 1) as f64 / t_len as f64) / b).abs() > 1.0 {
                prop_assert_eq!(wk, 0.0);
            }
        }
        // interior mass is a Riemann sum of a unit-mass kernel
        if u - b >= 0.05 && u + b <= 0.95 && b * t_len as f64 >= 25.0 {
            let mass: f64 = w.iter().sum();
            prop_assert!((mass - 1.0).abs() < 0.02, "mass {}", mass);
        }
    }

    #[test]
    fn simulated_panels_are_finite_and_deterministic(seed in 0u64..1000) {
        let spec = ModelKind::ModelI.tv_var_spec(seed);
        let a = simulate_tvvar(&spec, 64).unwrap();
        let b = simulate_tvvar(&spec, 64).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }
}
