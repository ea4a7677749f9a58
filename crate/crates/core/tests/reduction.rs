use obkit::canonical::tabulate;
use obkit::exceptional::{corrupt_table, generate_sparse_mask_2d, ExceptionalMask1D, GarbageModel, DEFAULT_CAP};
use obkit::reduction::{default_ratios, difference_function, fit_difference, recover_all, RecoveryConfig, RecoveryReport};
use obkit::exceptional::ExceptionalMask2D;
use obkit::pexider::PexiderConfig;
use obkit::{GeometricGrid, OBParams};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = OBParams> {
    prop::array::uniform6(-10.0f64..10.0)
        .prop_map(|[l, k1, k2, a, b, g]| OBParams::new(l, k1, k2, a, b, g).unwrap())
}

/// Tabulate, corrupt each table at `fraction` with flagged garbage, mask the
/// same fraction of pairs, recover.
fn round_trip(p: &OBParams, fraction: f64, seed: u64) -> RecoveryReport {
    let geo = GeometricGrid::default();
    let g = geo.points();
    let tables = tabulate(p, &g).unwrap();
    let mut bad = Vec::new();
    for (k, t) in tables.iter().enumerate() {
        let s = seed.wrapping_add(k as u64);
        let m = ExceptionalMask1D::sparse_random(&g, fraction, DEFAULT_CAP, s).unwrap();
        bad.push(corrupt_table(t, &m, &GarbageModel::default(), s).unwrap());
    }
    let mask = generate_sparse_mask_2d(&g, &g, fraction, seed.wrapping_add(4)).unwrap();
    recover_all(&bad[0], &bad[1], &bad[2], &bad[3], Some(&mask), &default_ratios(&geo), &RecoveryConfig::default())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn recovery_inverts_tabulation(p in params(), fraction in 0.0f64..=0.2, seed in any::<u64>()) {
        let rep = round_trip(&p, fraction, seed);
        for (got, want) in rep.params.as_array().into_iter().zip(p.as_array()) {
            prop_assert!((got - want).abs() <= 1e-8, "{:?} vs {:?}", rep.params, p);
        }
        prop_assert!(rep.kappa_consistency <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn more_corruption_does_not_move_the_estimate(p in params(), seed in any::<u64>()) {
        let clean = round_trip(&p, 0.0, seed).params;
        for f in [0.05, 0.1, 0.15, 0.2] {
            let dirty = round_trip(&p, f, seed).params;
            prop_assert!(dirty.max_abs_diff(&clean) <= 1e-8, "fraction {f}");
        }
    }

    #[test]
    fn unit_ratio_gives_zero_law(p in params()) {
        let g = GeometricGrid::default().points();
        let [a, b, c, _] = tabulate(&p, &g).unwrap();
        let d = |t| difference_function(t, 1.0, None).unwrap();
        let (da, db, dc) = (d(&a), d(&b), d(&c));
        prop_assert!(da.values.iter().all(|v| *v == 0.0));
        let mask = ExceptionalMask2D::empty(&g, &g).unwrap();
        let fit = fit_difference(1.0, &da, &db, &dc, &mask, &PexiderConfig::default()).unwrap();
        prop_assert_eq!(fit.lambda_r, 0.0);
        prop_assert_eq!(fit.alpha_r, 0.0);
    }

    #[test]
    fn lambda_law_is_linear_in_the_ratio(p in params()) {
        let rep = round_trip(&p, 0.0, 0);
        for fit in &rep.difference_fits {
            prop_assert!((fit.lambda_r - p.lambda() * (fit.r - 1.0)).abs() <= 1e-9);
            prop_assert!((fit.alpha_r - p.kappa1() * fit.r.ln()).abs() <= 1e-9);
        }
        for c in &rep.components {
            prop_assert!(c.lambda_law.max_residual <= 1e-9);
        }
    }
}
