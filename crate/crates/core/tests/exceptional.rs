use obkit::exceptional::{
    generate_sparse_mask_2d, scale_mask, unimodular_image, ExceptionalMask1D, Unimodular, DEFAULT_CAP,
};
use obkit::GeometricGrid;
use proptest::prelude::*;

fn grid(n: usize) -> Vec<f64> {
    GeometricGrid { x0: 0.01, rho: 2f64.powf(0.125), n }.points()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), fraction in 0.0f64..0.2) {
        let g = grid(60);
        let m1 = generate_sparse_mask_2d(&g, &g, fraction, seed).unwrap();
        let m2 = generate_sparse_mask_2d(&g, &g, fraction, seed).unwrap();
        prop_assert_eq!(&m1, &m2);
        for i in 0..g.len() {
            for j in 0..g.len() {
                prop_assert_eq!(m1.is_excluded(i, j), m1.is_excluded(i, j));
            }
        }
        let a = ExceptionalMask1D::sparse_random(&g, fraction, DEFAULT_CAP, seed).unwrap();
        prop_assert_eq!(a, ExceptionalMask1D::sparse_random(&g, fraction, DEFAULT_CAP, seed).unwrap());
    }

    #[test]
    fn scaling_round_trip_stays_inside(seed in any::<u64>(), fraction in 0.0f64..0.3, m in -20i32..20) {
        let g = grid(64);
        let mask = generate_sparse_mask_2d(&g, &g, fraction, seed).unwrap();
        let r = 2f64.powf(0.125).powi(m);
        let back = scale_mask(&scale_mask(&mask, r).unwrap(), 1.0 / r).unwrap();
        for (i, j) in back.excluded_pairs() {
            prop_assert!(mask.is_excluded(i, j), "({i}, {j}) appeared at r = {r}");
        }
    }

    #[test]
    fn unimodular_maps_preserve_cardinality(seed in any::<u64>(), fraction in 0.0f64..0.4) {
        let g = grid(40);
        let mask = generate_sparse_mask_2d(&g, &g, fraction, seed).unwrap();
        let n = mask.excluded_count();
        for t in [Unimodular::T1, Unimodular::T2, Unimodular::T3] {
            let img = unimodular_image(&mask, t);
            prop_assert_eq!(img.len(), n);
            let mut keys: Vec<(u64, u64)> = img.iter().map(|(x, y)| (x.to_bits(), y.to_bits())).collect();
            keys.sort_unstable();
            keys.dedup();
            prop_assert_eq!(keys.len(), n);
        }
    }

    #[test]
    fn one_dimensional_masks_respect_the_cap(fraction in 0.0f64..0.49, cap in 0.0f64..0.49, seed in any::<u64>()) {
        let g = grid(100);
        match ExceptionalMask1D::sparse_random(&g, fraction, cap, seed) {
            Ok(m) => {
                prop_assert!(fraction <= cap);
                prop_assert_eq!(m.excluded_count(), (fraction * 100.0).round() as usize);
            }
            Err(_) => prop_assert!(fraction > cap),
        }
    }

    #[test]
    fn bounded_masks_lie_below_threshold(t in 0.0f64..3.0) {
        let g = grid(64);
        let m = ExceptionalMask1D::bounded(&g, t).unwrap();
        for (i, &x) in g.iter().enumerate() {
            prop_assert_eq!(m.is_excluded(i), x < t);
        }
    }
}

#[test]
fn section_property_holds_for_sparse_masks() {
    for n in [100, 150] {
        let g = grid(n);
        for fraction in [0.01, 0.05, 0.1, 0.15, 0.2] {
            for seed in 0..20 {
                let m = generate_sparse_mask_2d(&g, &g, fraction, seed).unwrap();
                assert!(
                    m.satisfies_section_property(DEFAULT_CAP),
                    "n={n} fraction={fraction} seed={seed}"
                );
            }
        }
    }
}

#[test]
fn fractions_outside_range_rejected() {
    let g = grid(10);
    for f in [-0.1, 0.5, 0.7, f64::NAN] {
        assert!(generate_sparse_mask_2d(&g, &g, f, 1).is_err());
        assert!(ExceptionalMask1D::sparse_random(&g, f, 0.5, 1).is_err());
    }
}
