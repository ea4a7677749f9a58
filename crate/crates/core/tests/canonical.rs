use obkit::canonical::{
    eval_quadruple, gamma_to_params, measurable_spec, multiplicative_quadruple, residual,
};
use obkit::lattice::{lattice_spec, rational, LatticeAdditive, QSqrt2};
use obkit::{Error, OBParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> impl Strategy<Value = OBParams> {
    prop::array::uniform6(-10.0f64..10.0)
        .prop_map(|[l, k1, k2, a, b, g]| OBParams::new(l, k1, k2, a, b, g).unwrap())
}

fn log_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|k| lo * (step * k as f64).exp()).collect()
}

// Written out from the closed form, independent of the library evaluator.
fn oracle(p: &OBParams, x: f64) -> [f64; 4] {
    let (l, k1, k2) = (p.lambda(), p.kappa1(), p.kappa2());
    [
        l * x + k1 * x.ln() + p.alpha(),
        l * x + k2 * x.ln() + p.beta(),
        l * x + (k1 + k2) * x.ln() + p.gamma(),
        k1 * (x / (x + 1.0)).ln() - k2 * x.ln_1p() + p.delta(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn identity_holds_on_log_grid(p in params()) {
        let g = log_grid(200, 1e-3, 1e3);
        for &x in &g {
            for &y in &g {
                let [a, _, _, _] = oracle(&p, x);
                let [_, b, _, _] = oracle(&p, y);
                let [_, _, c, _] = oracle(&p, x + y);
                let [_, _, _, d] = oracle(&p, x / y);
                let scale = 1.0 + a.abs() + b.abs() + c.abs() + d.abs();
                let r = residual(&p, x, y).unwrap();
                prop_assert!(r.abs() <= 1e-10 * scale, "x={x} y={y} r={r}");
                prop_assert!((a + b - c - d).abs() <= 1e-10 * scale);
            }
        }
    }
}

proptest! {
    #[test]
    fn evaluator_matches_closed_form(p in params(), x in 1e-3f64..1e3) {
        let v = eval_quadruple(&p, x).unwrap();
        let o = oracle(&p, x);
        for (got, want) in [v.a, v.b, v.c, v.d].into_iter().zip(o) {
            prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn multiplicative_form_is_a_product_identity(
        p in prop::array::uniform6(-3.0f64..3.0)
            .prop_map(|[l, k1, k2, a, b, g]| OBParams::new(l, k1, k2, a, b, g).unwrap()),
        x in 1e-2f64..50.0,
        y in 1e-2f64..50.0,
    ) {
        let m = |t: f64| multiplicative_quadruple(&p, t);
        match (m(x), m(y), m(x + y), m(x / y)) {
            (Ok(mx), Ok(my), Ok(ms), Ok(mq)) => {
                let lhs = mx.a * my.b;
                let rhs = ms.c * mq.d;
                prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
            }
            (rx, ry, rs, rq) => {
                for r in [rx, ry, rs, rq] {
                    if let Err(e) = r {
                        prop_assert!(matches!(e, Error::Overflow(_)), "{e}");
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_parameters_read_back(p in 0.05f64..20.0, q in 0.05f64..20.0, rate in 0.05f64..20.0) {
        let (s1, s2, r) = gamma_to_params(p, q, rate).unwrap().gamma_shapes();
        prop_assert!((s1 - p).abs() <= 1e-12 * p);
        prop_assert!((s2 - q).abs() <= 1e-12 * q);
        prop_assert!((r - rate).abs() <= 1e-12 * rate);
    }
}

#[test]
fn measurable_general_form_agrees_with_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut draw = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let p = OBParams::new(draw(-10.0, 10.0), draw(-10.0, 10.0), draw(-10.0, 10.0), draw(-10.0, 10.0), draw(-10.0, 10.0), draw(-10.0, 10.0))
        .unwrap();
    let spec = measurable_spec(&p);
    for _ in 0..1000 {
        let x = 10f64.powf(draw(-3.0, 3.0));
        let g = spec.eval(&x).unwrap();
        let q = eval_quadruple(&p, x).unwrap();
        for (u, v) in [(g.a, q.a), (g.b, q.b), (g.c, q.c), (g.d, q.d)] {
            assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()), "x={x}: {u} vs {v}");
        }
    }
}

#[test]
fn lattice_double_is_additive_on_a_coefficient_box() {
    let a = LatticeAdditive::new(rational(3, 1), rational(5, 1));
    let mut points = Vec::new();
    for r in -25..25 {
        for s in -25..25 {
            let x = QSqrt2::new(rational(r, 3), rational(s, 2));
            if x.is_positive() {
                points.push(x);
            }
        }
    }
    let mut tested = 0usize;
    for x in &points {
        for y in points.iter().step_by(7) {
            let lhs = a.eval(&(x.clone() + y.clone())).unwrap();
            let rhs = a.eval(x).unwrap() + a.eval(y).unwrap();
            assert_eq!(lhs, rhs, "x={x} y={y}");
            tested += 1;
        }
    }
    assert!(tested > 100_000);

    let spec = lattice_spec(a, None, None, rational(0, 1), rational(0, 1), rational(0, 1));
    let pairs: Vec<(QSqrt2, QSqrt2)> = points.iter().zip(points.iter().rev()).map(|(x, y)| (x.clone(), y.clone())).collect();
    let check = spec.check_additive(&pairs);
    assert_eq!(check.pairs_declined, 0);
    assert!(check.worst.is_none());
}
