//! Monte-Carlo check of the Lukacs tolerance bands.
//!
//! `cargo run --release -p obkit-core --example lukacs_bands -- [seeds] [n]`

use std::time::Instant;

use obkit::lukacs::{characterize, LukacsConfig, SamplePair};

fn main() {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let cfg = LukacsConfig::default();

    for (name, pair, truth) in [
        ("gamma(2,1) x gamma(3,1)", SamplePair::gamma(2.0, 3.0, 1.0).unwrap(), Some((2.0, 3.0, 1.0))),
        ("exp(1) x exp(1)", SamplePair::gamma(1.0, 1.0, 1.0).unwrap(), Some((1.0, 1.0, 1.0))),
        ("lognormal(0,1)", SamplePair::Lognormal { mu: 0.0, sigma: 1.0 }, None),
    ] {
        println!("== {name}");
        let mut hits = 0;
        let mut worst = [0.0f64; 3];
        for seed in 1..=seeds {
            let t = Instant::now();
            let (x, y) = pair.draw(n, seed).unwrap();
            let cfg = LukacsConfig { test_seed: seed, ..cfg.clone() };
            let out = characterize(&x, &y, &cfg).unwrap();
            let p = out.independence_pvalue();
            match (out.estimate(), truth) {
                (Some(e), Some((sx, sy, r))) => {
                    let err = [(e.shape_x - sx).abs(), (e.shape_y - sy).abs(), (e.rate - r).abs()];
                    for k in 0..3 {
                        worst[k] = worst[k].max(err[k]);
                    }
                    let ok = err[0] <= 0.15 && err[1] <= 0.15 && err[2] <= 0.10;
                    hits += ok as u32;
                    println!(
                        "seed {seed:3} p={p:.3} shapes=({:.4}, {:.4}) rate={:.4} {} [{:.2}s]",
                        e.shape_x,
                        e.shape_y,
                        e.rate,
                        if ok { "in" } else { "OUT" },
                        t.elapsed().as_secs_f64()
                    );
                }
                (None, None) => {
                    hits += 1;
                    println!("seed {seed:3} p={p:.4} rejected [{:.2}s]", t.elapsed().as_secs_f64());
                }
                (Some(e), None) => println!("seed {seed:3} p={p:.4} NOT rejected ({:.3}, {:.3}, {:.3})", e.shape_x, e.shape_y, e.rate),
                (None, Some(_)) => println!("seed {seed:3} p={p:.4} wrongly rejected"),
            }
        }
        println!("{hits}/{seeds} as expected; worst errors {worst:?}");
    }
}
