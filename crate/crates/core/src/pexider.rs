//! Recovery of `f(x + y) = g(x) + h(y)` holding off a negligible set.
//!
//! Measurable solutions are `g(x) = A·x + α`, `h(x) = A·x + β`,
//! `f(x) = A·x + α + β`. The slope comes from a repeated-median fit of `g`
//! alone; intercepts are medians of the detrended tables; `f` is used only
//! as a cross-check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exceptional::ExceptionalMask2D;
use crate::grid::{find_index, GridFunction, ABSCISSA_RTOL};
use crate::stats::{line_slope, location, median, FitMode};

/// Fewest unmasked `(x, y)` pairs a fit accepts.
pub const MIN_PAIRS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PexiderConfig {
    pub mode: FitMode,
    /// Absolute residual below which a tabulated point counts as an inlier.
    pub tolerance: f64,
    pub min_pairs: usize,
}

impl Default for PexiderConfig {
    fn default() -> Self {
        PexiderConfig {
            mode: FitMode::Robust,
            tolerance: 1e-8,
            min_pairs: MIN_PAIRS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PexiderFit {
    /// Measurable representative `A(x) = slope·x` of the additive part.
    pub slope: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Fraction of valid tabulated points of `g`, `h`, `f` within tolerance
    /// of the fitted model.
    pub inlier_fraction: f64,
    /// Median absolute deviation from the model over the points used.
    pub residual_median: f64,
    /// `|location(f(s) − slope·s) − (α + β)|`; NaN if `f` has no usable point.
    pub consistency_gap: f64,
    /// Median of `|f(x + y) − g(x) − h(y)|` over unmasked pairs whose sum
    /// lands on `f`'s grid; NaN if there are none.
    pub pair_residual_median: f64,
    pub pairs_checked: usize,
    pub unmasked_pairs: usize,
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= ABSCISSA_RTOL * x.abs().max(y.abs()))
}

/// Fit the Pexider equation from tabulations of `f`, `g`, `h`.
///
/// `mask` lives on `g.grid × h.grid`. Columns (rows) whose section is not
/// negligible are dropped from the `g` (`h`) fit.
pub fn fit_pexider(
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
    mask: &ExceptionalMask2D,
    config: &PexiderConfig,
) -> Result<PexiderFit> {
    const STAGE: &str = "pexider";
    for t in [f, g, h] {
        t.validate()?;
    }
    if !same_grid(&mask.x_grid, &g.grid) || !same_grid(&mask.y_grid, &h.grid) {
        return Err(Error::DomainMismatch(
            "pexider mask grids must match the g and h grids".into(),
        ));
    }

    let cols = mask.negligible_columns();
    let rows = mask.negligible_rows();
    let g_use: Vec<usize> = (0..g.len()).filter(|&i| g.is_valid(i) && cols[i]).collect();
    let h_use: Vec<usize> = (0..h.len()).filter(|&j| h.is_valid(j) && rows[j]).collect();

    let unmasked_pairs = g_use
        .iter()
        .map(|&i| h_use.iter().filter(|&&j| !mask.is_excluded(i, j)).count())
        .sum::<usize>();
    if unmasked_pairs < config.min_pairs {
        return Err(Error::insufficient(STAGE, config.min_pairs, unmasked_pairs));
    }

    let gx: Vec<f64> = g_use.iter().map(|&i| g.grid[i]).collect();
    let gy: Vec<f64> = g_use.iter().map(|&i| g.values[i]).collect();
    if gx.len() < 2 {
        return Err(Error::degenerate(
            STAGE,
            format!("{} unmasked abscissae in g", gx.len()),
        ));
    }
    let slope = line_slope(&gx, &gy, config.mode)
        .ok_or_else(|| Error::degenerate(STAGE, "fewer than 2 distinct abscissae in g"))?;

    let g_det: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| y - slope * x).collect();
    let h_det: Vec<f64> = h_use.iter().map(|&j| h.values[j] - slope * h.grid[j]).collect();
    let alpha = location(&g_det, config.mode).expect("g has points");
    let beta = location(&h_det, config.mode)
        .ok_or_else(|| Error::insufficient(STAGE, 1, 0))?;

    // Exact-sum pairs: the cross-check against f.
    let mut pair_res = Vec::new();
    let mut f_supported = vec![false; f.len()];
    let mut f_reached = vec![false; f.len()];
    for &i in &g_use {
        for &j in &h_use {
            let Some(k) = find_index(&f.grid, g.grid[i] + h.grid[j]) else {
                continue;
            };
            f_reached[k] = true;
            if mask.is_excluded(i, j) {
                continue;
            }
            f_supported[k] = true;
            if f.is_valid(k) {
                pair_res.push((f.values[k] - g.values[i] - h.values[j]).abs());
            }
        }
    }
    // An f point is usable unless every pair reaching it is masked.
    let f_use: Vec<usize> = (0..f.len())
        .filter(|&k| f.is_valid(k) && (f_supported[k] || !f_reached[k]))
        .collect();
    let f_det: Vec<f64> = f_use.iter().map(|&k| f.values[k] - slope * f.grid[k]).collect();
    let consistency_gap = location(&f_det, config.mode)
        .map(|c| (c - (alpha + beta)).abs())
        .unwrap_or(f64::NAN);

    let mut used_res: Vec<f64> = g_det.iter().map(|v| (v - alpha).abs()).collect();
    used_res.extend(h_det.iter().map(|v| (v - beta).abs()));
    used_res.extend(f_det.iter().map(|v| (v - alpha - beta).abs()));
    let residual_median = median(&used_res).unwrap_or(0.0);

    let model = |x: f64, c: f64| slope * x + c;
    let mut total = 0usize;
    let mut inliers = 0usize;
    for (t, c) in [(g, alpha), (h, beta), (f, alpha + beta)] {
        for (x, v) in t.valid_points() {
            total += 1;
            if (v - model(x, c)).abs() <= config.tolerance {
                inliers += 1;
            }
        }
    }

    Ok(PexiderFit {
        slope,
        alpha,
        beta,
        inlier_fraction: if total == 0 { 0.0 } else { inliers as f64 / total as f64 },
        residual_median,
        consistency_gap,
        pair_residual_median: median(&pair_res).unwrap_or(f64::NAN),
        pairs_checked: pair_res.len(),
        unmasked_pairs,
    })
}

/// Fit using only abscissae above `c`: every table point at or below `c` is
/// treated as invalid.
pub fn fit_pexider_tail(
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
    mask: &ExceptionalMask2D,
    c: f64,
    config: &PexiderConfig,
) -> Result<PexiderFit> {
    let cut = |t: &GridFunction| {
        let mut t = t.clone();
        for (x, v) in t.grid.iter().zip(t.valid.iter_mut()) {
            if *x <= c {
                *v = false;
            }
        }
        t
    };
    fit_pexider(&cut(f), &cut(g), &cut(h), mask, config)
}

/// Does a fit from the tail `(c, ∞)` determine the same solution as the fit
/// from the whole grid? Compares slope and both intercepts to
/// `1e−8·(1 + |full|)`.
pub fn halfline_determination_check(fit_tail: &PexiderFit, fit_full: &PexiderFit, c: f64) -> bool {
    debug_assert!(c > 0.0);
    let close = |t: f64, f: f64| (t - f).abs() <= 1e-8 * (1.0 + f.abs());
    close(fit_tail.slope, fit_full.slope)
        && close(fit_tail.alpha, fit_full.alpha)
        && close(fit_tail.beta, fit_full.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exceptional::{generate_sparse_mask_2d, IdealKind};
    use crate::grid::arithmetic_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const STEP: f64 = 0.1;
    const N: usize = 40;

    fn tables(slope: f64, alpha: f64, beta: f64) -> (GridFunction, GridFunction, GridFunction) {
        let xs = arithmetic_grid(STEP, N);
        let ss = arithmetic_grid(STEP, 2 * N);
        let line = |grid: &[f64], c: f64| {
            GridFunction::new(grid.to_vec(), grid.iter().map(|x| slope * x + c).collect()).unwrap()
        };
        (line(&ss, alpha + beta), line(&xs, alpha), line(&xs, beta))
    }

    fn garble(t: &mut GridFunction, fraction: f64, rng: &mut ChaCha8Rng) {
        let k = (fraction * t.len() as f64).round() as usize;
        for i in rand::seq::index::sample(rng, t.len(), k) {
            t.values[i] = rng.random_range(-1e6..1e6);
        }
    }

    fn empty_mask() -> ExceptionalMask2D {
        let xs = arithmetic_grid(STEP, N);
        ExceptionalMask2D::empty(&xs, &xs).unwrap()
    }

    #[test]
    fn linear_construction() {
        let (f, g, h) = tables(2.0, 2.0, 3.0);
        let fit = fit_pexider(&f, &g, &h, &empty_mask(), &PexiderConfig::default()).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.alpha - 2.0).abs() < 1e-12);
        assert!((fit.beta - 3.0).abs() < 1e-12);
        assert_eq!(fit.inlier_fraction, 1.0);
        assert!(fit.consistency_gap < 1e-12);
        assert!(fit.pairs_checked > 0 && fit.pair_residual_median < 1e-12);
    }

    #[test]
    fn all_zero() {
        let (f, g, h) = tables(0.0, 0.0, 0.0);
        let fit = fit_pexider(&f, &g, &h, &empty_mask(), &PexiderConfig::default()).unwrap();
        assert_eq!((fit.slope, fit.alpha, fit.beta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn fifteen_percent_garbage() {
        let (mut f, mut g, mut h) = tables(2.0, 2.0, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for t in [&mut f, &mut g, &mut h] {
            garble(t, 0.15, &mut rng);
        }
        let fit = fit_pexider(&f, &g, &h, &empty_mask(), &PexiderConfig::default()).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-9);
        assert!((fit.alpha - 2.0).abs() < 1e-9);
        assert!((fit.beta - 3.0).abs() < 1e-9);
        assert!((fit.inlier_fraction - 0.85).abs() < 0.01, "{}", fit.inlier_fraction);
        assert!(fit.residual_median < 1e-9);
    }

    #[test]
    fn insufficient_pairs() {
        let xs = arithmetic_grid(STEP, 8);
        let g = GridFunction::new(xs.clone(), vec![0.0; 8]).unwrap();
        let f = GridFunction::new(arithmetic_grid(STEP, 16), vec![0.0; 16]).unwrap();
        let m = ExceptionalMask2D::empty(&xs, &xs).unwrap();
        let err = fit_pexider(&f, &g, &g, &m, &PexiderConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { got: 64, .. }));
    }

    #[test]
    fn degenerate_single_abscissa() {
        let (f, mut g, h) = tables(1.0, 0.0, 0.0);
        for i in 1..N {
            g.valid[i] = false;
        }
        let cfg = PexiderConfig {
            min_pairs: 1,
            ..Default::default()
        };
        let err = fit_pexider(&f, &g, &h, &empty_mask(), &cfg).unwrap_err();
        assert!(matches!(err, Error::DegenerateGrid { .. }));
    }

    #[test]
    fn masked_column_is_dropped() {
        let (f, mut g, h) = tables(-1.5, 0.25, 4.0);
        let xs = arithmetic_grid(STEP, N);
        // the equation fails on a whole vertical line; g is garbage there
        let pairs: Vec<(usize, usize)> = (0..N).map(|j| (3, j)).collect();
        let mask = ExceptionalMask2D::from_pairs(&xs, &xs, &pairs, IdealKind::Finite).unwrap();
        let mut mask = mask;
        mask.fraction = 0.0;
        g.values[3] = 1e9;
        let fit = fit_pexider(&f, &g, &h, &mask, &PexiderConfig::default()).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
        assert!((fit.alpha - 0.25).abs() < 1e-12);
    }

    #[test]
    fn random_mask_does_not_bias() {
        let (f, g, h) = tables(7.0, -3.0, 0.5);
        let xs = arithmetic_grid(STEP, N);
        let mask = generate_sparse_mask_2d(&xs, &xs, 0.2, 9).unwrap();
        let fit = fit_pexider(&f, &g, &h, &mask, &PexiderConfig::default()).unwrap();
        assert!((fit.slope - 7.0).abs() < 1e-9);
        assert!((fit.alpha + 3.0).abs() < 1e-9 && (fit.beta - 0.5).abs() < 1e-9);
    }

    #[test]
    fn least_squares_mode_on_clean_data() {
        let (f, g, h) = tables(1.25, 0.5, -0.5);
        let cfg = PexiderConfig {
            mode: FitMode::LeastSquares,
            ..Default::default()
        };
        let fit = fit_pexider(&f, &g, &h, &empty_mask(), &cfg).unwrap();
        assert!((fit.slope - 1.25).abs() < 1e-10);
    }

    #[test]
    fn halfline_checks() {
        let (f, g, h) = tables(2.0, 1.0, -1.0);
        let mask = empty_mask();
        let cfg = PexiderConfig::default();
        let full = fit_pexider(&f, &g, &h, &mask, &cfg).unwrap();
        let c = 2.0;
        let tail = fit_pexider_tail(&f, &g, &h, &mask, c, &cfg).unwrap();
        assert!(halfline_determination_check(&tail, &full, c));

        let zeroed = PexiderFit { slope: 0.0, ..tail };
        assert!(!halfline_determination_check(&zeroed, &full, c));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut f2, mut g2, mut h2) = (f.clone(), g.clone(), h.clone());
        for t in [&mut f2, &mut g2, &mut h2] {
            // corrupt only the tail
            let tail_idx: Vec<usize> = (0..t.len()).filter(|&i| t.grid[i] > c).collect();
            let k = (0.15 * tail_idx.len() as f64).round() as usize;
            for s in rand::seq::index::sample(&mut rng, tail_idx.len(), k) {
                t.values[tail_idx[s]] = rng.random_range(-1e3..1e3);
            }
        }
        let tail = fit_pexider_tail(&f2, &g2, &h2, &mask, c, &cfg).unwrap();
        assert!(halfline_determination_check(&tail, &full, c));
    }
}
