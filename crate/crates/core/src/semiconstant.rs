//! Deciding whether a tabulated `G` is constant off a negligible set.
//!
//! If `G(xy) = G(y)` for almost all pairs, the profile
//! `w(t) = ∫₀¹ e^{itG(y)} dy` satisfies `x·w(t) = ∫₀ˣ e^{itG(u)} du`, which
//! forces `e^{itG(u)} = w(t)` almost everywhere and hence `|w(t)| = 1`.
//! A non-constant `G` spreads the phases and shrinks `|w(t)|`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::stats::median;

/// Fewest valid points a profile is computed from.
pub const MIN_PROFILE_POINTS: usize = 16;

pub const DEFAULT_T_LIST: [f64; 4] = [1.0, 2.5, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconstantConfig {
    pub t_list: Vec<f64>,
    pub tol: f64,
}

impl SemiconstantConfig {
    /// Tolerance `5·fraction + 1e−4` for tables with the given corruption.
    pub fn for_corruption(fraction: f64) -> Self {
        SemiconstantConfig {
            t_list: DEFAULT_T_LIST.to_vec(),
            tol: 5.0 * fraction + 1e-4,
        }
    }
}

impl Default for SemiconstantConfig {
    fn default() -> Self {
        Self::for_corruption(0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiconstantVerdict {
    pub is_semiconstant: bool,
    /// Median of the valid table values.
    pub kappa_estimate: f64,
    /// `max_t |1 − |w(t)||`
    pub profile_deviation: f64,
    /// `max_t |x·w(t) − ∫₀ˣ e^{itG}|` at `x = 1/2`.
    pub scaling_deviation: f64,
    /// `arg w(t)/t` at the smallest tested `|t|`; diagnostic only, ambiguous
    /// once `|κt| ≥ π`.
    pub phase_kappa: f64,
}

/// Trapezoid weights for the grid points in `(0, upper]`, with `[0, x₀]`
/// and `[x_last, upper]` attached to the end points. Returns the indices
/// covered and their weights.
fn weights(grid: &[f64], upper: f64) -> (Vec<usize>, Vec<f64>) {
    let idx: Vec<usize> = (0..grid.len())
        .filter(|&i| grid[i] <= upper * (1.0 + 1e-12))
        .collect();
    let xs: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
    let m = xs.len();
    let mut w = vec![0.0; m];
    if m == 0 {
        return (idx, w);
    }
    w[0] += xs[0];
    for k in 0..m.saturating_sub(1) {
        let half = 0.5 * (xs[k + 1] - xs[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    w[m - 1] += (upper - xs[m - 1]).max(0.0);
    (idx, w)
}

/// Renormalised mean of `e^{itG}` over the valid points in `(0, upper]`.
fn profile_mean(g: &GridFunction, t: f64, upper: f64) -> Result<Complex64> {
    g.validate()?;
    let last = *g.grid.last().expect("validated grid is non-empty");
    if last < upper * (1.0 - 1e-9) {
        return Err(Error::InvalidGrid(format!(
            "grid ends at {last}, does not cover (0, {upper}]"
        )));
    }
    let (idx, w) = weights(&g.grid, upper);
    let mut total = 0.0;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut count = 0;
    for (&i, &wi) in idx.iter().zip(&w) {
        if g.is_valid(i) {
            total += wi;
            acc += wi * Complex64::from_polar(1.0, t * g.values[i]);
            count += 1;
        }
    }
    if count < MIN_PROFILE_POINTS || total <= 0.0 {
        return Err(Error::insufficient("semiconstant", MIN_PROFILE_POINTS, count));
    }
    Ok(acc / total)
}

/// `w(t) = ∫₀¹ e^{itG(y)} dy` by composite trapezoid over the valid points,
/// renormalised by their total weight.
pub fn characteristic_profile(g: &GridFunction, t: f64) -> Result<Complex64> {
    profile_mean(g, t, 1.0)
}

/// `|x·w(t) − ∫₀ˣ e^{itG(u)} du|`, with both integrals by the same quadrature.
pub fn scaling_consistency(g: &GridFunction, x: f64, t: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("x = {x} must be positive")));
    }
    let w = characteristic_profile(g, t)?;
    let partial = profile_mean(g, t, x)? * x;
    Ok((w * x - partial).norm())
}

/// Verdict from the profile at every `t` in the config.
pub fn is_semiconstant(g: &GridFunction, config: &SemiconstantConfig) -> Result<SemiconstantVerdict> {
    let ts: Vec<f64> = config.t_list.iter().copied().filter(|t| *t != 0.0).collect();
    if ts.len() < 2 {
        return Err(Error::Domain("t_list needs at least two nonzero values".into()));
    }
    let mut profile_deviation: f64 = 0.0;
    let mut scaling_deviation: f64 = 0.0;
    for &t in &ts {
        let w = characteristic_profile(g, t)?;
        profile_deviation = profile_deviation.max((1.0 - w.norm()).abs());
        let s = scaling_consistency(g, 0.5, t).unwrap_or(f64::NAN);
        scaling_deviation = scaling_deviation.max(s);
    }
    let values: Vec<f64> = g.valid_points().map(|(_, v)| v).collect();
    let kappa_estimate = median(&values).unwrap_or(f64::NAN);
    let t_min = ts
        .iter()
        .copied()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .expect("two values");
    let phase_kappa = characteristic_profile(g, t_min)?.arg() / t_min;
    Ok(SemiconstantVerdict {
        is_semiconstant: profile_deviation <= config.tol && kappa_estimate.is_finite(),
        kappa_estimate,
        profile_deviation,
        scaling_deviation,
        phase_kappa,
    })
}

/// Verdict for a table on an arbitrary positive grid: abscissae are first
/// rescaled so the grid ends at 1. Semi-constancy is invariant under this.
pub fn is_semiconstant_rescaled(g: &GridFunction, config: &SemiconstantConfig) -> Result<SemiconstantVerdict> {
    let last = *g.grid.last().ok_or_else(|| Error::InvalidGrid("empty grid".into()))?;
    is_semiconstant(&g.rescaled(1.0 / last)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const N: usize = 2000;

    fn unit_grid() -> Vec<f64> {
        (1..=N).map(|k| k as f64 / N as f64).collect()
    }

    fn table(f: impl Fn(f64) -> f64) -> GridFunction {
        let g = unit_grid();
        let v = g.iter().map(|&x| f(x)).collect();
        GridFunction::new(g, v).unwrap()
    }

    #[test]
    fn constant_profile() {
        let w = characteristic_profile(&table(|_| 3.0), 2.0).unwrap();
        let expect = Complex64::from_polar(1.0, 6.0);
        assert!((w - expect).norm() < 1e-12);
    }

    #[test]
    fn identity_profile_closed_form() {
        // ∫₀¹ e^{5iy} dy = (e^{5i} − 1) / (5i)
        let w = characteristic_profile(&table(|y| y), 5.0).unwrap();
        let i5 = Complex64::new(0.0, 5.0);
        let exact = (i5.exp() - 1.0) / i5;
        assert!((w - exact).norm() < 1e-5);
        assert!((w.norm() - (2.0 * 2.5f64.sin() / 5.0).abs()).abs() < 1e-5);
        assert!((w.norm() - 0.2394).abs() < 1e-3);
    }

    #[test]
    fn zero_t_is_one() {
        let w = characteristic_profile(&table(|y| (7.0 * y).sin() * 100.0), 0.0).unwrap();
        assert_eq!(w, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn too_few_points() {
        let g = GridFunction::new((1..=10).map(|k| k as f64 / 10.0).collect(), vec![0.0; 10]).unwrap();
        assert!(matches!(
            characteristic_profile(&g, 1.0),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn grid_must_reach_one() {
        let g = GridFunction::new((1..=100).map(|k| k as f64 / 200.0).collect(), vec![0.0; 100]).unwrap();
        assert!(characteristic_profile(&g, 1.0).is_err());
    }

    #[test]
    fn scaling_constant_and_log() {
        let grid: Vec<f64> = (1..=4000).map(|k| k as f64 / 2000.0).collect();
        let c = GridFunction::new(grid.clone(), vec![-1.3; grid.len()]).unwrap();
        assert!(scaling_consistency(&c, 2.0, 3.0).unwrap() < 1e-6);
        assert!(scaling_consistency(&c, 0.37, 1.0).unwrap() < 1e-6);

        // closed forms: ∫₀ˣ u^i du = x^{1+i} / (1 + i)
        let ln = GridFunction::new(grid.clone(), grid.iter().map(|u| u.ln()).collect()).unwrap();
        let one_i = Complex64::new(1.0, 1.0);
        let exact = (2.0 / one_i - Complex64::new(2.0, 0.0).powc(one_i) / one_i).norm();
        let dev = scaling_consistency(&ln, 2.0, 1.0).unwrap();
        assert!(dev > 0.01);
        assert!((dev - exact).abs() < 5e-3, "dev {dev} exact {exact}");
    }

    #[test]
    fn corrupted_constant_scaling_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid: Vec<f64> = (1..=2000).map(|k| k as f64 / 1000.0).collect();
        let mut g = GridFunction::new(grid.clone(), vec![0.7; grid.len()]).unwrap();
        let f = 0.05;
        for i in rand::seq::index::sample(&mut rng, grid.len(), (f * grid.len() as f64) as usize) {
            g.values[i] = rng.random_range(-1e3..1e3);
        }
        for t in DEFAULT_T_LIST {
            assert!(scaling_consistency(&g, 2.0, t).unwrap() <= 5.0 * f);
        }
    }

    #[test]
    fn verdicts() {
        let c = table(|_| -2.0794);
        let v = is_semiconstant(&c, &SemiconstantConfig::default()).unwrap();
        assert!(v.is_semiconstant);
        assert_eq!(v.kappa_estimate, -2.0794);
        assert!((v.phase_kappa + 2.0794).abs() < 1e-9);

        let id = table(|y| y);
        let cfg = SemiconstantConfig {
            tol: 0.05,
            ..Default::default()
        };
        let v = is_semiconstant(&id, &cfg).unwrap();
        assert!(!v.is_semiconstant);
        assert!(v.profile_deviation > 0.7);
    }

    #[test]
    fn corrupted_constant_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = table(|_| 1.5);
        for i in rand::seq::index::sample(&mut rng, N, N / 20) {
            g.values[i] = rng.random_range(-50.0..50.0);
        }
        let v = is_semiconstant(&g, &SemiconstantConfig::for_corruption(0.05)).unwrap();
        assert!(v.is_semiconstant);
        assert_eq!(v.kappa_estimate, 1.5);
    }

    #[test]
    fn masked_points_are_renormalised_away() {
        let mut g = table(|_| 4.0);
        for i in (0..N).step_by(7) {
            g.values[i] = 99.0;
            g.valid[i] = false;
        }
        let w = characteristic_profile(&g, 1.0).unwrap();
        assert!((w - Complex64::from_polar(1.0, 4.0)).norm() < 1e-12);
    }

    #[test]
    fn shift_only_rotates_profile() {
        let g = table(|y| (3.0 * y).cos() + y * y);
        for s in [-10.0, 0.5, 123.0] {
            let h = g.map_values(|_, v| v + s);
            for t in DEFAULT_T_LIST {
                let a = characteristic_profile(&g, t).unwrap().norm();
                let b = characteristic_profile(&h, t).unwrap().norm();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
