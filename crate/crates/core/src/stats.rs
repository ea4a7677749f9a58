//! Order statistics and the two line estimators used by every fitting stage.

use serde::{Deserialize, Serialize};

/// How a stage turns many noisy or corrupted readings into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Repeated-median slopes and coordinatewise medians. Exact under sparse
    /// adversarial corruption.
    #[default]
    Robust,
    /// Ordinary least squares and means. For dense, roughly symmetric noise.
    LeastSquares,
}

/// Median with the lower-of-two-middles convention. `None` on empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    Some(median_in_place(&mut v))
}

/// Like [`median`] but reorders `values`. Panics on empty input.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let k = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *m
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Location by the chosen mode: median or mean.
pub fn location(values: &[f64], mode: FitMode) -> Option<f64> {
    match mode {
        FitMode::Robust => median(values),
        FitMode::LeastSquares => mean(values),
    }
}

/// Median absolute deviation about the median (unscaled).
pub fn mad(values: &[f64]) -> Option<f64> {
    let m = median(values)?;
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

/// Quantile of already sorted data by linear interpolation between order
/// statistics (type 7). Panics on empty input.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Siegel's repeated-median slope: for each point the median of slopes to all
/// other points with a distinct abscissa, then the median of those.
///
/// Returns `None` if fewer than two distinct abscissae are present.
pub fn repeated_median_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mut inner = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n);
    for i in 0..n {
        row.clear();
        for j in 0..n {
            let dx = xs[j] - xs[i];
            if dx != 0.0 {
                row.push((ys[j] - ys[i]) / dx);
            }
        }
        if !row.is_empty() {
            inner.push(median_in_place(&mut row));
        }
    }
    if inner.is_empty() {
        None
    } else {
        Some(median_in_place(&mut inner))
    }
}

/// Least-squares slope and intercept. `None` without two distinct abscissae.
pub fn ols_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Slope by the chosen mode.
pub fn line_slope(xs: &[f64], ys: &[f64], mode: FitMode) -> Option<f64> {
    match mode {
        FitMode::Robust => repeated_median_slope(xs, ys),
        FitMode::LeastSquares => ols_line(xs, ys).map(|(s, _)| s),
    }
}

/// Proportional law `y = k * x` through the origin. Robust mode takes the
/// median of the ratios `y / x`; least squares minimises squared residuals.
pub fn proportional_fit(xs: &[f64], ys: &[f64], mode: FitMode) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, _)| **x != 0.0)
        .map(|(x, y)| (*x, *y))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    match mode {
        FitMode::Robust => {
            let ratios: Vec<f64> = pairs.iter().map(|(x, y)| y / x).collect();
            median(&ratios)
        }
        FitMode::LeastSquares => {
            let sxy: f64 = pairs.iter().map(|(x, y)| x * y).sum();
            let sxx: f64 = pairs.iter().map(|(x, _)| x * x).sum();
            Some(sxy / sxx)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.125), 1.5);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert!((std_dev(&v).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn median_takes_lower_middle() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.0));
        assert_eq!(median(&[5.0, 1.0, 3.0]), Some(3.0));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn mad_of_symmetric_set() {
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 5.0]), Some(1.0));
    }

    #[test]
    fn repeated_median_exact_on_line() {
        let xs: Vec<f64> = (1..=20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let s = repeated_median_slope(&xs, &ys).unwrap();
        assert!((s - 2.5).abs() < 1e-12);
        assert_eq!(repeated_median_slope(&[1.0, 1.0], &[0.0, 3.0]), None);
    }

    #[test]
    fn ols_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (s, b) = ols_line(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }

    proptest! {
        // Up to 40% of points replaced by garbage leaves the slope exact.
        #[test]
        fn repeated_median_breakdown(
            slope in -100.0f64..100.0,
            icpt in -100.0f64..100.0,
            bad in proptest::collection::vec((0usize..50, -1e6f64..1e6), 0..20),
        ) {
            let xs: Vec<f64> = (1..=50).map(|k| 0.5 * k as f64).collect();
            let mut ys: Vec<f64> = xs.iter().map(|x| slope * x + icpt).collect();
            let mut hit = std::collections::BTreeSet::new();
            for (i, v) in bad {
                ys[i] = v;
                hit.insert(i);
            }
            prop_assume!(hit.len() <= 20);
            let s = repeated_median_slope(&xs, &ys).unwrap();
            prop_assert!((s - slope).abs() <= 1e-9 * (1.0 + slope.abs()));
        }
    }
}
