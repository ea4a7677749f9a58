//! Tabulated functions on positive abscissa grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when matching abscissae computed in floating point.
pub const ABSCISSA_RTOL: f64 = 1e-9;

/// A real function tabulated on a strictly increasing positive grid, with a
/// validity flag per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(rename = "valid_flags")]
    pub valid: Vec<bool>,
    /// Provenance attached by the CLI; ignored by every computation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl GridFunction {
    /// All points valid.
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let valid = vec![true; grid.len()];
        Self::with_flags(grid, values, valid)
    }

    pub fn with_flags(grid: Vec<f64>, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let f = GridFunction {
            grid,
            values,
            valid,
            meta: None,
        };
        f.validate()?;
        Ok(f)
    }

    /// Evaluate `f` at every grid point; points where `f` fails or returns a
    /// non-finite value are flagged invalid.
    pub fn tabulate<F>(grid: &[f64], mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut values = Vec::with_capacity(grid.len());
        let mut valid = Vec::with_capacity(grid.len());
        for &x in grid {
            match f(x) {
                Ok(v) if v.is_finite() => {
                    values.push(v);
                    valid.push(true);
                }
                _ => {
                    values.push(0.0);
                    valid.push(false);
                }
            }
        }
        Self::with_flags(grid.to_vec(), values, valid)
    }

    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.grid)?;
        if self.values.len() != self.grid.len() || self.valid.len() != self.grid.len() {
            return Err(Error::InvalidGrid(format!(
                "length mismatch: grid {}, values {}, flags {}",
                self.grid.len(),
                self.values.len(),
                self.valid.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// A point counts as valid only if flagged and finite.
    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i] && self.values[i].is_finite()
    }

    pub fn valid_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_valid(i)).count()
    }

    /// `(x, value)` for every valid point.
    pub fn valid_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len())
            .filter(move |&i| self.is_valid(i))
            .map(move |i| (self.grid[i], self.values[i]))
    }

    /// Index of the grid point equal to `x` up to [`ABSCISSA_RTOL`].
    pub fn index_of(&self, x: f64) -> Option<usize> {
        find_index(&self.grid, x)
    }

    /// Same function with every abscissa multiplied by `s`.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("rescale factor {s} must be positive")));
        }
        let mut out = self.clone();
        out.grid.iter_mut().for_each(|x| *x *= s);
        out.meta = None;
        Ok(out)
    }

    /// Pointwise map over valid points; the closure receives `(x, value)`.
    pub fn map_values<F>(&self, mut f: F) -> Self
    where
        F: FnMut(f64, f64) -> f64,
    {
        let mut out = self.clone();
        out.meta = None;
        for i in 0..out.len() {
            if out.is_valid(i) {
                out.values[i] = f(out.grid[i], out.values[i]);
            }
        }
        out
    }

    /// Constant ratio between consecutive abscissae, if the grid is geometric.
    pub fn geometric_ratio(&self) -> Option<f64> {
        geometric_ratio(&self.grid)
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if let Some(x) = grid.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidGrid(format!(
            "abscissa {x} is not a positive finite real"
        )));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!(
            "grid not strictly increasing at {} -> {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Binary search with relative tolerance.
pub fn find_index(grid: &[f64], x: f64) -> Option<usize> {
    if !x.is_finite() || grid.is_empty() {
        return None;
    }
    let pos = grid.partition_point(|&g| g < x);
    let tol = ABSCISSA_RTOL * x.abs().max(f64::MIN_POSITIVE);
    [pos.checked_sub(1), Some(pos)]
        .into_iter()
        .flatten()
        .filter(|&i| i < grid.len())
        .find(|&i| (grid[i] - x).abs() <= tol)
}

pub fn geometric_ratio(grid: &[f64]) -> Option<f64> {
    if grid.len() < 2 {
        return None;
    }
    let rho = grid[1] / grid[0];
    let ok = grid
        .windows(2)
        .all(|w| ((w[1] / w[0]) / rho - 1.0).abs() <= ABSCISSA_RTOL);
    (ok && rho > 1.0).then_some(rho)
}

/// Geometric grid `x_k = x0 * rho^k`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricGrid {
    pub x0: f64,
    pub rho: f64,
    pub n: usize,
}

impl Default for GeometricGrid {
    fn default() -> Self {
        GeometricGrid {
            x0: 1e-2,
            rho: 2f64.powf(1.0 / 8.0),
            n: 129,
        }
    }
}

impl GeometricGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::InvalidGrid(format!("x0 = {} must be positive", self.x0)));
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(Error::InvalidGrid(format!("rho = {} must exceed 1", self.rho)));
        }
        if self.n < 2 {
            return Err(Error::InvalidGrid(format!("n = {} must be at least 2", self.n)));
        }
        let last = self.x0 * self.rho.powi(self.n as i32 - 1);
        if !last.is_finite() {
            return Err(Error::InvalidGrid("grid overflows".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n)
            .map(|k| self.x0 * self.rho.powi(k as i32))
            .collect()
    }

    /// `rho^m` for each exponent.
    pub fn ratios(&self, exponents: &[i32]) -> Vec<f64> {
        exponents.iter().map(|&m| self.rho.powi(m)).collect()
    }
}

/// Arithmetic grid `step * k`, `k = 1..=n`.
pub fn arithmetic_grid(step: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| step * k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridFunction::new(vec![], vec![]).is_err());
        assert!(GridFunction::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(GridFunction::new(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(GridFunction::new(vec![1.0, 2.0], vec![0.0]).is_err());
    }

    #[test]
    fn tabulate_flags_failures() {
        let f = GridFunction::tabulate(&[1.0, 2.0, 3.0], |x| {
            if x == 2.0 {
                Err(Error::Domain("no".into()))
            } else {
                Ok(x.ln())
            }
        })
        .unwrap();
        assert_eq!(f.valid, vec![true, false, true]);
        assert_eq!(f.valid_count(), 2);
    }

    #[test]
    fn geometric_grid_detected() {
        let g = GeometricGrid::default();
        let pts = g.points();
        assert_eq!(pts.len(), 129);
        let rho = geometric_ratio(&pts).unwrap();
        assert!((rho - g.rho).abs() < 1e-12);
        assert!(geometric_ratio(&arithmetic_grid(1.0, 10)).is_none());
    }

    #[test]
    fn index_lookup_tolerates_rounding() {
        let pts = GeometricGrid::default().points();
        let x = pts[10] * 2f64.powf(1.0 / 8.0).powi(8);
        assert_eq!(find_index(&pts, x), Some(18));
        assert_eq!(find_index(&pts, 1e6), None);
        assert_eq!(find_index(&pts, pts[5] * 1.01), None);
    }

    #[test]
    fn json_shape() {
        let f = GridFunction::with_flags(vec![1.0, 2.0], vec![3.0, 4.0], vec![true, false]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"grid":[1.0,2.0],"values":[3.0,4.0],"valid_flags":[true,false]}"#);
        let back: GridFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
