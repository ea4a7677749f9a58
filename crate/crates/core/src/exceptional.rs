//! Negligible point sets on tabulation grids.
//!
//! Sets of measure zero, and more generally members of a proper linearly
//! invariant ideal, have no faithful finite representation. On a grid they are
//! stood in for by sparse subsets of grid points (1-D) or grid pairs (2-D)
//! tagged with the kind of ideal they imitate.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{find_index, validate_grid, GridFunction};

/// Default cap on the excluded fraction of a sparse random mask.
pub const DEFAULT_CAP: f64 = 0.2;
/// Corruption fractions at or above this break the median-based estimators.
pub const MAX_FRACTION: f64 = 0.5;
/// Relative tolerance for snapping a scaled abscissa onto the grid.
pub const SNAP_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdealKind {
    SparseRandom,
    Finite,
    Bounded,
    CountableSurrogate,
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..MAX_FRACTION).contains(&fraction) {
        return Err(Error::InvalidFraction {
            fraction,
            reason: format!("must lie in [0, {MAX_FRACTION})"),
        });
    }
    Ok(())
}

/// A negligible subset of a 1-D grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalMask1D {
    pub grid: Vec<f64>,
    pub excluded: Vec<bool>,
    pub ideal_kind: IdealKind,
    pub cap: f64,
    /// For `Bounded` masks: every excluded point lies below this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl ExceptionalMask1D {
    pub fn empty(grid: &[f64]) -> Result<Self> {
        validate_grid(grid)?;
        Ok(ExceptionalMask1D {
            grid: grid.to_vec(),
            excluded: vec![false; grid.len()],
            ideal_kind: IdealKind::Finite,
            cap: DEFAULT_CAP,
            threshold: None,
        })
    }

    /// Exactly `round(fraction · n)` points drawn without replacement.
    pub fn sparse_random(grid: &[f64], fraction: f64, cap: f64, seed: u64) -> Result<Self> {
        validate_grid(grid)?;
        check_fraction(fraction)?;
        if fraction > cap {
            return Err(Error::InvalidFraction {
                fraction,
                reason: format!("exceeds the cap {cap}"),
            });
        }
        let n = grid.len();
        let k = (fraction * n as f64).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut excluded = vec![false; n];
        for i in sample(&mut rng, n, k).into_iter() {
            excluded[i] = true;
        }
        Ok(ExceptionalMask1D {
            grid: grid.to_vec(),
            excluded,
            ideal_kind: IdealKind::SparseRandom,
            cap,
            threshold: None,
        })
    }

    /// Every grid point strictly below `threshold`.
    pub fn bounded(grid: &[f64], threshold: f64) -> Result<Self> {
        validate_grid(grid)?;
        Ok(ExceptionalMask1D {
            grid: grid.to_vec(),
            excluded: grid.iter().map(|&x| x < threshold).collect(),
            ideal_kind: IdealKind::Bounded,
            cap: DEFAULT_CAP,
            threshold: Some(threshold),
        })
    }

    pub fn from_indices(grid: &[f64], indices: &[usize], kind: IdealKind) -> Result<Self> {
        validate_grid(grid)?;
        let mut excluded = vec![false; grid.len()];
        for &i in indices {
            *excluded
                .get_mut(i)
                .ok_or_else(|| Error::InvalidGrid(format!("index {i} out of range")))? = true;
        }
        let m = ExceptionalMask1D {
            grid: grid.to_vec(),
            excluded,
            ideal_kind: kind,
            cap: DEFAULT_CAP,
            threshold: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.grid)?;
        if self.excluded.len() != self.grid.len() {
            return Err(Error::InvalidGrid("mask length differs from grid".into()));
        }
        match self.ideal_kind {
            IdealKind::SparseRandom if self.excluded_fraction() > self.cap => {
                Err(Error::InvalidFraction {
                    fraction: self.excluded_fraction(),
                    reason: format!("exceeds the cap {}", self.cap),
                })
            }
            IdealKind::Bounded => match self.threshold {
                Some(t) if self.excluded_points().any(|x| x >= t) => Err(Error::Domain(format!(
                    "bounded mask excludes a point at or above {t}"
                ))),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn is_excluded(&self, i: usize) -> bool {
        self.excluded[i]
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|e| **e).count()
    }

    pub fn excluded_fraction(&self) -> f64 {
        self.excluded_count() as f64 / self.excluded.len() as f64
    }

    pub fn excluded_points(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid
            .iter()
            .zip(&self.excluded)
            .filter(|(_, e)| **e)
            .map(|(x, _)| *x)
    }

    pub fn union(&self, other: &ExceptionalMask1D) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DomainMismatch("masks live on different grids".into()));
        }
        let mut out = self.clone();
        for (e, o) in out.excluded.iter_mut().zip(&other.excluded) {
            *e |= *o;
        }
        if self.ideal_kind != other.ideal_kind {
            out.ideal_kind = IdealKind::CountableSurrogate;
        }
        Ok(out)
    }
}

/// A negligible subset of a grid product `x_grid × y_grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MaskJson", try_from = "MaskJson")]
pub struct ExceptionalMask2D {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// Row-major over `(i, j)`: `excluded[i * y_grid.len() + j]`.
    excluded: Vec<bool>,
    pub ideal_kind: IdealKind,
    pub seed: Option<u64>,
    /// Target fraction for random masks, empirical fraction otherwise.
    pub fraction: f64,
}

/// On-disk form of [`ExceptionalMask2D`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskJson {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub excluded_indices: Vec<[usize; 2]>,
    pub ideal_kind: IdealKind,
    pub seed: Option<u64>,
    pub fraction: f64,
}

impl From<ExceptionalMask2D> for MaskJson {
    fn from(m: ExceptionalMask2D) -> Self {
        let excluded_indices = m.excluded_pairs().map(|(i, j)| [i, j]).collect();
        MaskJson {
            x_grid: m.x_grid,
            y_grid: m.y_grid,
            excluded_indices,
            ideal_kind: m.ideal_kind,
            seed: m.seed,
            fraction: m.fraction,
        }
    }
}

impl TryFrom<MaskJson> for ExceptionalMask2D {
    type Error = Error;
    fn try_from(j: MaskJson) -> Result<Self> {
        let mut m = ExceptionalMask2D::empty(&j.x_grid, &j.y_grid)?;
        for [i, k] in j.excluded_indices {
            m.set(i, k)?;
        }
        m.ideal_kind = j.ideal_kind;
        m.seed = j.seed;
        m.fraction = j.fraction;
        Ok(m)
    }
}

impl ExceptionalMask2D {
    pub fn empty(x_grid: &[f64], y_grid: &[f64]) -> Result<Self> {
        validate_grid(x_grid)?;
        validate_grid(y_grid)?;
        Ok(ExceptionalMask2D {
            x_grid: x_grid.to_vec(),
            y_grid: y_grid.to_vec(),
            excluded: vec![false; x_grid.len() * y_grid.len()],
            ideal_kind: IdealKind::Finite,
            seed: None,
            fraction: 0.0,
        })
    }

    /// Mask from explicit `(i, j)` index pairs.
    pub fn from_pairs(x_grid: &[f64], y_grid: &[f64], pairs: &[(usize, usize)], kind: IdealKind) -> Result<Self> {
        let mut m = Self::empty(x_grid, y_grid)?;
        for &(i, j) in pairs {
            m.set(i, j)?;
        }
        m.ideal_kind = kind;
        m.fraction = m.excluded_fraction();
        Ok(m)
    }

    fn set(&mut self, i: usize, j: usize) -> Result<()> {
        let (nx, ny) = self.shape();
        if i >= nx || j >= ny {
            return Err(Error::InvalidGrid(format!("pair ({i}, {j}) outside {nx}x{ny} grid")));
        }
        self.excluded[i * ny + j] = true;
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x_grid.len(), self.y_grid.len())
    }

    pub fn is_excluded(&self, i: usize, j: usize) -> bool {
        self.excluded[i * self.y_grid.len() + j]
    }

    pub fn excluded_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let ny = self.y_grid.len();
        self.excluded
            .iter()
            .enumerate()
            .filter(|(_, e)| **e)
            .map(move |(k, _)| (k / ny, k % ny))
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|e| **e).count()
    }

    pub fn excluded_fraction(&self) -> f64 {
        self.excluded_count() as f64 / self.excluded.len() as f64
    }

    /// Excluded fraction of the section `M[x_i]`.
    pub fn column_fraction(&self, i: usize) -> f64 {
        let ny = self.y_grid.len();
        let row = &self.excluded[i * ny..(i + 1) * ny];
        row.iter().filter(|e| **e).count() as f64 / ny as f64
    }

    /// Excluded fraction of the transposed section at `y_j`.
    pub fn row_fraction(&self, j: usize) -> f64 {
        let (nx, ny) = self.shape();
        (0..nx).filter(|&i| self.excluded[i * ny + j]).count() as f64 / nx as f64
    }

    /// A section counts as negligible when its excluded fraction stays within
    /// three binomial standard deviations of the mask's fraction, or below
    /// [`DEFAULT_CAP`], whichever is larger.
    pub fn section_threshold(&self, section_len: usize) -> f64 {
        let f = self.fraction.max(0.0);
        (f + 3.0 * (f * (1.0 - f) / section_len as f64).sqrt()).max(DEFAULT_CAP)
    }

    /// Per column: is the section `M[x_i]` negligible?
    pub fn negligible_columns(&self) -> Vec<bool> {
        let t = self.section_threshold(self.y_grid.len());
        (0..self.x_grid.len())
            .map(|i| self.column_fraction(i) <= t)
            .collect()
    }

    /// Per row: is the transposed section at `y_j` negligible?
    pub fn negligible_rows(&self) -> Vec<bool> {
        let t = self.section_threshold(self.x_grid.len());
        (0..self.y_grid.len())
            .map(|j| self.row_fraction(j) <= t)
            .collect()
    }

    /// Fubini-style property: the fraction of columns with a non-negligible
    /// section is itself at most `cap`.
    pub fn satisfies_section_property(&self, cap: f64) -> bool {
        let cols = self.negligible_columns();
        let bad = cols.iter().filter(|ok| !**ok).count();
        bad as f64 / cols.len() as f64 <= cap
    }

    /// Excluded set of the union of two masks on the same grids.
    pub fn union(&self, other: &ExceptionalMask2D) -> Result<Self> {
        if self.x_grid != other.x_grid || self.y_grid != other.y_grid {
            return Err(Error::DomainMismatch("masks live on different grids".into()));
        }
        let mut out = self.clone();
        for (e, o) in out.excluded.iter_mut().zip(&other.excluded) {
            *e |= *o;
        }
        out.fraction = self.fraction + other.fraction;
        if self.ideal_kind != other.ideal_kind {
            out.ideal_kind = IdealKind::CountableSurrogate;
        }
        out.seed = None;
        Ok(out)
    }
}

/// Independent Bernoulli(`fraction`) exclusion of every grid pair.
pub fn generate_sparse_mask_2d(
    x_grid: &[f64],
    y_grid: &[f64],
    fraction: f64,
    seed: u64,
) -> Result<ExceptionalMask2D> {
    check_fraction(fraction)?;
    let mut m = ExceptionalMask2D::empty(x_grid, y_grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for e in m.excluded.iter_mut() {
        *e = rng.random::<f64>() < fraction;
    }
    m.ideal_kind = IdealKind::SparseRandom;
    m.seed = Some(seed);
    m.fraction = fraction;
    Ok(m)
}

fn snap(grid: &[f64], x: f64) -> Option<usize> {
    let pos = grid.partition_point(|&g| g < x);
    let nearest = [pos.checked_sub(1), Some(pos)]
        .into_iter()
        .flatten()
        .filter(|&i| i < grid.len())
        .min_by(|&a, &b| (grid[a] - x).abs().total_cmp(&(grid[b] - x).abs()))?;
    ((grid[nearest] - x).abs() <= SNAP_RTOL * x.abs()).then_some(nearest)
}

/// The mask of `(1/r)·M`: `(x, y)` is excluded iff `(r·x, r·y)` is excluded
/// in `mask`. Images that fall off the grid are dropped.
pub fn scale_mask(mask: &ExceptionalMask2D, r: f64) -> Result<ExceptionalMask2D> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("scale factor {r} must be positive")));
    }
    let mut out = ExceptionalMask2D::empty(&mask.x_grid, &mask.y_grid)?;
    out.ideal_kind = mask.ideal_kind;
    out.fraction = mask.fraction;
    out.seed = mask.seed;
    let xi: Vec<Option<usize>> = mask.x_grid.iter().map(|&x| snap(&mask.x_grid, r * x)).collect();
    let yj: Vec<Option<usize>> = mask.y_grid.iter().map(|&y| snap(&mask.y_grid, r * y)).collect();
    let (nx, ny) = mask.shape();
    for i in 0..nx {
        let Some(si) = xi[i] else { continue };
        for j in 0..ny {
            if let Some(sj) = yj[j] {
                out.excluded[i * ny + j] = mask.is_excluded(si, sj);
            }
        }
    }
    Ok(out)
}

/// The three generators of the unimodular group acting on the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unimodular {
    /// `(x, y) ↦ (y, x)`
    T1,
    /// `(x, y) ↦ (x + y, −y)`
    T2,
    /// `(x, y) ↦ (−x − y, x)`
    T3,
}

impl Unimodular {
    pub fn apply(self, (x, y): (f64, f64)) -> (f64, f64) {
        match self {
            Unimodular::T1 => (y, x),
            Unimodular::T2 => (x + y, -y),
            Unimodular::T3 => (-x - y, x),
        }
    }
}

/// Exact image of the excluded points under `which`; no snapping.
pub fn unimodular_image(mask: &ExceptionalMask2D, which: Unimodular) -> Vec<(f64, f64)> {
    mask.excluded_pairs()
        .map(|(i, j)| which.apply((mask.x_grid[i], mask.y_grid[j])))
        .collect()
}

/// Result of [`ideal_axiom_check`]. Violations are reported, never raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealAxiomReport {
    pub kind: IdealKind,
    pub union_closed: bool,
    pub hereditary: bool,
    pub affine_invariant: bool,
    pub proper: bool,
    pub violations: Vec<String>,
}

impl IdealAxiomReport {
    pub fn passed(&self) -> bool {
        self.union_closed && self.hereditary && self.affine_invariant && self.proper
    }
}

/// Membership rule for one ideal kind relative to a working grid.
#[derive(Debug, Clone)]
pub struct IdealContext {
    pub kind: IdealKind,
    /// The working interval's grid.
    pub universe: Vec<f64>,
    /// Sparse kind: largest admissible fraction of the universe.
    pub cap: f64,
    /// Affine maps `x ↦ αx + β` probed for invariance.
    pub affine_maps: Vec<(f64, f64)>,
}

impl IdealContext {
    pub fn new(kind: IdealKind, universe: &[f64]) -> Self {
        IdealContext {
            kind,
            universe: universe.to_vec(),
            cap: DEFAULT_CAP,
            affine_maps: vec![(3.0, 0.0), (-2.0, 0.5), (0.5, -1.0), (1.0, 7.25)],
        }
    }

    fn hits(&self, set: &[f64]) -> BTreeSet<usize> {
        set.iter().filter_map(|&x| find_index(&self.universe, x)).collect()
    }

    /// Is `set` a member of the surrogate ideal?
    pub fn contains(&self, set: &[f64]) -> bool {
        if set.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self.kind {
            IdealKind::SparseRandom => {
                self.hits(set).len() as f64 <= self.cap * self.universe.len() as f64
            }
            // a finite list of finite reals is finite, bounded and countable
            IdealKind::Finite | IdealKind::Bounded | IdealKind::CountableSurrogate => true,
        }
    }

    /// Does `set` cover the whole working grid?
    pub fn covers_universe(&self, set: &[f64]) -> bool {
        self.hits(set).len() == self.universe.len()
    }
}

/// Probe the ideal axioms on sample members: finite unions, subsets, affine
/// images, and properness (the union must not exhaust the working grid).
pub fn ideal_axiom_check(sets: &[Vec<f64>], ctx: &IdealContext) -> IdealAxiomReport {
    let mut violations = Vec::new();
    for (k, s) in sets.iter().enumerate() {
        if !ctx.contains(s) {
            violations.push(format!("set {k} is not a member of the {:?} ideal", ctx.kind));
        }
    }

    let union: Vec<f64> = sets.iter().flatten().copied().collect();
    let union_closed = ctx.contains(&union);
    if !union_closed {
        violations.push("union of the sets leaves the ideal".into());
    }

    let mut hereditary = true;
    for (k, s) in sets.iter().enumerate() {
        let halves: [Vec<f64>; 2] = [
            s.iter().step_by(2).copied().collect(),
            s.iter().skip(1).step_by(2).copied().collect(),
        ];
        for sub in halves.iter().chain(std::iter::once(&Vec::new())) {
            if ctx.contains(s) && !ctx.contains(sub) {
                hereditary = false;
                violations.push(format!("a subset of set {k} leaves the ideal"));
            }
        }
    }

    let mut affine_invariant = true;
    for (k, s) in sets.iter().enumerate() {
        for &(a, b) in &ctx.affine_maps {
            if a == 0.0 {
                continue;
            }
            let image: Vec<f64> = s.iter().map(|x| a * x + b).collect();
            if ctx.contains(s) && !ctx.contains(&image) {
                affine_invariant = false;
                violations.push(format!("image of set {k} under x -> {a}x + {b} leaves the ideal"));
            }
        }
    }

    let proper = !ctx.covers_universe(&union);
    if !proper {
        violations.push("union covers the whole working grid: ideal is not proper".into());
    }

    IdealAxiomReport {
        kind: ctx.kind,
        union_closed,
        hereditary,
        affine_invariant,
        proper,
        violations,
    }
}

/// How corrupted table entries are overwritten.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarbageModel {
    /// Replacement values are uniform on `[lo, hi]`.
    pub lo: f64,
    pub hi: f64,
    /// Clear the validity flag of overwritten points.
    pub flag_invalid: bool,
}

impl Default for GarbageModel {
    fn default() -> Self {
        GarbageModel {
            lo: -1e6,
            hi: 1e6,
            flag_invalid: true,
        }
    }
}

/// Overwrite the masked points of `table` with garbage drawn from `seed`.
pub fn corrupt_table(
    table: &GridFunction,
    mask: &ExceptionalMask1D,
    garbage: &GarbageModel,
    seed: u64,
) -> Result<GridFunction> {
    let GarbageModel { lo, hi, flag_invalid } = *garbage;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Domain(format!("garbage interval [{lo}, {hi}] is invalid")));
    }
    if mask.excluded.len() != table.len() {
        return Err(Error::DomainMismatch("1-D mask does not match the table".into()));
    }
    let mut out = table.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    for i in 0..out.len() {
        if mask.is_excluded(i) {
            out.values[i] = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            if flag_invalid {
                out.valid[i] = false;
            }
        }
    }
    Ok(out)
}
