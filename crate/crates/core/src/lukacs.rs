//! Simulation laboratory for the gamma characterisation by independence of
//! `U = X + Y` and `V = X / (X + Y)`.
//!
//! The log-densities of `X`, `Y`, `U`, `V` satisfy the additive functional
//! equation with `a = ln f_X`, `b = ln f_Y`, `c(x) = ln f_U(x) − ln x` and
//! `d(x) = ln f_V(x / (1 + x))`, so the recovery pipeline turns estimated
//! densities into gamma shapes `κ + 1` and a common rate `−λ`.

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::canonical::gamma_log_norm;
use crate::error::{Error, Result};
use crate::grid::{GeometricGrid, GridFunction, ABSCISSA_RTOL};
use crate::reduction::{recover_all, RecoveryConfig, RecoveryReport};
use crate::stats::{quantile_sorted, std_dev};

/// Minimum paired sample size for the independence test.
pub const MIN_TEST_SAMPLES: usize = 200;
/// Minimum number of permutations for the independence test.
pub const MIN_PERMUTATIONS: usize = 199;
/// Minimum sample size for a density estimate.
pub const MIN_KDE_SAMPLES: usize = 1000;
/// Kernel sums are truncated at this many bandwidths.
const KERNEL_CUTOFF: f64 = 8.0;

/// Stream ids keep the `X`, `Y` and test draws independent for one seed.
const STREAM_X: u64 = 0;
const STREAM_Y: u64 = 1;
const STREAM_TEST: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gamma law with density `rate^shape / Γ(shape) · x^(shape−1) e^(−rate·x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub shape: f64,
    pub rate: f64,
}

impl GammaSpec {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        let s = GammaSpec { shape, rate };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("shape", self.shape), ("rate", self.rate)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("gamma {name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn log_density(&self, x: f64) -> f64 {
        gamma_log_norm(self.shape, self.rate) + (self.shape - 1.0) * x.ln() - self.rate * x
    }
}

/// `n` gamma draws, reproducible per `(seed, stream)`.
pub fn sample_gamma_stream(spec: &GammaSpec, n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::insufficient("sample_gamma", 1, 0));
    }
    let dist = Gamma::new(spec.shape, 1.0 / spec.rate)
        .map_err(|e| Error::Domain(format!("gamma law: {e}")))?;
    let mut rng = rng_for(seed, stream);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

pub fn sample_gamma(spec: &GammaSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    sample_gamma_stream(spec, n, seed, STREAM_X)
}

/// `n` draws of `exp(N(mu, sigma²))`.
pub fn sample_lognormal_stream(mu: f64, sigma: f64, n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::insufficient("sample_lognormal", 1, 0));
    }
    let dist = LogNormal::new(mu, sigma).map_err(|e| Error::Domain(format!("lognormal law: {e}")))?;
    let mut rng = rng_for(seed, stream);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

/// What to feed the laboratory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SamplePair {
    /// Independent `X ~ G(p, rate_x)`, `Y ~ G(q, rate_y)`.
    Gamma { x: GammaSpec, y: GammaSpec },
    /// Independent `X, Y ~ exp(N(mu, sigma²))`.
    Lognormal { mu: f64, sigma: f64 },
}

impl SamplePair {
    pub fn gamma(p: f64, q: f64, rate: f64) -> Result<Self> {
        Ok(SamplePair::Gamma {
            x: GammaSpec::new(p, rate)?,
            y: GammaSpec::new(q, rate)?,
        })
    }

    pub fn draw(&self, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            SamplePair::Gamma { x, y } => Ok((
                sample_gamma_stream(x, n, seed, STREAM_X)?,
                sample_gamma_stream(y, n, seed, STREAM_Y)?,
            )),
            SamplePair::Lognormal { mu, sigma } => Ok((
                sample_lognormal_stream(*mu, *sigma, n, seed, STREAM_X)?,
                sample_lognormal_stream(*mu, *sigma, n, seed, STREAM_Y)?,
            )),
        }
    }
}

/// `(x + y, x / (x + y))` elementwise.
pub fn transform_uv(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::DomainMismatch(format!(
            "{} x samples vs {} y samples",
            x.len(),
            y.len()
        )));
    }
    let mut u = Vec::with_capacity(x.len());
    let mut v = Vec::with_capacity(x.len());
    for (&a, &b) in x.iter().zip(y) {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("samples must be positive, got ({a}, {b})")));
        }
        let s = a + b;
        u.push(s);
        v.push(a / s);
    }
    Ok((u, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceConfig {
    pub permutations: usize,
    /// The statistic is quadratic in the sample size; larger inputs are
    /// subsampled (without replacement) to this many pairs.
    pub max_points: usize,
}

impl Default for IndependenceConfig {
    fn default() -> Self {
        IndependenceConfig {
            permutations: 999,
            max_points: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub distance_correlation: f64,
    pub pvalue: f64,
    pub permutations: usize,
    pub points_used: usize,
    pub points_available: usize,
    pub subsampled: bool,
}

/// Per-point distance sums `Σ_j |z_i − z_j|`, in O(n log n).
fn distance_row_sums(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| z[i].total_cmp(&z[j]));
    let total: f64 = z.iter().sum();
    let mut below = 0.0;
    let mut out = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        let above = total - below - z[i];
        out[i] = z[i] * k as f64 - below + above - z[i] * (n - k - 1) as f64;
        below += z[i];
    }
    out
}

/// Fenwick tree over ranks accumulating `(1, x, y, xy)`.
struct Fenwick {
    t: Vec<[f64; 4]>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { t: vec![[0.0; 4]; n + 1] }
    }

    fn add(&mut self, rank: usize, v: [f64; 4]) {
        let mut i = rank + 1;
        while i < self.t.len() {
            for k in 0..4 {
                self.t[i][k] += v[k];
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Sums over ranks `< rank`.
    fn prefix(&self, rank: usize) -> [f64; 4] {
        let mut s = [0.0; 4];
        let mut i = rank;
        while i > 0 {
            for k in 0..4 {
                s[k] += self.t[i][k];
            }
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Precomputed pieces of the univariate distance covariance of `(x, y)`
/// that do not change when `y` is permuted.
struct DcovPlan {
    x: Vec<f64>,
    y: Vec<f64>,
    x_order: Vec<usize>,
    y_rank: Vec<usize>,
    x_rows: Vec<f64>,
    y_rows: Vec<f64>,
    grand: f64,
}

impl DcovPlan {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut x_order: Vec<usize> = (0..n).collect();
        x_order.sort_unstable_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut y_order: Vec<usize> = (0..n).collect();
        y_order.sort_unstable_by(|&i, &j| y[i].total_cmp(&y[j]));
        let mut y_rank = vec![0; n];
        for (r, &i) in y_order.iter().enumerate() {
            y_rank[i] = r;
        }
        let x_rows = distance_row_sums(x);
        let y_rows = distance_row_sums(y);
        let grand = x_rows.iter().sum::<f64>() * y_rows.iter().sum::<f64>();
        DcovPlan {
            x: x.to_vec(),
            y: y.to_vec(),
            x_order,
            y_rank,
            x_rows,
            y_rows,
            grand,
        }
    }

    /// Squared distance covariance (V-statistic) of `x_i` against `y_{π(i)}`.
    fn dcov2(&self, perm: &[usize]) -> f64 {
        let n = self.x.len();
        let nf = n as f64;
        let mut tree = Fenwick::new(n);
        let mut seen = [0.0; 4];
        let mut cross = 0.0;
        for &i in &self.x_order {
            let (xi, yi) = (self.x[i], self.y[perm[i]]);
            let r = self.y_rank[perm[i]];
            let lo = tree.prefix(r);
            let hi: [f64; 4] = std::array::from_fn(|k| seen[k] - lo[k]);
            // Σ_j (x_i − x_j)|y_i − y_j| over earlier j, split by the sign of y_i − y_j.
            let part = |s: [f64; 4]| xi * yi * s[0] - xi * s[2] - yi * s[1] + s[3];
            cross += part(lo) - part(hi);
            let v = [1.0, xi, yi, xi * yi];
            tree.add(r, v);
            for k in 0..4 {
                seen[k] += v[k];
            }
        }
        let rows: f64 = (0..n).map(|i| self.x_rows[i] * self.y_rows[perm[i]]).sum();
        2.0 * cross / (nf * nf) - 2.0 * rows / (nf * nf * nf) + self.grand / (nf * nf * nf * nf)
    }
}

fn dcov2(x: &[f64], y: &[f64]) -> f64 {
    let id: Vec<usize> = (0..x.len()).collect();
    DcovPlan::new(x, y).dcov2(&id)
}

/// Sample distance correlation of two equally long univariate samples.
pub fn distance_correlation(u: &[f64], v: &[f64]) -> f64 {
    let (vu, vv) = (dcov2(u, u), dcov2(v, v));
    if vu <= 0.0 || vv <= 0.0 {
        return 0.0;
    }
    (dcov2(u, v).max(0.0) / (vu * vv).sqrt()).sqrt()
}

/// Distance-correlation permutation test; returns the p-value
/// `(1 + #{permuted ≥ observed}) / (1 + permutations)`.
pub fn independence_test(u: &[f64], v: &[f64], permutations: usize, seed: u64) -> Result<f64> {
    let cfg = IndependenceConfig {
        permutations,
        ..IndependenceConfig::default()
    };
    Ok(independence_test_with(u, v, &cfg, seed)?.pvalue)
}

pub fn independence_test_with(
    u: &[f64],
    v: &[f64],
    config: &IndependenceConfig,
    seed: u64,
) -> Result<IndependenceReport> {
    if u.len() != v.len() {
        return Err(Error::DomainMismatch("u and v differ in length".into()));
    }
    if u.len() < MIN_TEST_SAMPLES {
        return Err(Error::insufficient("independence_test", MIN_TEST_SAMPLES, u.len()));
    }
    if config.permutations < MIN_PERMUTATIONS {
        return Err(Error::insufficient(
            "independence_test/permutations",
            MIN_PERMUTATIONS,
            config.permutations,
        ));
    }
    if u.iter().chain(v).any(|z| !z.is_finite()) {
        return Err(Error::Domain("non-finite sample in independence test".into()));
    }
    let mut rng = rng_for(seed, STREAM_TEST);
    let m = config.max_points.max(MIN_TEST_SAMPLES);
    let (us, vs): (Vec<f64>, Vec<f64>) = if u.len() > m {
        let mut idx = sample_indices(&mut rng, u.len(), m).into_vec();
        idx.sort_unstable();
        idx.iter().map(|&i| (u[i], v[i])).unzip()
    } else {
        (u.to_vec(), v.to_vec())
    };
    let n = us.len();
    let plan = DcovPlan::new(&us, &vs);
    let mut perm: Vec<usize> = (0..n).collect();
    let observed = plan.dcov2(&perm);
    let slack = 1e-9 * observed.abs();
    let mut exceed = 0usize;
    for _ in 0..config.permutations {
        perm.shuffle(&mut rng);
        if plan.dcov2(&perm) >= observed - slack {
            exceed += 1;
        }
    }
    Ok(IndependenceReport {
        distance_correlation: distance_correlation(&us, &vs),
        pvalue: (1 + exceed) as f64 / (1 + config.permutations) as f64,
        permutations: config.permutations,
        points_used: n,
        points_available: u.len(),
        subsampled: n < u.len(),
    })
}

/// Scale on which the kernel smoother works.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityScale {
    /// Smooth `ln X` and transform back; for variables on `(0, ∞)`.
    Log,
    /// Smooth the raw values; used for `V` on `(0, 1)`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    /// Fixed bandwidth on the smoothing scale; Silverman's rule when absent.
    pub bandwidth: Option<f64>,
    /// Sample quantiles bounding the trusted window.
    pub window: (f64, f64),
    /// Points whose density is below `floor · peak` are invalid.
    pub floor: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            bandwidth: None,
            window: (0.02, 0.98),
            floor: 1e-6,
        }
    }
}

/// `0.9 · min(sd, IQR / 1.34) · n^(−1/5)`.
pub fn silverman_bandwidth(sorted: &[f64]) -> Option<f64> {
    let sd = std_dev(sorted)?;
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (sorted.len() as f64).powf(-0.2);
    (h > 0.0 && h.is_finite()).then_some(h)
}

struct Kde {
    sorted: Vec<f64>,
    h: f64,
}

impl Kde {
    fn density(&self, t: f64) -> f64 {
        let reach = KERNEL_CUTOFF * self.h;
        let lo = self.sorted.partition_point(|&s| s < t - reach);
        let hi = self.sorted.partition_point(|&s| s <= t + reach);
        let sum: f64 = self.sorted[lo..hi]
            .iter()
            .map(|&s| {
                let z = (t - s) / self.h;
                (-0.5 * z * z).exp()
            })
            .sum();
        sum / (self.sorted.len() as f64 * self.h * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Gaussian-kernel estimate of `ln f` on `grid`, masked outside the quantile
/// window and where `f < floor · peak`. The bandwidth and window are recorded
/// in the table's metadata.
pub fn estimate_log_density(
    samples: &[f64],
    grid: &[f64],
    scale: DensityScale,
    config: &KdeConfig,
) -> Result<GridFunction> {
    if samples.len() < MIN_KDE_SAMPLES {
        return Err(Error::insufficient("estimate_log_density", MIN_KDE_SAMPLES, samples.len()));
    }
    crate::grid::validate_grid(grid)?;
    let mut raw = samples.to_vec();
    if raw.iter().any(|s| !s.is_finite() || (scale == DensityScale::Log && *s <= 0.0)) {
        return Err(Error::Domain("samples must be finite (and positive on the log scale)".into()));
    }
    raw.sort_unstable_by(f64::total_cmp);
    let (qlo, qhi) = config.window;
    let window = (quantile_sorted(&raw, qlo), quantile_sorted(&raw, qhi));
    let sorted: Vec<f64> = match scale {
        DensityScale::Log => raw.iter().map(|s| s.ln()).collect(),
        DensityScale::Plain => raw,
    };
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Domain("all samples are equal".into()));
    }
    let h = match config.bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Domain(format!("bandwidth {h} must be positive"))),
        None => silverman_bandwidth(&sorted).ok_or_else(|| Error::Domain("zero sample spread".into()))?,
    };
    let kde = Kde { sorted, h };
    let dens: Vec<f64> = grid
        .iter()
        .map(|&x| match scale {
            DensityScale::Log => kde.density(x.ln()) / x,
            DensityScale::Plain => kde.density(x),
        })
        .collect();
    let peak = dens.iter().copied().fold(0.0, f64::max);
    let mut values = Vec::with_capacity(grid.len());
    let mut valid = Vec::with_capacity(grid.len());
    for (&x, &f) in grid.iter().zip(&dens) {
        let ok = f > 0.0 && f >= config.floor * peak && x >= window.0 && x <= window.1;
        values.push(if f > 0.0 { f.ln() } else { 0.0 });
        valid.push(ok);
    }
    let mut out = GridFunction::with_flags(grid.to_vec(), values, valid)?;
    out.meta = Some(serde_json::json!({
        "bandwidth": h,
        "scale": scale,
        "window": [window.0, window.1],
    }));
    Ok(out)
}

/// Log-scale estimate with default settings, for positive samples.
pub fn estimate_log_densities(samples: &[f64], grid: &[f64]) -> Result<GridFunction> {
    estimate_log_density(samples, grid, DensityScale::Log, &KdeConfig::default())
}

/// Grid for `V` matching a grid for the other three: `v = x / (1 + x)`.
pub fn v_grid(x_grid: &[f64]) -> Vec<f64> {
    x_grid.iter().map(|x| x / (1.0 + x)).collect()
}

/// `(a, b, c, d)` from the four log-densities. `logf_v` must sit on
/// `v_grid` of the common grid of the other three.
pub fn build_abcd(
    logf_x: &GridFunction,
    logf_y: &GridFunction,
    logf_u: &GridFunction,
    logf_v: &GridFunction,
) -> Result<[GridFunction; 4]> {
    for t in [logf_x, logf_y, logf_u, logf_v] {
        t.validate()?;
    }
    let grid = &logf_x.grid;
    let same = |g: &[f64]| {
        g.len() == grid.len() && g.iter().zip(grid).all(|(p, q)| (p - q).abs() <= ABSCISSA_RTOL * q)
    };
    if !same(&logf_y.grid) || !same(&logf_u.grid) {
        return Err(Error::DomainMismatch("f_X, f_Y and f_U must share a grid".into()));
    }
    if logf_v.grid.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::DomainMismatch("f_V must be tabulated inside (0, 1)".into()));
    }
    let mapped: Vec<f64> = logf_v.grid.iter().map(|v| v / (1.0 - v)).collect();
    if !same(&mapped) {
        return Err(Error::DomainMismatch(
            "f_V grid is not the image of the common grid under x / (1 + x)".into(),
        ));
    }
    let strip = |t: &GridFunction| GridFunction {
        grid: grid.clone(),
        values: t.values.clone(),
        valid: t.valid.clone(),
        meta: None,
    };
    let a = strip(logf_x);
    let b = strip(logf_y);
    let c = strip(logf_u).map_values(|x, v| v - x.ln());
    let d = strip(logf_v);
    Ok([a, b, c, d])
}

/// Exact log-densities of `X ~ G(p, rate)`, `Y ~ G(q, rate)`,
/// `U ~ G(p + q, rate)` and `V ~ Beta(p, q)`; the last on [`v_grid`].
pub fn closed_form_log_densities(p: f64, q: f64, rate: f64, grid: &[f64]) -> Result<[GridFunction; 4]> {
    let (x, y, u) = (GammaSpec::new(p, rate)?, GammaSpec::new(q, rate)?, GammaSpec::new(p + q, rate)?);
    let ln_beta = ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q);
    let tab = |s: GammaSpec| GridFunction::tabulate(grid, |t| Ok(s.log_density(t)));
    let fv = GridFunction::tabulate(&v_grid(grid), |v| {
        Ok((p - 1.0) * v.ln() + (q - 1.0) * (-v).ln_1p() - ln_beta)
    })?;
    Ok([tab(x)?, tab(y)?, tab(u)?, fv])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LukacsConfig {
    /// Step of the geometric density grid.
    pub grid_ratio: f64,
    /// Ratios for the difference functions, as powers of `grid_ratio`.
    pub ratio_exponents: Vec<i32>,
    pub independence: IndependenceConfig,
    /// Independence is rejected when the p-value is at most this level.
    pub rejection_level: f64,
    pub kde: KdeConfig,
    pub recovery: RecoveryConfig,
    /// Seed of the independence test's subsampling and permutations.
    pub test_seed: u64,
}

impl Default for LukacsConfig {
    fn default() -> Self {
        LukacsConfig {
            grid_ratio: 2f64.powf(1.0 / 32.0),
            ratio_exponents: vec![-64, -32, -16, 16, 32, 64],
            independence: IndependenceConfig::default(),
            rejection_level: 1e-3,
            kde: KdeConfig::default(),
            recovery: RecoveryConfig::least_squares(),
            test_seed: 0,
        }
    }
}

/// Parameters read off a recovery report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub shape_x: f64,
    pub shape_y: f64,
    pub rate: f64,
    pub independence_pvalue: f64,
    pub independence: Option<IndependenceReport>,
    pub bandwidths: Option<[f64; 4]>,
    pub grid: GeometricGrid,
    pub sample_size: usize,
    pub pipeline_report: RecoveryReport,
    /// The `(a, b, c, d)` tables the report was computed from.
    #[serde(skip)]
    pub tables: Option<Box<[GridFunction; 4]>>,
}

/// Result of [`characterize`]: parameters only when independence holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LukacsOutcome {
    Estimated(Box<GammaEstimate>),
    IndependenceRejected {
        independence: IndependenceReport,
        sample_size: usize,
    },
}

impl LukacsOutcome {
    pub fn estimate(&self) -> Option<&GammaEstimate> {
        match self {
            LukacsOutcome::Estimated(e) => Some(e),
            LukacsOutcome::IndependenceRejected { .. } => None,
        }
    }

    pub fn independence_pvalue(&self) -> f64 {
        match self {
            LukacsOutcome::Estimated(e) => e.independence_pvalue,
            LukacsOutcome::IndependenceRejected { independence, .. } => independence.pvalue,
        }
    }
}

/// Geometric grid covering the trusted windows of all four densities.
fn covering_grid(windows: &[(f64, f64)], rho: f64) -> Result<GeometricGrid> {
    let lo = windows.iter().map(|w| w.0).fold(f64::INFINITY, f64::min);
    let hi = windows.iter().map(|w| w.1).fold(0.0, f64::max);
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Domain(format!("cannot build a grid over [{lo}, {hi}]")));
    }
    let n = ((hi / lo).ln() / rho.ln()).ceil() as usize + 1;
    let g = GeometricGrid { x0: lo, rho, n: n.max(2) };
    g.validate()?;
    Ok(g)
}

fn sorted_window(samples: &[f64], window: (f64, f64)) -> (f64, f64) {
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    (quantile_sorted(&s, window.0), quantile_sorted(&s, window.1))
}

fn read_off(
    tables: &[GridFunction; 4],
    grid: &GeometricGrid,
    config: &LukacsConfig,
) -> Result<RecoveryReport> {
    let ratios = grid.ratios(&config.ratio_exponents);
    let [a, b, c, d] = tables;
    recover_all(a, b, c, d, None, &ratios, &config.recovery).map_err(|e| e.in_stage("lukacs"))
}

/// Run the whole chain on paired samples of `X` and `Y`.
pub fn characterize(x: &[f64], y: &[f64], config: &LukacsConfig) -> Result<LukacsOutcome> {
    let (u, v) = transform_uv(x, y)?;
    let test = independence_test_with(&u, &v, &config.independence, config.test_seed)?;
    if test.pvalue <= config.rejection_level {
        return Ok(LukacsOutcome::IndependenceRejected {
            independence: test,
            sample_size: x.len(),
        });
    }
    if x.len() < MIN_KDE_SAMPLES {
        return Err(Error::insufficient("characterize", MIN_KDE_SAMPLES, x.len()));
    }

    let w = config.kde.window;
    let (v_lo, v_hi) = sorted_window(&v, w);
    let windows = [
        sorted_window(x, w),
        sorted_window(y, w),
        sorted_window(&u, w),
        (v_lo / (1.0 - v_lo), v_hi / (1.0 - v_hi)),
    ];
    let grid = covering_grid(&windows, config.grid_ratio)?;
    let pts = grid.points();
    let est = |s: &[f64], g: &[f64], sc| estimate_log_density(s, g, sc, &config.kde);
    let fx = est(x, &pts, DensityScale::Log)?;
    let fy = est(y, &pts, DensityScale::Log)?;
    let fu = est(&u, &pts, DensityScale::Log)?;
    let fv = est(&v, &v_grid(&pts), DensityScale::Plain)?;
    let bw = |t: &GridFunction| {
        t.meta
            .as_ref()
            .and_then(|m| m["bandwidth"].as_f64())
            .unwrap_or(f64::NAN)
    };
    let bandwidths = [bw(&fx), bw(&fy), bw(&fu), bw(&fv)];
    let tables = build_abcd(&fx, &fy, &fu, &fv)?;
    let report = read_off(&tables, &grid, config)?;
    let (shape_x, shape_y, rate) = report.params.gamma_shapes();
    Ok(LukacsOutcome::Estimated(Box::new(GammaEstimate {
        tables: Some(Box::new(tables)),
        shape_x,
        shape_y,
        rate,
        independence_pvalue: test.pvalue,
        independence: Some(test),
        bandwidths: Some(bandwidths),
        grid,
        sample_size: x.len(),
        pipeline_report: report,
    })))
}

/// The same chain fed with exact log-densities instead of estimates.
pub fn characterize_closed_form(
    p: f64,
    q: f64,
    rate: f64,
    grid: &GeometricGrid,
    config: &LukacsConfig,
) -> Result<GammaEstimate> {
    grid.validate()?;
    let [fx, fy, fu, fv] = closed_form_log_densities(p, q, rate, &grid.points())?;
    let tables = build_abcd(&fx, &fy, &fu, &fv)?;
    let report = read_off(&tables, grid, config)?;
    let (shape_x, shape_y, rate) = report.params.gamma_shapes();
    Ok(GammaEstimate {
        shape_x,
        shape_y,
        rate,
        independence_pvalue: 1.0,
        independence: None,
        bandwidths: None,
        grid: *grid,
        sample_size: 0,
        pipeline_report: report,
        tables: Some(Box::new(tables)),
    })
}
