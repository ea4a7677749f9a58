//! Recovery of `(λ, κ₁, κ₂, α, β, γ, δ)` from tables of `a, b, c, d`.
//!
//! The stages follow the constructive argument for the measurable case:
//!
//! 1. For each ratio `r`, the differences `a_r(x) = a(rx) − a(x)` (likewise
//!    `b_r`, `c_r`) satisfy the Pexider equation `a_r(x) + b_r(y) = c_r(x + y)`
//!    off `M ∪ (1/r)M`, so `a_r(x) = Λ(r)x + α(r)`.
//! 2. `Λ(r) = λ(r − 1)` gives `λ`.
//! 3. `α(rs) = α(r) + α(s)` gives `α(r) = κ ln r`.
//! 4. `h(x) = a(x) − λx − κ ln x` is semi-constant; its constant is `α`.
//! 5. `d` is read off in closed form; `δ` is its constant.
//!
//! Tables live on a geometric grid so multiplication by an on-grid ratio is an
//! exact index shift.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::canonical::OBParams;
use crate::digest::{json_digest, TOOL_VERSION};
use crate::error::{Error, Result};
use crate::exceptional::{scale_mask, ExceptionalMask1D, ExceptionalMask2D};
use crate::grid::{GeometricGrid, GridFunction, ABSCISSA_RTOL};
use crate::pexider::{fit_pexider, PexiderConfig};
use crate::semiconstant::{is_semiconstant_rescaled, SemiconstantConfig, SemiconstantVerdict};
use crate::stats::{line_slope, location, mad, median, proportional_fit, FitMode};

/// Default ratio exponents: `r = ρ^m`.
pub const DEFAULT_RATIO_EXPONENTS: [i32; 6] = [-16, -8, -4, 4, 8, 16];

/// Which of the three Pexider-linked functions a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    A,
    B,
    C,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::A, Component::B, Component::C];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::A => "a",
            Component::B => "b",
            Component::C => "c",
        }
    }
}

/// Exponent `m` with `ρ^m = r`, if `r` is an exact step of a geometric grid.
fn ratio_shift(grid: &[f64], r: f64) -> Result<isize> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::OffGridRatio { ratio: r });
    }
    let rho = crate::grid::geometric_ratio(grid)
        .ok_or_else(|| Error::InvalidGrid("difference functions need a geometric grid".into()))?;
    let m = (r.ln() / rho.ln()).round();
    if ((m * rho.ln() - r.ln()).abs()) > 1e-9 {
        return Err(Error::OffGridRatio { ratio: r });
    }
    Ok(m as isize)
}

/// `x ↦ fn(rx) − fn(x)`. Valid where both lookups are valid and unmasked;
/// the effective mask is the union of the mask and its `1/r` image.
pub fn difference_function(
    f: &GridFunction,
    r: f64,
    mask: Option<&ExceptionalMask1D>,
) -> Result<GridFunction> {
    f.validate()?;
    let m = ratio_shift(&f.grid, r)?;
    if let Some(mask) = mask {
        if mask.excluded.len() != f.len() {
            return Err(Error::DomainMismatch("1-D mask does not match the table".into()));
        }
    }
    let ok = |i: usize| f.is_valid(i) && !mask.is_some_and(|mk| mk.is_excluded(i));
    let n = f.len() as isize;
    let mut values = vec![0.0; f.len()];
    let mut valid = vec![false; f.len()];
    for k in 0..n {
        let s = k + m;
        if (0..n).contains(&s) && ok(k as usize) && ok(s as usize) {
            values[k as usize] = f.values[s as usize] - f.values[k as usize];
            valid[k as usize] = true;
        }
    }
    GridFunction::with_flags(f.grid.clone(), values, valid)
}

/// Per-ratio result: `a_r ≈ Λ(r)x + α(r)`, `b_r ≈ Λ(r)x + β(r)`,
/// `c_r ≈ Λ(r)x + γ(r)` with `γ(r) = α(r) + β(r)` for exact data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferenceFit {
    pub r: f64,
    /// Common slope, from the Pexider fit.
    #[serde(rename = "Lambda_r")]
    pub lambda_r: f64,
    pub alpha_r: f64,
    pub beta_r: f64,
    pub gamma_r: f64,
    /// Slopes fitted to `a_r`, `b_r`, `c_r` separately.
    pub slopes: [f64; 3],
    pub inlier_fraction: f64,
    /// `|γ(r) − α(r) − β(r)|`
    pub consistency_gap: f64,
}

impl DifferenceFit {
    pub fn slope(&self, c: Component) -> f64 {
        self.slopes[c.index()]
    }

    pub fn intercept(&self, c: Component) -> f64 {
        match c {
            Component::A => self.alpha_r,
            Component::B => self.beta_r,
            Component::C => self.gamma_r,
        }
    }
}

/// Fit the three difference tables at one ratio.
pub fn fit_difference(
    r: f64,
    a_r: &GridFunction,
    b_r: &GridFunction,
    c_r: &GridFunction,
    mask2d: &ExceptionalMask2D,
    config: &PexiderConfig,
) -> Result<DifferenceFit> {
    if (r - 1.0).abs() <= ABSCISSA_RTOL {
        // a₁ ≡ 0 identically
        return Ok(DifferenceFit {
            r,
            lambda_r: 0.0,
            alpha_r: 0.0,
            beta_r: 0.0,
            gamma_r: 0.0,
            slopes: [0.0; 3],
            inlier_fraction: 1.0,
            consistency_gap: 0.0,
        });
    }
    let fit = fit_pexider(c_r, a_r, b_r, mask2d, config)?;
    let mut slopes = [0.0; 3];
    for (s, t) in slopes.iter_mut().zip([a_r, b_r, c_r]) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = t.valid_points().unzip();
        *s = line_slope(&xs, &ys, config.mode)
            .ok_or_else(|| Error::degenerate("difference", "fewer than 2 valid abscissae"))?;
    }
    let c_det: Vec<f64> = c_r.valid_points().map(|(x, v)| v - fit.slope * x).collect();
    let gamma_r = location(&c_det, config.mode)
        .ok_or_else(|| Error::insufficient("difference", 1, 0))?;
    Ok(DifferenceFit {
        r,
        lambda_r: fit.slope,
        alpha_r: fit.alpha,
        beta_r: fit.beta,
        gamma_r,
        slopes,
        inlier_fraction: fit.inlier_fraction,
        consistency_gap: (gamma_r - fit.alpha - fit.beta).abs(),
    })
}

/// A one-parameter law fitted across ratios, with its residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawFit {
    pub value: f64,
    /// `(r, observed − law(r))`
    pub residuals: Vec<(f64, f64)>,
    pub max_residual: f64,
    /// For the logarithmic law: largest `|α(rs) − α(r) − α(s)|` over ratio
    /// pairs whose product is also sampled (or is 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicative_residual: Option<f64>,
}

fn usable_fits(fits: &[DifferenceFit], stage: &str) -> Result<Vec<DifferenceFit>> {
    let mut rs: Vec<f64> = Vec::new();
    let mut out = Vec::new();
    for f in fits {
        if (f.r - 1.0).abs() <= ABSCISSA_RTOL {
            continue;
        }
        if !rs.iter().any(|r| (r - f.r).abs() <= ABSCISSA_RTOL * f.r) {
            rs.push(f.r);
        }
        out.push(*f);
    }
    if rs.len() < 3 {
        return Err(Error::insufficient(stage, 3, rs.len()));
    }
    Ok(out)
}

fn law_fit(points: &[(f64, f64)], basis: impl Fn(f64) -> f64, mode: FitMode) -> LawFit {
    let xs: Vec<f64> = points.iter().map(|(r, _)| basis(*r)).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| *y).collect();
    let value = proportional_fit(&xs, &ys, mode).unwrap_or(0.0);
    let residuals: Vec<(f64, f64)> = points
        .iter()
        .map(|(r, y)| (*r, y - value * basis(*r)))
        .collect();
    let max_residual = residuals.iter().map(|(_, e)| e.abs()).fold(0.0, f64::max);
    LawFit {
        value,
        residuals,
        max_residual,
        multiplicative_residual: None,
    }
}

/// `λ` from `Λ(r) = λ(r − 1)` using the `a` slopes.
pub fn extract_lambda(fits: &[DifferenceFit]) -> Result<LawFit> {
    extract_lambda_for(fits, Component::A, FitMode::Robust)
}

pub fn extract_lambda_for(fits: &[DifferenceFit], c: Component, mode: FitMode) -> Result<LawFit> {
    let fits = usable_fits(fits, "lambda_law")?;
    let pts: Vec<(f64, f64)> = fits.iter().map(|f| (f.r, f.slope(c))).collect();
    Ok(law_fit(&pts, |r| r - 1.0, mode))
}

/// `κ` from `α(r) = κ ln r` using the `a` intercepts.
pub fn extract_kappa(fits: &[DifferenceFit]) -> Result<LawFit> {
    extract_kappa_for(fits, Component::A, FitMode::Robust)
}

pub fn extract_kappa_for(fits: &[DifferenceFit], c: Component, mode: FitMode) -> Result<LawFit> {
    let fits = usable_fits(fits, "kappa_law")?;
    let pts: Vec<(f64, f64)> = fits.iter().map(|f| (f.r, f.intercept(c))).collect();
    let mut law = law_fit(&pts, f64::ln, mode);

    let lookup = |r: f64| -> Option<f64> {
        if (r - 1.0).abs() <= ABSCISSA_RTOL {
            return Some(0.0);
        }
        pts.iter()
            .find(|(s, _)| (s - r).abs() <= ABSCISSA_RTOL * r)
            .map(|(_, a)| *a)
    };
    let mut worst: Option<f64> = None;
    for (i, &(r, ar)) in pts.iter().enumerate() {
        for &(s, as_) in &pts[i..] {
            if let Some(ars) = lookup(r * s) {
                let e = (ars - ar - as_).abs();
                worst = Some(worst.map_or(e, |w: f64| w.max(e)));
            }
        }
    }
    law.multiplicative_residual = worst;
    Ok(law)
}

/// `h(x) = fn(x) − λx − κ ln x` at every valid point.
pub fn residual_h(f: &GridFunction, lambda: f64, kappa: f64) -> GridFunction {
    f.map_values(|x, v| v - lambda * x - kappa * x.ln())
}

/// Everything but `δ`, as recovered from `a`, `b`, `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialParams {
    pub lambda: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl From<&OBParams> for PartialParams {
    fn from(p: &OBParams) -> Self {
        PartialParams {
            lambda: p.lambda(),
            kappa1: p.kappa1(),
            kappa2: p.kappa2(),
            alpha: p.alpha(),
            beta: p.beta(),
            gamma: p.gamma(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DRecovery {
    pub delta: f64,
    /// Median absolute deviation of the detrended `d` table.
    pub residual: f64,
    /// `|α + β − γ − δ|`
    pub constraint_gap: f64,
}

/// `δ` as the location of `d(z) − κ₁ ln(z/(z+1)) + κ₂ ln(1+z)`.
pub fn recover_d(p: &PartialParams, d: &GridFunction, mode: FitMode) -> Result<DRecovery> {
    let det: Vec<f64> = d
        .valid_points()
        .map(|(z, v)| v - p.kappa1 * (z.ln() - z.ln_1p()) + p.kappa2 * z.ln_1p())
        .collect();
    let delta = location(&det, mode).ok_or_else(|| Error::insufficient("d", 1, 0))?;
    let residual = match mode {
        FitMode::Robust => mad(&det).unwrap_or(0.0),
        FitMode::LeastSquares => {
            (det.iter().map(|v| (v - delta).powi(2)).sum::<f64>() / det.len() as f64).sqrt()
        }
    };
    Ok(DRecovery {
        delta,
        residual,
        constraint_gap: (p.alpha + p.beta - p.gamma - delta).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub mode: FitMode,
    pub pexider: PexiderConfig,
    pub semiconstant: SemiconstantConfig,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            mode: FitMode::Robust,
            pexider: PexiderConfig::default(),
            semiconstant: SemiconstantConfig::default(),
        }
    }
}

impl RecoveryConfig {
    pub fn least_squares() -> Self {
        RecoveryConfig {
            mode: FitMode::LeastSquares,
            pexider: PexiderConfig {
                mode: FitMode::LeastSquares,
                ..PexiderConfig::default()
            },
            ..Default::default()
        }
    }
}

/// Default ratios `ρ^m` for a geometric grid.
pub fn default_ratios(grid: &GeometricGrid) -> Vec<f64> {
    grid.ratios(&DEFAULT_RATIO_EXPONENTS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecovery {
    pub lambda_law: LawFit,
    pub kappa_law: LawFit,
    pub constant: f64,
    pub h_residual: f64,
    pub verdict: Option<SemiconstantVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub tool_version: String,
    pub params: OBParams,
    pub stage_residuals: BTreeMap<String, f64>,
    /// `|κ_a + κ_b − κ_c|`
    pub kappa_consistency: f64,
    /// `|α + β − γ − δ|`
    pub constraint_gap: f64,
    /// Semi-constancy of `h_a`, `h_b`, `h_c`.
    pub semiconstant_verdicts: [bool; 3],
    /// λ estimated from each of `a`, `b`, `c`.
    pub lambda_by_component: [f64; 3],
    pub lambda_spread: f64,
    pub kappa_c: f64,
    pub components: [ComponentRecovery; 3],
    pub difference_fits: Vec<DifferenceFit>,
    pub d_recovery: DRecovery,
    pub ratios: Vec<f64>,
    pub mode: FitMode,
    pub input_digests: BTreeMap<String, String>,
}

impl RecoveryReport {
    /// Largest stage residual.
    pub fn max_stage_residual(&self) -> f64 {
        self.stage_residuals.values().copied().fold(0.0, f64::max)
    }
}

fn table_digest(t: &GridFunction) -> String {
    let mut t = t.clone();
    t.meta = None;
    json_digest(&t)
}

fn check_shared_grid(tables: [&GridFunction; 4]) -> Result<()> {
    let g = &tables[0].grid;
    for (t, name) in tables.iter().zip(["a", "b", "c", "d"]) {
        t.validate()?;
        let same = t.grid.len() == g.len()
            && t.grid
                .iter()
                .zip(g)
                .all(|(x, y)| (x - y).abs() <= ABSCISSA_RTOL * x.abs());
        if !same {
            return Err(Error::DomainMismatch(format!(
                "table {name} is not on the shared grid"
            )));
        }
    }
    Ok(())
}

/// Run every stage on the four tables.
///
/// `mask2d` is the set where the equation is allowed to fail, on
/// `grid × grid`; pass `None` for none. Consistency gaps are reported, never
/// raised; stage failures (too little data) are errors naming the stage.
pub fn recover_all(
    a: &GridFunction,
    b: &GridFunction,
    c: &GridFunction,
    d: &GridFunction,
    mask2d: Option<&ExceptionalMask2D>,
    ratios: &[f64],
    config: &RecoveryConfig,
) -> Result<RecoveryReport> {
    check_shared_grid([a, b, c, d])?;
    let grid = &a.grid;
    let mask = match mask2d {
        Some(m) => {
            if m.shape() != (grid.len(), grid.len()) {
                return Err(Error::DomainMismatch("mask does not match the table grid".into()));
            }
            m.clone()
        }
        None => ExceptionalMask2D::empty(grid, grid)?,
    };
    for &r in ratios {
        ratio_shift(grid, r)?;
    }

    let mode = config.mode;
    let mut fits = Vec::with_capacity(ratios.len());
    for &r in ratios {
        let stage = format!("difference(r={r})");
        let diff = |t: &GridFunction| difference_function(t, r, None);
        let (a_r, b_r, c_r) = (diff(a)?, diff(b)?, diff(c)?);
        let mask_r = mask.union(&scale_mask(&mask, r)?)?;
        let fit = fit_difference(r, &a_r, &b_r, &c_r, &mask_r, &config.pexider)
            .map_err(|e| e.in_stage(&stage))?;
        fits.push(fit);
    }

    let tables = [a, b, c];
    let mut lambda_laws = Vec::with_capacity(3);
    let mut kappa_laws = Vec::with_capacity(3);
    for comp in Component::ALL {
        lambda_laws.push(extract_lambda_for(&fits, comp, mode)?);
        kappa_laws.push(extract_kappa_for(&fits, comp, mode)?);
    }
    let lambda_by_component = [lambda_laws[0].value, lambda_laws[1].value, lambda_laws[2].value];
    let lambda = median(&lambda_by_component).expect("three values");
    let lambda_spread = lambda_by_component.iter().copied().fold(f64::MIN, f64::max)
        - lambda_by_component.iter().copied().fold(f64::MAX, f64::min);
    let kappas = [kappa_laws[0].value, kappa_laws[1].value, kappa_laws[2].value];

    let mut components = Vec::with_capacity(3);
    let mut stage_residuals = BTreeMap::new();
    for (k, comp) in Component::ALL.into_iter().enumerate() {
        let h = residual_h(tables[k], lambda, kappas[k]);
        let hv: Vec<f64> = h.valid_points().map(|(_, v)| v).collect();
        let stage = format!("constant_{}", comp.name());
        let constant = location(&hv, mode).ok_or_else(|| Error::insufficient(&stage, 1, 0))?;
        let h_residual = match mode {
            FitMode::Robust => mad(&hv).unwrap_or(0.0),
            FitMode::LeastSquares => {
                (hv.iter().map(|v| (v - constant).powi(2)).sum::<f64>() / hv.len() as f64).sqrt()
            }
        };
        let verdict = is_semiconstant_rescaled(&h, &config.semiconstant).ok();
        let name = comp.name();
        // Λ-law residual against the shared λ, not the per-component one.
        let shared_law = fits
            .iter()
            .filter(|f| (f.r - 1.0).abs() > ABSCISSA_RTOL)
            .map(|f| (f.slope(comp) - lambda * (f.r - 1.0)).abs())
            .fold(0.0, f64::max);
        stage_residuals.insert(format!("lambda_law_{name}"), shared_law);
        stage_residuals.insert(format!("kappa_law_{name}"), kappa_laws[k].max_residual);
        if let Some(m) = kappa_laws[k].multiplicative_residual {
            stage_residuals.insert(format!("kappa_multiplicative_{name}"), m);
        }
        stage_residuals.insert(format!("h_{name}"), h_residual);
        components.push(ComponentRecovery {
            lambda_law: lambda_laws[k].clone(),
            kappa_law: kappa_laws[k].clone(),
            constant,
            h_residual,
            verdict,
        });
    }
    let pexider_gap = fits.iter().map(|f| f.consistency_gap).fold(0.0, f64::max);
    stage_residuals.insert("pexider_consistency".into(), pexider_gap);
    stage_residuals.insert("lambda_spread".into(), lambda_spread);

    let partial = PartialParams {
        lambda,
        kappa1: kappas[0],
        kappa2: kappas[1],
        alpha: components[0].constant,
        beta: components[1].constant,
        gamma: components[2].constant,
    };
    let d_recovery = recover_d(&partial, d, mode).map_err(|e| e.in_stage("recover_d"))?;
    stage_residuals.insert("d".into(), d_recovery.residual);

    let params = OBParams::from_parts_unchecked(
        partial.lambda,
        partial.kappa1,
        partial.kappa2,
        partial.alpha,
        partial.beta,
        partial.gamma,
        d_recovery.delta,
    );

    let semiconstant_verdicts = [0, 1, 2].map(|k| {
        components[k]
            .verdict
            .map(|v| v.is_semiconstant)
            .unwrap_or(false)
    });
    let input_digests = [("a", a), ("b", b), ("c", c), ("d", d)]
        .into_iter()
        .map(|(n, t)| (n.to_string(), table_digest(t)))
        .chain(mask2d.map(|m| ("mask".to_string(), json_digest(m))))
        .collect();

    let components: [ComponentRecovery; 3] = components
        .try_into()
        .expect("three components");
    Ok(RecoveryReport {
        tool_version: TOOL_VERSION.to_string(),
        params,
        stage_residuals,
        kappa_consistency: (kappas[0] + kappas[1] - kappas[2]).abs(),
        constraint_gap: d_recovery.constraint_gap,
        semiconstant_verdicts,
        lambda_by_component,
        lambda_spread,
        kappa_c: kappas[2],
        components,
        difference_fits: fits,
        d_recovery,
        ratios: ratios.to_vec(),
        mode,
        input_digests,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{gamma_to_params, tabulate};
    use crate::exceptional::generate_sparse_mask_2d;

    fn grid() -> Vec<f64> {
        GeometricGrid::default().points()
    }

    #[test]
    fn difference_of_identity() {
        let g = grid();
        let f = GridFunction::new(g.clone(), g.clone()).unwrap();
        let r = 2f64.powf(1.0 / 8.0).powi(8);
        let d = difference_function(&f, r, None).unwrap();
        for (x, v) in d.valid_points() {
            assert!((v - x).abs() < 1e-12 * x.max(1.0));
        }
        assert_eq!(d.valid_count(), g.len() - 8);
    }

    #[test]
    fn difference_of_log_on_e_grid() {
        let e_grid: Vec<f64> = (0..40).map(|k| (k as f64 - 10.0).exp()).collect();
        let f = GridFunction::new(e_grid.clone(), e_grid.iter().map(|x| x.ln()).collect()).unwrap();
        let d = difference_function(&f, std::f64::consts::E, None).unwrap();
        for (_, v) in d.valid_points() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn difference_of_gamma_like_table() {
        let g = grid();
        let p = OBParams::new(-1.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let [a, ..] = tabulate(&p, &g).unwrap();
        let rho = GeometricGrid::default().rho;
        for m in [-8, 4, 16] {
            let r = rho.powi(m);
            let d = difference_function(&a, r, None).unwrap();
            for (x, v) in d.valid_points() {
                let expect = -(r - 1.0) * x + r.ln();
                assert!((v - expect).abs() < 1e-11, "m={m} x={x}");
            }
        }
    }

    #[test]
    fn off_grid_ratio_rejected() {
        let g = grid();
        let f = GridFunction::new(g.clone(), vec![0.0; g.len()]).unwrap();
        assert!(matches!(
            difference_function(&f, 1.5, None),
            Err(Error::OffGridRatio { .. })
        ));
        let arith = crate::grid::arithmetic_grid(1.0, 10);
        let f = GridFunction::new(arith, vec![0.0; 10]).unwrap();
        assert!(difference_function(&f, 2.0, None).is_err());
    }

    #[test]
    fn difference_mask_union() {
        let g = grid();
        let f = GridFunction::new(g.clone(), vec![1.0; g.len()]).unwrap();
        let m = ExceptionalMask1D::from_indices(&g, &[20], crate::exceptional::IdealKind::Finite).unwrap();
        let d = difference_function(&f, GeometricGrid::default().rho.powi(4), Some(&m)).unwrap();
        assert!(!d.valid[20] && !d.valid[16]);
        assert!(d.valid[17] && d.valid[21]);
    }

    fn fit_at(p: &OBParams, m: i32) -> DifferenceFit {
        let g = grid();
        let [a, b, c, _] = tabulate(p, &g).unwrap();
        let r = GeometricGrid::default().rho.powi(m);
        let mask = ExceptionalMask2D::empty(&g, &g).unwrap();
        let diff = |t: &GridFunction| difference_function(t, r, None).unwrap();
        fit_difference(r, &diff(&a), &diff(&b), &diff(&c), &mask, &PexiderConfig::default()).unwrap()
    }

    #[test]
    fn difference_fit_at_one_and_two() {
        let p = OBParams::new(-1.0, 1.0, 2.0, 0.3, 0.7, 0.4).unwrap();
        let one = fit_at(&p, 0);
        assert_eq!((one.lambda_r, one.alpha_r), (0.0, 0.0));
        let two = fit_at(&p, 8);
        assert!((two.lambda_r + 1.0).abs() < 1e-9);
        assert!((two.alpha_r - 2f64.ln()).abs() < 1e-9);
        assert!((two.beta_r - 2.0 * 2f64.ln()).abs() < 1e-9);
        assert!(two.consistency_gap < 1e-9);
    }

    fn synthetic(r: f64, lambda_r: f64, alpha_r: f64) -> DifferenceFit {
        DifferenceFit {
            r,
            lambda_r,
            alpha_r,
            beta_r: 0.0,
            gamma_r: alpha_r,
            slopes: [lambda_r; 3],
            inlier_fraction: 1.0,
            consistency_gap: 0.0,
        }
    }

    #[test]
    fn lambda_law_examples() {
        let fits = [synthetic(2.0, -1.0, 0.0), synthetic(4.0, -3.0, 0.0), synthetic(8.0, -7.0, 0.0)];
        let law = extract_lambda(&fits).unwrap();
        assert_eq!(law.value, -1.0);
        assert_eq!(law.max_residual, 0.0);

        let zeros = [synthetic(2.0, 0.0, 0.0), synthetic(3.0, 0.0, 0.0), synthetic(5.0, 0.0, 0.0)];
        assert_eq!(extract_lambda(&zeros).unwrap().value, 0.0);

        let mut seven: Vec<DifferenceFit> = [0.25, 0.5, 2.0, 3.0, 4.0, 6.0, 8.0]
            .iter()
            .map(|&r| synthetic(r, -(r - 1.0), 0.0))
            .collect();
        seven[3].lambda_r = 1e6;
        seven[3].slopes = [1e6; 3];
        assert!((extract_lambda(&seven).unwrap().value + 1.0).abs() < 1e-9);

        assert!(matches!(
            extract_lambda(&fits[..2]),
            Err(Error::InsufficientData { .. })
        ));
        let dup = [synthetic(2.0, -1.0, 0.0), synthetic(2.0, -1.0, 0.0), synthetic(1.0, 0.0, 0.0)];
        assert!(extract_lambda(&dup).is_err());
    }

    #[test]
    fn kappa_law_examples() {
        let e = std::f64::consts::E;
        let fits = [
            synthetic(e, 0.0, 1.0),
            synthetic(e * e, 0.0, 2.0),
            synthetic(1.0 / e, 0.0, -1.0),
        ];
        let law = extract_kappa(&fits).unwrap();
        assert!((law.value - 1.0).abs() < 1e-15);
        assert!(law.multiplicative_residual.unwrap() < 1e-15);

        let zeros = [synthetic(2.0, 0.0, 0.0), synthetic(3.0, 0.0, 0.0), synthetic(5.0, 0.0, 0.0)];
        assert_eq!(extract_kappa(&zeros).unwrap().value, 0.0);

        let p = OBParams::new(-1.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let fits: Vec<DifferenceFit> = [-8, 4, 8, 16].iter().map(|&m| fit_at(&p, m)).collect();
        assert!((extract_kappa(&fits).unwrap().value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn residual_h_examples() {
        let g = grid();
        let p = OBParams::new(-1.0, 1.0, 2.0, 0.3, 0.7, 0.4).unwrap();
        let [a, ..] = tabulate(&p, &g).unwrap();
        let h = residual_h(&a, -1.0, 1.0);
        for (_, v) in h.valid_points() {
            assert!((v - 0.3).abs() < 1e-12);
        }
        let eps = 0.1;
        let off = residual_h(&a, -1.0 + eps, 1.0 + eps);
        let v = is_semiconstant_rescaled(&off, &SemiconstantConfig::default()).unwrap();
        assert!(!v.is_semiconstant);
        let z = GridFunction::new(g.clone(), vec![0.0; g.len()]).unwrap();
        assert!(residual_h(&z, 0.0, 0.0).values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn recover_d_examples() {
        let g = grid();
        let p = OBParams::new(-1.0, 1.0, 2.0, 0.3, 0.7, 0.4).unwrap();
        let [.., d] = tabulate(&p, &g).unwrap();
        let r = recover_d(&PartialParams::from(&p), &d, FitMode::Robust).unwrap();
        assert!((r.delta - p.delta()).abs() < 1e-10);
        assert!(r.constraint_gap < 1e-10);

        let five = GridFunction::new(g.clone(), vec![5.0; g.len()]).unwrap();
        let q = PartialParams {
            lambda: 0.0,
            kappa1: 0.0,
            kappa2: 0.0,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        };
        assert_eq!(recover_d(&q, &five, FitMode::Robust).unwrap().delta, 5.0);

        let mut bad = d.clone();
        for i in (0..g.len()).step_by(10) {
            bad.values[i] = 1e5;
        }
        let r = recover_d(&PartialParams::from(&p), &bad, FitMode::Robust).unwrap();
        assert!((r.delta - p.delta()).abs() < 1e-9);
    }

    fn recover(p: &OBParams, mask: Option<&ExceptionalMask2D>) -> RecoveryReport {
        let g = grid();
        let [a, b, c, d] = tabulate(p, &g).unwrap();
        let ratios = default_ratios(&GeometricGrid::default());
        recover_all(&a, &b, &c, &d, mask, &ratios, &RecoveryConfig::default()).unwrap()
    }

    #[test]
    fn end_to_end_with_mask() {
        let g = grid();
        let p = OBParams::new(-1.0, 1.0, 2.0, 0.3, 0.7, 0.4).unwrap();
        let mask = generate_sparse_mask_2d(&g, &g, 0.05, 3).unwrap();
        let rep = recover(&p, Some(&mask));
        assert!(rep.params.max_abs_diff(&p) < 1e-8, "{:?}", rep.params);
        assert!(rep.kappa_consistency < 1e-8);
        assert!(rep.constraint_gap < 1e-8);
        assert!(rep.max_stage_residual() < 1e-8, "{:?}", rep.stage_residuals);
        assert_eq!(rep.semiconstant_verdicts, [true; 3]);
    }

    #[test]
    fn all_zero_tables() {
        let rep = recover(&OBParams::zero(), None);
        assert_eq!(rep.params.as_array(), [0.0; 7]);
    }

    #[test]
    fn gamma_tables() {
        let p = gamma_to_params(2.0, 3.0, 1.0).unwrap();
        let rep = recover(&p, None);
        let (s1, s2, rate) = rep.params.gamma_shapes();
        assert!((s1 - 2.0).abs() < 1e-8 && (s2 - 3.0).abs() < 1e-8 && (rate - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let g = grid();
        let [a, b, c, _] = tabulate(&OBParams::zero(), &g).unwrap();
        let d = GridFunction::new(g[..10].to_vec(), vec![0.0; 10]).unwrap();
        let r = default_ratios(&GeometricGrid::default());
        assert!(matches!(
            recover_all(&a, &b, &c, &d, None, &r, &RecoveryConfig::default()),
            Err(Error::DomainMismatch(_))
        ));
    }
}
