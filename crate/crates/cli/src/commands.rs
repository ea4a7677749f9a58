use std::collections::BTreeMap;
use std::path::PathBuf;

use obkit::canonical::tabulate;
use obkit::digest::TOOL_VERSION;
use obkit::exceptional::{
    corrupt_table, generate_sparse_mask_2d, ExceptionalMask1D, ExceptionalMask2D, GarbageModel, MaskJson,
};
use obkit::lukacs::{characterize, transform_uv, IndependenceConfig, KdeConfig, LukacsConfig, LukacsOutcome};
use obkit::pexider::PexiderConfig;
use obkit::reduction::{recover_all, residual_h, RecoveryConfig, RecoveryReport};
use obkit::semiconstant::{is_semiconstant, is_semiconstant_rescaled, SemiconstantConfig, SemiconstantVerdict};
use obkit::svg::{render, Panel, Series};
use obkit::{FitMode, GridFunction};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{RunConfig, SampleSource};
use crate::error::CliError;
use crate::io::{read_json, read_samples, read_tables, table_path, write_json, write_text, TABLE_NAMES};

/// Provenance block attached to every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub tool_version: String,
    pub command: String,
    pub config: RunConfig,
    pub input_digests: BTreeMap<String, String>,
}

impl Meta {
    fn new(command: &str, config: &RunConfig, input_digests: BTreeMap<String, String>) -> Self {
        Meta {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config: config.clone(),
            input_digests,
        }
    }

    fn value(&self) -> Value {
        serde_json::to_value(self).expect("meta serialises")
    }
}

fn with_meta(mut t: GridFunction, meta: &Meta, extra: Value) -> GridFunction {
    let mut m = meta.value();
    if let (Some(obj), Value::Object(add)) = (m.as_object_mut(), extra) {
        obj.extend(add);
    }
    t.meta = Some(m);
    t
}

pub fn tabulate_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let tc = &cfg.tabulate;
    tc.grid.validate()?;
    let params = tc.solution.params()?;
    let tables = tabulate(&params, &tc.grid.points())?;
    let meta = Meta::new("tabulate", cfg, BTreeMap::new());
    let mut written = Vec::new();
    for (name, t) in TABLE_NAMES.iter().zip(tables) {
        let t = with_meta(t, &meta, json!({ "params": params, "component": name }));
        written.push(write_json(&cfg.out, &format!("{name}.json"), &t)?);
    }
    Ok(written)
}

/// `mask.json`: the corrupted points of each table and the pair mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub points: BTreeMap<String, Vec<usize>>,
    pub pairs: MaskJson,
    pub meta: Meta,
}

pub fn corrupt_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let cc = &cfg.corrupt;
    let garbage = GarbageModel {
        lo: cc.garbage.0,
        hi: cc.garbage.1,
        flag_invalid: cc.flag_invalid,
    };
    let mut digests = BTreeMap::new();
    let tables = read_tables(&cc.input, &mut digests)?;
    let grid = tables[0].grid.clone();
    let meta = Meta::new("corrupt", cfg, digests);

    let mut points = BTreeMap::new();
    let mut written = Vec::new();
    for (k, (name, t)) in TABLE_NAMES.iter().zip(tables).enumerate() {
        let seed = cfg.seed.wrapping_add(k as u64);
        let mask = ExceptionalMask1D::sparse_random(&t.grid, cc.fraction, cc.cap, seed)?;
        let t = corrupt_table(&t, &mask, &garbage, seed)?;
        points.insert(name.to_string(), (0..t.len()).filter(|&i| mask.is_excluded(i)).collect::<Vec<_>>());
        let t = with_meta(t, &meta, json!({ "component": name }));
        written.push(write_json(&cfg.out, &format!("{name}.json"), &t)?);
    }
    let pairs = if cc.fraction > 0.0 {
        generate_sparse_mask_2d(&grid, &grid, cc.fraction, cfg.seed.wrapping_add(4))?
    } else {
        ExceptionalMask2D::empty(&grid, &grid)?
    };
    let record = CorruptionRecord {
        points,
        pairs: pairs.into(),
        meta,
    };
    written.push(write_json(&cfg.out, "mask.json", &record)?);
    Ok(written)
}

/// Accepts either a `corrupt` record or a bare pair mask.
#[derive(Deserialize)]
#[serde(untagged)]
enum MaskFile {
    Record { pairs: MaskJson },
    Bare(MaskJson),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoverOutput {
    pub report: RecoveryReport,
    pub meta: Meta,
}

fn recovery_config(mode: FitMode, tolerance: Option<f64>) -> RecoveryConfig {
    let mut rc = match mode {
        FitMode::Robust => RecoveryConfig::default(),
        FitMode::LeastSquares => RecoveryConfig::least_squares(),
    };
    if let Some(t) = tolerance {
        rc.pexider = PexiderConfig { tolerance: t, ..rc.pexider };
    }
    rc
}

pub fn recover_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let rc = &cfg.recover;
    let mut digests = BTreeMap::new();
    let [a, b, c, d] = read_tables(&rc.input, &mut digests)?;
    let mask_path = rc.mask.clone().or_else(|| {
        let p = table_path(&rc.input, "mask");
        p.exists().then_some(p)
    });
    let mask = match &mask_path {
        Some(p) => {
            let m = match read_json::<MaskFile>(p, "mask", &mut digests)? {
                MaskFile::Record { pairs } | MaskFile::Bare(pairs) => pairs,
            };
            Some(ExceptionalMask2D::try_from(m)?)
        }
        None => None,
    };
    let grid_ratio = a
        .geometric_ratio()
        .ok_or_else(|| CliError::Validation("tables must lie on a geometric grid".into()))?;
    let ratios: Vec<f64> = rc.ratio_exponents.iter().map(|&m| grid_ratio.powi(m)).collect();
    let config = recovery_config(rc.mode, cfg.tolerance);
    let report = recover_all(&a, &b, &c, &d, mask.as_ref(), &ratios, &config)?;

    let mut svg_panels = vec![lambda_panel(&report)];
    let p = &report.params;
    let hs = [
        ("h_a", residual_h(&a, p.lambda(), p.kappa1())),
        ("h_b", residual_h(&b, p.lambda(), p.kappa2())),
        ("h_c", residual_h(&c, p.lambda(), report.kappa_c)),
    ];
    let mut h_panel = Panel::new("Residual tables h(x) = f(x) − λx − κ ln x", "x", "h").log_x();
    for (name, h) in hs {
        h_panel = h_panel.with(Series::dots(name, h.valid_points().collect()));
    }
    svg_panels.push(h_panel);

    let out = RecoverOutput {
        report,
        meta: Meta::new("recover", cfg, digests),
    };
    Ok(vec![
        write_json(&cfg.out, "report.json", &out)?,
        write_text(&cfg.out, "report.svg", &render(&svg_panels))?,
    ])
}

fn lambda_panel(report: &RecoveryReport) -> Panel {
    let lambda = report.params.lambda();
    let mut fits: Vec<(f64, f64)> = report.difference_fits.iter().map(|f| (f.r, f.lambda_r)).collect();
    fits.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (r0, r1) = (
        fits.first().map_or(0.5, |f| f.0),
        fits.last().map_or(2.0, |f| f.0),
    );
    let law: Vec<(f64, f64)> = (0..=50)
        .map(|k| {
            let r = r0 * (r1 / r0).powf(k as f64 / 50.0);
            (r, lambda * (r - 1.0))
        })
        .collect();
    Panel::new("Fitted Λ(r) against λ(r − 1)", "r", "Λ(r)")
        .log_x()
        .with(Series::line(format!("λ(r − 1), λ = {lambda:.6}"), law))
        .with(Series::dots("fitted Λ(r)", fits))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LukacsOutput {
    pub outcome: LukacsOutcome,
    pub meta: Meta,
}

pub fn lukacs_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let lc = &cfg.lukacs;
    let mut digests = BTreeMap::new();
    let (x, y) = match &lc.source {
        SampleSource::Simulate { pair, n } => pair.draw(*n, cfg.seed)?,
        SampleSource::Csv { path } => read_samples(path, &mut digests)?,
    };
    let base = LukacsConfig::default();
    let config = LukacsConfig {
        grid_ratio: lc.grid_ratio,
        ratio_exponents: lc.ratio_exponents.clone(),
        independence: IndependenceConfig {
            permutations: lc.permutations,
            max_points: lc.max_test_points,
        },
        rejection_level: lc.rejection_level,
        kde: KdeConfig {
            bandwidth: lc.bandwidth,
            ..base.kde
        },
        recovery: recovery_config(FitMode::LeastSquares, cfg.tolerance),
        test_seed: cfg.seed,
    };
    let outcome = characterize(&x, &y, &config)?;
    let svg = match outcome.estimate() {
        Some(e) => lukacs_panels(e),
        None => {
            let (u, v) = transform_uv(&x, &y)?;
            vec![Panel::new("Independence rejected: V against U", "U", "V")
                .log_x()
                .with(Series::dots("first 1000 pairs", u.into_iter().zip(v).take(1000).collect()))]
        }
    };
    let out = LukacsOutput {
        outcome,
        meta: Meta::new("lukacs", cfg, digests),
    };
    Ok(vec![
        write_json(&cfg.out, "estimate.json", &out)?,
        write_text(&cfg.out, "estimate.svg", &render(&svg))?,
    ])
}

fn lukacs_panels(e: &obkit::lukacs::GammaEstimate) -> Vec<Panel> {
    let Some(tables) = &e.tables else {
        return Vec::new();
    };
    let p = &e.pipeline_report.params;
    let fitted = |t: &GridFunction, kappa: f64, constant: f64| -> Vec<(f64, f64)> {
        t.valid_points()
            .map(|(x, _)| (x, p.lambda() * x + kappa * x.ln() + constant))
            .collect()
    };
    let pairs = [
        ("ln f_X", &tables[0], p.kappa1(), p.alpha()),
        ("ln f_Y", &tables[1], p.kappa2(), p.beta()),
    ];
    pairs
        .into_iter()
        .map(|(name, t, k, c)| {
            Panel::new(format!("{name}: estimated against fitted gamma"), "x", name)
                .log_x()
                .with(Series::dots("kernel estimate", t.valid_points().collect()))
                .with(Series::line("fitted", fitted(t, k, c)))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemiconstantOutput {
    pub verdict: SemiconstantVerdict,
    pub tol: f64,
    pub meta: Meta,
}

pub fn semiconstant_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let sc = &cfg.semiconstant;
    let mut digests = BTreeMap::new();
    let table: GridFunction = read_json(&sc.input, "table", &mut digests)?;
    table.validate()?;
    if !(0.0..=0.5).contains(&sc.corruption_fraction) {
        return Err(CliError::Validation(format!(
            "corruption fraction {} must lie in [0, 0.5]",
            sc.corruption_fraction
        )));
    }
    let mut config = SemiconstantConfig::for_corruption(sc.corruption_fraction);
    config.t_list = sc.t_list.clone();
    if let Some(t) = cfg.tolerance {
        config.tol = t;
    }
    let verdict = if sc.rescale {
        is_semiconstant_rescaled(&table, &config)?
    } else {
        is_semiconstant(&table, &config)?
    };
    let out = SemiconstantOutput {
        verdict,
        tol: config.tol,
        meta: Meta::new("semiconstant", cfg, digests),
    };
    Ok(vec![write_json(&cfg.out, "verdict.json", &out)?])
}
