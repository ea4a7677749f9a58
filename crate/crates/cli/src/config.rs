//! Run configuration: defaults, overridden by a JSON config file, overridden
//! by command-line flags. The resolved value is embedded in every output.

use std::path::PathBuf;

use obkit::exceptional::DEFAULT_CAP;
use obkit::lukacs::{GammaSpec, SamplePair};
use obkit::reduction::DEFAULT_RATIO_EXPONENTS;
use obkit::semiconstant::DEFAULT_T_LIST;
use obkit::{FitMode, GeometricGrid, OBParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub tolerance: Option<f64>,
    pub tabulate: TabulateConfig,
    pub corrupt: CorruptConfig,
    pub recover: RecoverConfig,
    pub lukacs: LukacsRunConfig,
    pub semiconstant: SemiconstantRunConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            tolerance: None,
            tabulate: TabulateConfig::default(),
            corrupt: CorruptConfig::default(),
            recover: RecoverConfig::default(),
            lukacs: LukacsRunConfig::default(),
            semiconstant: SemiconstantRunConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }
}

/// Which solution to tabulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionSpec {
    Zero,
    /// Six free constants; `delta` is derived.
    Params {
        lambda: f64,
        kappa1: f64,
        kappa2: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    /// Log-densities of `G(shape_x, rate)`, `G(shape_y, rate)` and the
    /// transformed `U`, `V`.
    Gamma { shape_x: f64, shape_y: f64, rate: f64 },
}

impl SolutionSpec {
    pub fn params(&self) -> obkit::Result<OBParams> {
        match *self {
            SolutionSpec::Zero => Ok(OBParams::zero()),
            SolutionSpec::Params { lambda, kappa1, kappa2, alpha, beta, gamma } => {
                OBParams::new(lambda, kappa1, kappa2, alpha, beta, gamma)
            }
            SolutionSpec::Gamma { shape_x, shape_y, rate } => obkit::canonical::gamma_to_params(shape_x, shape_y, rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabulateConfig {
    pub solution: SolutionSpec,
    pub grid: GeometricGrid,
}

impl Default for TabulateConfig {
    fn default() -> Self {
        TabulateConfig {
            solution: SolutionSpec::Zero,
            grid: GeometricGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptConfig {
    /// Directory holding `a.json` … `d.json`.
    pub input: PathBuf,
    pub fraction: f64,
    pub cap: f64,
    /// Corrupted values are drawn uniformly from this interval.
    pub garbage: (f64, f64),
    /// Clear the validity flag of corrupted points.
    pub flag_invalid: bool,
}

impl Default for CorruptConfig {
    fn default() -> Self {
        CorruptConfig {
            input: PathBuf::from("."),
            fraction: 0.05,
            cap: DEFAULT_CAP,
            garbage: (-1e6, 1e6),
            flag_invalid: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverConfig {
    pub input: PathBuf,
    /// Mask file; `<input>/mask.json` is used when present and this is unset.
    pub mask: Option<PathBuf>,
    pub mode: FitMode,
    pub ratio_exponents: Vec<i32>,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            input: PathBuf::from("."),
            mask: None,
            mode: FitMode::Robust,
            ratio_exponents: DEFAULT_RATIO_EXPONENTS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSource {
    Simulate { pair: SamplePair, n: usize },
    /// Two-column CSV with headers `x,y`.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LukacsRunConfig {
    pub source: SampleSource,
    pub permutations: usize,
    pub max_test_points: usize,
    pub rejection_level: f64,
    pub grid_ratio: f64,
    pub ratio_exponents: Vec<i32>,
    pub bandwidth: Option<f64>,
}

impl Default for LukacsRunConfig {
    fn default() -> Self {
        let base = obkit::lukacs::LukacsConfig::default();
        LukacsRunConfig {
            source: SampleSource::Simulate {
                pair: SamplePair::Gamma {
                    x: GammaSpec { shape: 2.0, rate: 1.0 },
                    y: GammaSpec { shape: 3.0, rate: 1.0 },
                },
                n: 200_000,
            },
            permutations: base.independence.permutations,
            max_test_points: base.independence.max_points,
            rejection_level: base.rejection_level,
            grid_ratio: base.grid_ratio,
            ratio_exponents: base.ratio_exponents,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemiconstantRunConfig {
    pub input: PathBuf,
    pub t_list: Vec<f64>,
    /// Expected corruption fraction; sets the tolerance unless
    /// `--tolerance` is given.
    pub corruption_fraction: f64,
    /// Rescale the grid to end at 1 before profiling.
    pub rescale: bool,
}

impl Default for SemiconstantRunConfig {
    fn default() -> Self {
        SemiconstantRunConfig {
            input: PathBuf::from("table.json"),
            t_list: DEFAULT_T_LIST.to_vec(),
            corruption_fraction: 0.05,
            rescale: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = RunConfig::from_json(r#"{"seed": 9, "tabulate": {"solution": {"kind": "gamma", "shape_x": 2, "shape_y": 3, "rate": 1}}}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.tabulate.grid, GeometricGrid::default());
        assert!(c.tabulate.solution.params().is_ok());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_json(r#"{"sed": 1}"#).is_err());
    }
}
