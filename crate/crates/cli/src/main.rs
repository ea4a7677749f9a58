//! `obkit`: tabulate solutions, corrupt tables, recover parameters, run the
//! gamma-characterisation laboratory and test tables for semi-constancy.
//!
//! Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 numerical failure.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use obkit::lukacs::{GammaSpec, SamplePair};
use obkit::FitMode;

use crate::config::{RunConfig, SampleSource, SolutionSpec};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "obkit", version, about = "Solve, corrupt and recover a(x) + b(y) = c(x + y) + d(x / y)")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Pexider inlier tolerance (recover, lukacs) or verdict tolerance
    /// (semiconstant).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolutionPreset {
    Zero,
    Gamma,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplePreset {
    Gamma,
    Exponential,
    Lognormal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Robust,
    LeastSquares,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a.json … d.json for a solution on a geometric grid.
    Tabulate {
        #[arg(long, value_enum)]
        preset: Option<SolutionPreset>,
        /// lambda,kappa1,kappa2,alpha,beta,gamma (delta is derived).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Option<Vec<f64>>,
        /// shape_x,shape_y,rate for the gamma solution.
        #[arg(long, value_delimiter = ',')]
        gamma: Option<Vec<f64>>,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        rho: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Overwrite a random sparse subset of each table with garbage.
    Corrupt {
        /// Directory with a.json … d.json.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        cap: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        garbage_lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        garbage_hi: Option<f64>,
        /// Leave corrupted points flagged valid.
        #[arg(long)]
        keep_flags: bool,
    },
    /// Recover the seven constants from four tables.
    Recover {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Ratios as powers of the grid step, e.g. -16,-8,8,16.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ratio_exponents: Option<Vec<i32>>,
    },
    /// Simulate or read paired samples and characterise them.
    Lukacs {
        #[arg(long, value_enum)]
        preset: Option<SamplePreset>,
        #[arg(long)]
        shape_x: Option<f64>,
        #[arg(long)]
        shape_y: Option<f64>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        /// CSV with headers x,y instead of simulation.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        max_test_points: Option<usize>,
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Decide whether one table is constant off a negligible set.
    Semiconstant {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Expected corruption fraction; sets the tolerance to 5·f + 1e-4.
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        t_list: Option<Vec<f64>>,
        /// Rescale the grid so that it ends at 1.
        #[arg(long)]
        rescale: bool,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.tolerance.is_some() {
        cfg.tolerance = cli.tolerance;
    }
    if let Some(t) = cfg.tolerance {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Validation(format!("tolerance {t} must be positive")));
        }
    }

    match &cli.command {
        Command::Tabulate { preset, params, gamma, x0, rho, n } => {
            let tc = &mut cfg.tabulate;
            match preset {
                Some(SolutionPreset::Zero) => tc.solution = SolutionSpec::Zero,
                Some(SolutionPreset::Gamma) => {
                    tc.solution = SolutionSpec::Gamma { shape_x: 2.0, shape_y: 3.0, rate: 1.0 }
                }
                None => {}
            }
            if let Some(p) = params {
                if p.len() != 6 {
                    return Err(CliError::Validation(format!("--params takes 6 values, got {}", p.len())));
                }
                tc.solution = SolutionSpec::Params {
                    lambda: p[0],
                    kappa1: p[1],
                    kappa2: p[2],
                    alpha: p[3],
                    beta: p[4],
                    gamma: p[5],
                };
            }
            if let Some(g) = gamma {
                if g.len() != 3 {
                    return Err(CliError::Validation(format!("--gamma takes 3 values, got {}", g.len())));
                }
                tc.solution = SolutionSpec::Gamma { shape_x: g[0], shape_y: g[1], rate: g[2] };
            }
            if let Some(v) = x0 {
                tc.grid.x0 = *v;
            }
            if let Some(v) = rho {
                tc.grid.rho = *v;
            }
            if let Some(v) = n {
                tc.grid.n = *v;
            }
        }
        Command::Corrupt { input, fraction, cap, garbage_lo, garbage_hi, keep_flags } => {
            let cc = &mut cfg.corrupt;
            if let Some(v) = input {
                cc.input = v.clone();
            }
            if let Some(v) = fraction {
                cc.fraction = *v;
            }
            if let Some(v) = cap {
                cc.cap = *v;
            }
            if let Some(v) = garbage_lo {
                cc.garbage.0 = *v;
            }
            if let Some(v) = garbage_hi {
                cc.garbage.1 = *v;
            }
            if *keep_flags {
                cc.flag_invalid = false;
            }
        }
        Command::Recover { input, mask, mode, ratio_exponents } => {
            let rc = &mut cfg.recover;
            if let Some(v) = input {
                rc.input = v.clone();
            }
            if mask.is_some() {
                rc.mask = mask.clone();
            }
            if let Some(m) = mode {
                rc.mode = match m {
                    Mode::Robust => FitMode::Robust,
                    Mode::LeastSquares => FitMode::LeastSquares,
                };
            }
            if let Some(v) = ratio_exponents {
                rc.ratio_exponents = v.clone();
            }
        }
        Command::Lukacs { preset, shape_x, shape_y, rate, n, samples, permutations, max_test_points, bandwidth } => {
            let lc = &mut cfg.lukacs;
            if let Some(path) = samples {
                lc.source = SampleSource::Csv { path: path.clone() };
            } else if preset.is_some() || shape_x.is_some() || shape_y.is_some() || rate.is_some() || n.is_some() {
                let (mut pair, mut size) = match &lc.source {
                    SampleSource::Simulate { pair, n } => (*pair, *n),
                    SampleSource::Csv { .. } => (SamplePair::gamma(2.0, 3.0, 1.0)?, 200_000),
                };
                match preset {
                    Some(SamplePreset::Gamma) => pair = SamplePair::gamma(2.0, 3.0, 1.0)?,
                    Some(SamplePreset::Exponential) => pair = SamplePair::gamma(1.0, 1.0, 1.0)?,
                    Some(SamplePreset::Lognormal) => pair = SamplePair::Lognormal { mu: 0.0, sigma: 1.0 },
                    None => {}
                }
                if shape_x.is_some() || shape_y.is_some() || rate.is_some() {
                    let (mut sx, mut sy, mut r) = match pair {
                        SamplePair::Gamma { x, y } => (x.shape, y.shape, x.rate),
                        SamplePair::Lognormal { .. } => (2.0, 3.0, 1.0),
                    };
                    sx = shape_x.unwrap_or(sx);
                    sy = shape_y.unwrap_or(sy);
                    r = rate.unwrap_or(r);
                    pair = SamplePair::Gamma {
                        x: GammaSpec::new(sx, r)?,
                        y: GammaSpec::new(sy, r)?,
                    };
                }
                if let Some(v) = n {
                    size = *v;
                }
                lc.source = SampleSource::Simulate { pair, n: size };
            }
            if let Some(v) = permutations {
                lc.permutations = *v;
            }
            if let Some(v) = max_test_points {
                lc.max_test_points = *v;
            }
            if bandwidth.is_some() {
                lc.bandwidth = *bandwidth;
            }
        }
        Command::Semiconstant { input, fraction, t_list, rescale } => {
            let sc = &mut cfg.semiconstant;
            if let Some(v) = input {
                sc.input = v.clone();
            }
            if let Some(v) = fraction {
                sc.corruption_fraction = *v;
            }
            if let Some(v) = t_list {
                sc.t_list = v.clone();
            }
            if *rescale {
                sc.rescale = true;
            }
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = resolve(cli)?;
    match cli.command {
        Command::Tabulate { .. } => commands::tabulate_cmd(&cfg),
        Command::Corrupt { .. } => commands::corrupt_cmd(&cfg),
        Command::Recover { .. } => commands::recover_cmd(&cfg),
        Command::Lukacs { .. } => commands::lukacs_cmd(&cfg),
        Command::Semiconstant { .. } => commands::semiconstant_cmd(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
