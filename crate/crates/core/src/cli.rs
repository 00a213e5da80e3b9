//! Command-line front end. Exit codes: 0 success, 2 bad input, 3 numerical failure.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::builders::{builtin, BUILTINS};
use crate::chaos::{transition_chaos_whitened, whiten};
use crate::config::{Profile, Tolerances, TOL_PROFILE_ENV};
use crate::diagnostics::{analyze, s_infinity_norm, spectral_gap};
use crate::engine::{sample_transition, simulate_path};
use crate::error::{OuError, Result};
use crate::io::{
    csv_string, format_float, path_csv, report_json, samples_csv, write_atomic, ModelConfig,
};
use crate::linalg::Vector;
use crate::model::OuModel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "oulab",
    version,
    about = "Ornstein-Uhlenbeck semigroup diagnostics"
)]
pub struct Cli {
    /// Tolerance profile.
    #[arg(long, global = true, env = TOL_PROFILE_ENV, default_value = "default")]
    pub tol_profile: Profile,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full diagnostics report as JSON.
    Analyze {
        #[command(flatten)]
        source: ModelSource,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact samples of X(t, x0), or one path on a uniform grid with --steps.
    Simulate {
        #[command(flatten)]
        source: ModelSource,
        /// Time horizon.
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// Number of independent samples.
        #[arg(long, default_value_t = 1000, conflicts_with = "steps")]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Starting state, comma-separated (default 0).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Emit one path over this many uniform steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chaos blocks of P(t) as CSV (order,row,col,value).
    Chaos {
        #[command(flatten)]
        source: ModelSource,
        /// Time horizon.
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// Highest chaos order.
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// |S_inf(t)|, the exponential bound and the order-1 chaos norm over a time grid.
    Sweep {
        #[command(flatten)]
        source: ModelSource,
        /// Explicit times, comma-separated; otherwise the model file's times
        /// or a uniform grid.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.0)]
        t_min: f64,
        #[arg(long, default_value_t = 5.0)]
        t_max: f64,
        #[arg(long, default_value_t = 51)]
        points: usize,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builtin models.
    Example {
        #[command(subcommand)]
        action: ExampleAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExampleAction {
    /// Names and one-line descriptions.
    List,
    /// Description, dimensions and metadata of one builtin, as JSON.
    Describe { name: String },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelSource {
    /// Name of a builtin model.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Model configuration JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

struct Loaded {
    model: OuModel,
    tol: Tolerances,
    times: Vec<f64>,
}

fn load(source: &ModelSource, profile: Profile) -> Result<Loaded> {
    let base = Tolerances::for_profile(profile);
    match (&source.builtin, &source.model) {
        (Some(name), _) => Ok(Loaded {
            model: builtin(name)?,
            tol: base,
            times: Vec::new(),
        }),
        (None, Some(path)) => {
            let cfg = ModelConfig::load(path)?;
            let tol = cfg.tolerances(base);
            Ok(Loaded {
                model: cfg.build(&tol)?,
                tol,
                times: cfg.times,
            })
        }
        (None, None) => Err(OuError::InvalidInput(
            "one of --builtin or --model is required".into(),
        )),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn positive_time(t: f64) -> Result<f64> {
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(OuError::InvalidInput(format!(
            "--t must be finite and > 0, got {t}"
        )))
    }
}

fn execute(cli: Cli) -> Result<()> {
    let profile = cli.tol_profile;
    match cli.command {
        Command::Analyze { source, out } => {
            let l = load(&source, profile)?;
            emit(out.as_deref(), &report_json(&analyze(&l.model, &l.tol)?)?)
        }
        Command::Simulate {
            source,
            t,
            count,
            seed,
            x0,
            steps,
            out,
        } => {
            let l = load(&source, profile)?;
            let t = positive_time(t)?;
            let n = l.model.dim();
            let x0 = match x0 {
                Some(v) if v.len() == n => Vector::from_vec(v),
                Some(v) => {
                    return Err(OuError::InvalidInput(format!(
                        "--x0 has {} entries, model dimension is {n}",
                        v.len()
                    )))
                }
                None => Vector::zeros(n),
            };
            let text = match steps {
                Some(0) => return Err(OuError::InvalidInput("--steps must be >= 1".into())),
                Some(k) => {
                    let grid: Vec<f64> = (0..=k).map(|j| t * j as f64 / k as f64).collect();
                    path_csv(&simulate_path(&l.model, &x0, &grid, seed, &l.tol)?)
                }
                None => samples_csv(&sample_transition(&l.model, &x0, t, count, seed, &l.tol)?),
            };
            emit(out.as_deref(), &text)
        }
        Command::Chaos {
            source,
            t,
            order,
            out,
        } => {
            let l = load(&source, profile)?;
            let t = positive_time(t)?;
            let w = whiten(&l.model, &l.tol)?;
            let op = transition_chaos_whitened(&w, t, order)?;
            let mut text = String::from("order,row,col,value\n");
            for (k, block) in op.blocks.iter().enumerate() {
                for r in 0..block.nrows() {
                    for c in 0..block.ncols() {
                        text.push_str(&format!("{k},{r},{c},{}\n", format_float(block[(r, c)])));
                    }
                }
            }
            emit(out.as_deref(), &text)
        }
        Command::Sweep {
            source,
            times,
            t_min,
            t_max,
            points,
            out,
        } => {
            let l = load(&source, profile)?;
            let grid = match times {
                Some(ts) => ts,
                None if !l.times.is_empty() => l.times.clone(),
                None => {
                    if points < 2
                        || t_max.partial_cmp(&t_min) != Some(std::cmp::Ordering::Greater)
                        || t_min < 0.0
                    {
                        return Err(OuError::InvalidInput(
                            "sweep grid needs points >= 2 and 0 <= t_min < t_max".into(),
                        ));
                    }
                    (0..points)
                        .map(|k| t_min + (t_max - t_min) * k as f64 / (points - 1) as f64)
                        .collect()
                }
            };
            if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(OuError::InvalidInput(
                    "sweep times must be finite and >= 0".into(),
                ));
            }
            let gap = spectral_gap(&l.model, &l.tol)?;
            let whitening = if l.model.diagonal_data().is_none() {
                Some(whiten(&l.model, &l.tol)?)
            } else {
                None
            };
            let rows: Vec<[f64; 4]> = grid
                .par_iter()
                .map(|&t| {
                    let norm = s_infinity_norm(&l.model, t, &l.tol)?;
                    let bound = gap.gap_omega.map_or(f64::NAN, |w| (-w * t).exp());
                    let block = match &whitening {
                        Some(w) => transition_chaos_whitened(w, t, 1)?.block_norm(1),
                        None => norm,
                    };
                    Ok([t, norm, bound, block])
                })
                .collect::<Result<_>>()?;
            let header: Vec<String> = ["t", "s_infinity_norm", "exp_bound", "block1_norm"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            emit(out.as_deref(), &csv_string(&header, rows))
        }
        Command::Example { action } => match action {
            ExampleAction::List => {
                let mut text = String::new();
                for (name, about) in BUILTINS {
                    text.push_str(&format!("{name}\t{about}\n"));
                }
                emit(None, &text)
            }
            ExampleAction::Describe { name } => {
                let model = builtin(&name)?;
                let about = BUILTINS
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map_or("", |(_, a)| a);
                let value = serde_json::json!({
                    "name": model.name(),
                    "description": about,
                    "dim": model.dim(),
                    "noise_dim": model.noise_dim(),
                    "meta": model.meta(),
                });
                emit(None, &(serde_json::to_string_pretty(&value)? + "\n"))
            }
        },
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("oulab: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}
