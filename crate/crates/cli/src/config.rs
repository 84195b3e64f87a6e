//! Command-line flags, config-file merging and the resolved experiment
//! configuration.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use stabcp::conformal::{CpConfig, GridSpec, GuessRule};
use stabcp::data::{MeanModel, SyntheticSpec};
use stabcp::models::{KernelKind, KernelSpec};
use stabcp::screening::{Comparison, ScreeningMethod};
use stabcp::stability::BaggingBound;
use stabcp::trainers::{BaseLearner, RlmSolver};
use stabcp::{Registry, ScoreKind, TrainerSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "stabcp", version, about = "Stable conformal prediction benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic regression benchmark.
    #[command(args_override_self = true)]
    Simulate(RunArgs),
    /// Benchmark on a user-supplied CSV with random holdouts.
    #[command(args_override_self = true)]
    Bench(RunArgs),
    /// Conformal selection on synthetic data or a CSV.
    #[command(args_override_self = true)]
    Screen(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Simulate,
    Bench,
    Screen,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Bench => "bench",
            Mode::Screen => "screen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Rbf,
    Poly,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    Tree,
    Stump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Newton,
    Gd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundArg {
    Derandomized,
    Probabilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ComparisonArg {
    Strict,
    NonStrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Signed,
    Clip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Nonlinear,
}

/// Flags shared by all subcommands. Unset options take subcommand-specific
/// defaults during resolution.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Config file with `key = value` lines under `[section]` headers.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated method names.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Output directory for metrics.csv, summary.csv, plot_data.csv and config.echo.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for repetitions.
    #[arg(long)]
    pub parallelism: Option<usize>,

    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated FDR levels (screen).
    #[arg(long)]
    pub q: Option<String>,

    #[arg(long)]
    pub trainer: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// RLM optimizer; defaults to gradient descent for `rlm` and Newton for `kernel-rlm`.
    #[arg(long, value_enum)]
    pub rlm_solver: Option<SolverArg>,
    /// Fixed gradient-descent step for RLM (implies `--rlm-solver gd`); by
    /// default the step is derived from the data.
    #[arg(long)]
    pub rlm_learning_rate: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub kernel_c: Option<f64>,
    #[arg(long)]
    pub degree: Option<u32>,
    /// Comma-separated hidden layer widths.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub bags: Option<usize>,
    #[arg(long)]
    pub bag_size: Option<usize>,
    #[arg(long, value_enum)]
    pub base: Option<BaseArg>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum)]
    pub bagging_bound: Option<BoundArg>,
    #[arg(long)]
    pub delta: Option<f64>,

    #[arg(long)]
    pub split_fraction: Option<f64>,
    #[arg(long)]
    pub n_splits: Option<usize>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub grid_sd: Option<f64>,

    #[arg(long)]
    pub n: Option<usize>,
    /// Test points per repetition (synthetic) or holdout size (CSV).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub noise: Option<f64>,

    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    /// Holdout share for CSV data when `--m` is not given.
    #[arg(long)]
    pub test_fraction: Option<f64>,

    /// Screening cutoff `c`: a number, or `median` of the training responses.
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long, value_enum)]
    pub score: Option<ScoreArg>,
    #[arg(long, value_enum)]
    pub comparison: Option<ComparisonArg>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv { path: PathBuf, response: String, test_size: Option<usize>, test_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    Value(f64),
    /// Median of each repetition's training responses.
    Median,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenSettings {
    pub q_levels: Vec<f64>,
    pub threshold: ThresholdRule,
    pub score: ScoreKind,
    pub comparison: Comparison,
}

/// Fully resolved configuration of one harness run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub methods: Vec<String>,
    pub repetitions: usize,
    pub master_seed: u64,
    pub out: Option<PathBuf>,
    pub parallelism: usize,
    pub trainer: String,
    pub trainer_spec: TrainerSpec,
    pub cp: CpConfig,
    pub source: DataSource,
    pub screen: ScreenSettings,
}

/// Synthetic screening mirrors the shape of a small tabular selection
/// problem: 172 training rows, 43 candidates, 12 features.
fn screen_synthetic_default() -> SyntheticSpec {
    SyntheticSpec { n: 172, m: 43, d: 12, noise_sd: 0.25, ..SyntheticSpec::default() }
}

/// Synthetic features have squared norm near 1, so this step matches
/// `0.001` on 12 standardized features.
const SCREEN_LEARNING_RATE: f64 = 0.01;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| usage(format!("--{flag}: cannot parse '{t}'"))))
        .collect()
}

/// Reads a config file into `--key value` arguments. Section headers only
/// group keys; a key means the same flag in any section.
pub fn config_file_args(path: &Path) -> Result<Vec<OsString>> {
    let err = |message: String| CliError::ConfigFile { path: path.to_path_buf(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| err(e.to_string()))?;
    let mut out = Vec::new();
    fn push(out: &mut Vec<OsString>, key: &str, value: &toml::Value) -> std::result::Result<(), String> {
        let text = match value {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    toml::Value::Float(f) => Ok(f.to_string()),
                    other => Err(format!("unsupported list item {other} for '{key}'")),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?
                .join(","),
            other => return Err(format!("unsupported value {other} for '{key}'")),
        };
        out.push(format!("--{}", key.replace('_', "-")).into());
        out.push(text.into());
        Ok(())
    }
    for (key, value) in &table {
        match value {
            toml::Value::Table(section) => {
                for (k, v) in section {
                    push(&mut out, k, v).map_err(err)?;
                }
            }
            v => push(&mut out, key, v).map_err(err)?,
        }
    }
    Ok(out)
}

/// Inserts config-file arguments right after the subcommand so that flags
/// given on the command line take precedence.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        }
    }
    let Some(path) = config else { return Ok(args) };
    if args.len() < 2 {
        return Ok(args);
    }
    let mut out = args[..2].to_vec();
    out.extend(config_file_args(&path)?);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        match cli.command {
            Command::Simulate(a) => Self::resolve(Mode::Simulate, a),
            Command::Bench(a) => Self::resolve(Mode::Bench, a),
            Command::Screen(a) => Self::resolve(Mode::Screen, a),
        }
    }

    pub fn resolve(mode: Mode, a: RunArgs) -> Result<Self> {
        let registry = Registry::builtin();
        let default_methods = match mode {
            Mode::Screen => "cfbh,ro-cfbh,loo-cfbh",
            _ => "oracle,split,ro-stab,loo-stab",
        };
        let methods: Vec<String> = parse_list("methods", a.methods.as_deref().unwrap_or(default_methods))?;
        if methods.is_empty() {
            return Err(usage("--methods must name at least one method"));
        }
        for m in &methods {
            let known = match mode {
                Mode::Screen => ScreeningMethod::from_name(m).is_some(),
                _ => registry.method(m).is_ok(),
            };
            if !known {
                let available = match mode {
                    Mode::Screen => ScreeningMethod::ALL.iter().map(|m| m.name()).collect::<Vec<_>>().join(", "),
                    _ => registry.method_names().join(", "),
                };
                return Err(usage(format!("unknown method '{m}' (available: {available})")));
            }
        }
        let repetitions = a.repetitions.unwrap_or(100);
        if repetitions == 0 {
            return Err(usage("--repetitions must be at least 1"));
        }
        let trainer = a.trainer.clone().unwrap_or_else(|| if mode == Mode::Screen { "sgd" } else { "rlm" }.to_string());
        if !registry.has_trainer(&trainer) {
            return Err(usage(format!(
                "unknown trainer '{trainer}' (available: {})",
                registry.trainer_names().join(", ")
            )));
        }

        let d = TrainerSpec::default();
        let synthetic_screen = mode == Mode::Screen && a.csv.is_none();
        let kernel = match a.kernel.unwrap_or(KernelArg::Rbf) {
            KernelArg::Rbf => KernelSpec::rbf(a.sigma.unwrap_or(1.0)),
            KernelArg::Poly => KernelSpec::polynomial(a.kernel_c.unwrap_or(1.0), a.degree.unwrap_or(2)),
            KernelArg::Linear => KernelSpec::linear(),
        };
        kernel.validate()?;
        let base = match a.base.unwrap_or(BaseArg::Tree) {
            BaseArg::Stump => BaseLearner::Stump,
            BaseArg::Tree => BaseLearner::Tree { max_depth: a.depth.unwrap_or(3) },
        };
        let bagging_bound = match a.bagging_bound.unwrap_or(BoundArg::Derandomized) {
            BoundArg::Derandomized => BaggingBound::Derandomized,
            BoundArg::Probabilistic => {
                BaggingBound::Probabilistic { bags: a.bags.unwrap_or(d.bags), delta: a.delta.unwrap_or(0.1) }
            }
        };
        let trainer_spec = TrainerSpec {
            epsilon: a.epsilon.unwrap_or(d.epsilon),
            omega: a.omega.unwrap_or(d.omega),
            epochs: a.epochs.unwrap_or(d.epochs),
            learning_rate: a.learning_rate.unwrap_or(if synthetic_screen {
                SCREEN_LEARNING_RATE
            } else {
                d.learning_rate
            }),
            rlm_solver: match (a.rlm_solver, a.rlm_learning_rate) {
                (Some(SolverArg::Newton), Some(_)) => {
                    return Err(usage("--rlm-learning-rate applies only to --rlm-solver gd"));
                }
                (Some(SolverArg::Gd), lr) | (None, lr @ Some(_)) => Some(RlmSolver::GradientDescent { learning_rate: lr }),
                (Some(SolverArg::Newton), None) => Some(RlmSolver::Newton),
                (None, None) => None,
            },
            max_iters: a.max_iters.unwrap_or(d.max_iters),
            grad_tol: a.grad_tol.unwrap_or(d.grad_tol),
            kernel,
            hidden: match &a.hidden {
                Some(h) => parse_list("hidden", h)?,
                None => d.hidden.clone(),
            },
            bags: a.bags.unwrap_or(d.bags),
            bag_size: a.bag_size,
            base,
            bagging_bound,
            ..d
        };

        let cp = CpConfig {
            alpha: a.alpha.unwrap_or(0.1),
            grid: GridSpec::Auto { points: a.grid_points.unwrap_or(200), sd_multiple: a.grid_sd.unwrap_or(3.0) },
            split_fraction: a.split_fraction.unwrap_or(0.7),
            n_splits: a.n_splits.unwrap_or(30),
            guess_rule: GuessRule::BaseFit,
            seed: 0,
        };
        cp.validate()?;

        let source = match (&a.csv, mode) {
            (None, Mode::Bench) => return Err(usage("bench needs --csv and --response")),
            (None, _) => {
                let model = match a.model.unwrap_or(ModelArg::Linear) {
                    ModelArg::Linear => MeanModel::Linear,
                    ModelArg::Nonlinear => MeanModel::Nonlinear,
                };
                let s = if mode == Mode::Screen { screen_synthetic_default() } else { SyntheticSpec::default() };
                DataSource::Synthetic(SyntheticSpec {
                    n: a.n.unwrap_or(s.n),
                    m: a.m.unwrap_or(s.m),
                    d: a.d.unwrap_or(s.d),
                    rho_ar: a.rho.unwrap_or(s.rho_ar),
                    model,
                    noise_sd: a.noise.unwrap_or(s.noise_sd),
                    seed: 0,
                })
            }
            (Some(path), _) => {
                let response = a.response.clone().ok_or_else(|| usage("--csv needs --response"))?;
                let test_fraction = a.test_fraction.unwrap_or(0.2);
                if !(test_fraction > 0.0 && test_fraction < 1.0) {
                    return Err(usage("--test-fraction must lie in (0, 1)"));
                }
                DataSource::Csv { path: path.clone(), response, test_size: a.m, test_fraction }
            }
        };

        let threshold = match a.threshold.as_deref() {
            None => match (&source, mode) {
                (DataSource::Csv { .. }, Mode::Screen) => {
                    return Err(usage("screening a CSV needs an explicit --threshold"));
                }
                _ => ThresholdRule::Median,
            },
            Some("median") => ThresholdRule::Median,
            Some(v) => ThresholdRule::Value(v.parse().map_err(|_| usage(format!("--threshold: cannot parse '{v}'")))?),
        };
        let q_levels: Vec<f64> = parse_list("q", a.q.as_deref().unwrap_or("0.1,0.2,0.3"))?;
        if q_levels.is_empty() || q_levels.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(usage("--q levels must lie in (0, 1)"));
        }
        let screen = ScreenSettings {
            q_levels,
            threshold,
            score: match a.score.unwrap_or(ScoreArg::Signed) {
                ScoreArg::Signed => ScoreKind::SignedResidual,
                ScoreArg::Clip => ScoreKind::Clip,
            },
            comparison: match a.comparison.unwrap_or(ComparisonArg::Strict) {
                ComparisonArg::Strict => Comparison::Strict,
                ComparisonArg::NonStrict => Comparison::NonStrict,
            },
        };

        let parallelism = a.parallelism.unwrap_or(1);
        if parallelism == 0 {
            return Err(usage("--parallelism must be at least 1"));
        }
        Ok(Self {
            mode,
            methods,
            repetitions,
            master_seed: a.master_seed.unwrap_or(42),
            out: a.out,
            parallelism,
            trainer,
            trainer_spec,
            cp,
            source,
            screen,
        })
    }

    /// The resolved configuration as `key = value` lines.
    pub fn echo(&self) -> String {
        let t = &self.trainer_spec;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("subcommand", self.mode.name().into());
        kv("methods", self.methods.join(","));
        kv("repetitions", self.repetitions.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("parallelism", self.parallelism.to_string());
        kv("trainer", self.trainer.clone());
        kv("epsilon", t.epsilon.to_string());
        kv("omega", t.omega.to_string());
        kv("epochs", t.epochs.to_string());
        kv("learning_rate", t.learning_rate.to_string());
        let solver = match t.rlm_solver {
            None => "trainer default".into(),
            Some(RlmSolver::Newton) => "newton".into(),
            Some(RlmSolver::GradientDescent { learning_rate: None }) => "gd(step=auto)".into(),
            Some(RlmSolver::GradientDescent { learning_rate: Some(v) }) => format!("gd(step={v})"),
        };
        kv("rlm_solver", solver);
        kv("max_iters", t.max_iters.to_string());
        kv("grad_tol", t.grad_tol.to_string());
        let kernel = match t.kernel.kind {
            KernelKind::Rbf => format!("rbf(sigma={})", t.kernel.sigma),
            KernelKind::Polynomial => format!("poly(c={}, degree={})", t.kernel.c, t.kernel.degree),
            KernelKind::Linear => "linear".into(),
        };
        kv("kernel", kernel);
        kv("hidden", t.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","));
        kv("bags", t.bags.to_string());
        kv("bag_size", t.bag_size.map_or("n".into(), |v| v.to_string()));
        kv("base", format!("{:?}", t.base));
        kv("bagging_bound", format!("{:?}", t.bagging_bound));
        kv("alpha", self.cp.alpha.to_string());
        if let GridSpec::Auto { points, sd_multiple } = &self.cp.grid {
            kv("grid_points", points.to_string());
            kv("grid_sd", sd_multiple.to_string());
        }
        kv("split_fraction", self.cp.split_fraction.to_string());
        kv("n_splits", self.cp.n_splits.to_string());
        match &self.source {
            DataSource::Synthetic(sp) => {
                kv("n", sp.n.to_string());
                kv("m", sp.m.to_string());
                kv("d", sp.d.to_string());
                kv("rho", sp.rho_ar.to_string());
                kv("model", sp.model.name().into());
                kv("noise", sp.noise_sd.to_string());
            }
            DataSource::Csv { path, response, test_size, test_fraction } => {
                kv("csv", path.display().to_string());
                kv("response", response.clone());
                kv("m", test_size.map_or("auto".into(), |v| v.to_string()));
                kv("test_fraction", test_fraction.to_string());
            }
        }
        if self.mode == Mode::Screen {
            kv("q", self.screen.q_levels.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(","));
            let c = match self.screen.threshold {
                ThresholdRule::Value(v) => v.to_string(),
                ThresholdRule::Median => "median".into(),
            };
            kv("threshold", c);
            kv("score", self.screen.score.name().into());
            kv("comparison", format!("{:?}", self.screen.comparison).to_lowercase());
        }
        s
    }
}

/// Parses arguments (with config-file expansion) into a resolved config.
pub fn parse_args<I, T>(args: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = expand_config(args.into_iter().map(Into::into).collect())?;
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp
        | clap::error::ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
        _ => usage(e.to_string()),
    })?;
    ExperimentConfig::from_cli(cli)
}
