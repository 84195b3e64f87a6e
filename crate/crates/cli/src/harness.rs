//! Seeded repetitions of the interval and screening benchmarks.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use stabcp::conformal::{CpConfig, MethodInput};
use stabcp::data::{gen_synthetic, holdout_split, load_csv, zscore_features, zscore_normalize, Dataset};
use stabcp::screening::{screening_pvalues, select, ScreeningConfig, ScreeningMethod, Thresholds};
use stabcp::seeds::derive_seed;
use stabcp::{Registry, TrainerSpec};

use crate::config::{DataSource, ExperimentConfig, Mode, ThresholdRule};
use crate::error::{CliError, Result};
use crate::metrics::{
    format_summary, summarize, write_metrics, write_plot_data, write_summary, MetricsRow, Row, ScreenRow, SummaryRow,
};
use crate::reference;

pub enum Output {
    Intervals { rows: Vec<MetricsRow>, summary: Vec<SummaryRow> },
    Screen { rows: Vec<ScreenRow>, summary: Vec<SummaryRow> },
}

impl Output {
    pub fn summary(&self) -> &[SummaryRow] {
        match self {
            Output::Intervals { summary, .. } | Output::Screen { summary, .. } => summary,
        }
    }
}

/// Per-repetition seeds, fixed by the master seed and repetition index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepetitionSeeds {
    pub data: u64,
    pub trainer: u64,
    pub split: u64,
}

impl RepetitionSeeds {
    pub fn new(master: u64, repetition: usize) -> Self {
        let r = repetition as u64;
        Self { data: derive_seed(master, r, "data"), trainer: derive_seed(master, r, "trainer"), split: derive_seed(master, r, "split") }
    }

    pub fn trainer_spec(&self, base: &TrainerSpec) -> TrainerSpec {
        TrainerSpec {
            permutation_seed: self.trainer,
            init_seed: derive_seed(self.trainer, 0, "init"),
            bagging_seed: derive_seed(self.trainer, 0, "bagging"),
            ..base.clone()
        }
    }
}

/// Loads and normalizes the CSV once; synthetic sources return `None`.
fn load_base(cfg: &ExperimentConfig) -> Result<Option<Dataset>> {
    match &cfg.source {
        DataSource::Synthetic(_) => Ok(None),
        DataSource::Csv { path, response, .. } => {
            let raw = load_csv(path, response)?;
            // screening responses are labels, so only features are standardized
            let data = if cfg.mode == Mode::Screen { zscore_features(&raw)? } else { zscore_normalize(&raw)? };
            Ok(Some(data))
        }
    }
}

fn repetition_data(cfg: &ExperimentConfig, seeds: &RepetitionSeeds, base: Option<&Dataset>) -> stabcp::Result<(Dataset, Dataset)> {
    match (&cfg.source, base) {
        (DataSource::Synthetic(spec), _) => gen_synthetic(&stabcp::SyntheticSpec { seed: seeds.data, ..spec.clone() }),
        (DataSource::Csv { test_size, test_fraction, .. }, Some(data)) => {
            let m = test_size.unwrap_or_else(|| (test_fraction * data.n() as f64).round() as usize);
            holdout_split(data, m, seeds.data)
        }
        (DataSource::Csv { .. }, None) => unreachable!("CSV sources are loaded before repetitions start"),
    }
}

fn in_pool<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {parallelism} worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn tag(repetition: usize, seed: u64) -> impl Fn(stabcp::Error) -> CliError {
    move |source| CliError::Repetition { repetition, seed, source }
}

/// One repetition of an interval benchmark: every method sees the same data.
pub fn interval_repetition(cfg: &ExperimentConfig, repetition: usize, base: Option<&Dataset>) -> Result<Vec<MetricsRow>> {
    let registry = Registry::builtin();
    let seeds = RepetitionSeeds::new(cfg.master_seed, repetition);
    let err = tag(repetition, seeds.data);
    let (train, test) = repetition_data(cfg, &seeds, base).map_err(&err)?;
    let y_test = test.responses().map_err(&err)?.clone();
    let spec = seeds.trainer_spec(&cfg.trainer_spec);
    let cp = CpConfig { seed: seeds.split, ..cfg.cp.clone() };
    cfg.methods
        .iter()
        .map(|name| {
            let method = registry.method(name).map_err(&err)?;
            let fitted = registry.trainer(&cfg.trainer, &spec, &train).map_err(&err)?;
            let input = MethodInput {
                train: &train,
                test: &test,
                trainer: fitted.trainer.as_ref(),
                stability: fitted.stability.as_ref(),
                cfg: &cp,
            };
            let start = Instant::now();
            let sets = method.predict(&input).map_err(&err)?;
            let wall_time_s = start.elapsed().as_secs_f64();
            let m = sets.len() as f64;
            let covered = sets.iter().zip(y_test.iter()).filter(|(s, &y)| s.contains(y)).count();
            Ok(MetricsRow {
                repetition,
                method: name.clone(),
                coverage: covered as f64 / m,
                mean_length: sets.iter().map(|s| s.length()).sum::<f64>() / m,
                wall_time_s,
                fit_count: fitted.trainer.fit_count(),
            })
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    if s.len() % 2 == 1 {
        s[k]
    } else {
        0.5 * (s[k - 1] + s[k])
    }
}

/// One repetition of the screening benchmark; p-values are computed once per
/// method and reused across FDR levels.
pub fn screen_repetition(cfg: &ExperimentConfig, repetition: usize, base: Option<&Dataset>) -> Result<Vec<ScreenRow>> {
    let registry = Registry::builtin();
    let seeds = RepetitionSeeds::new(cfg.master_seed, repetition);
    let err = tag(repetition, seeds.data);
    let (train, test) = repetition_data(cfg, &seeds, base).map_err(&err)?;
    let c = match cfg.screen.threshold {
        ThresholdRule::Value(c) => c,
        ThresholdRule::Median => median(train.responses().map_err(&err)?.as_slice()),
    };
    let spec = seeds.trainer_spec(&cfg.trainer_spec);
    let sc = ScreeningConfig {
        q: cfg.screen.q_levels[0],
        thresholds: Thresholds::Constant(c),
        score: cfg.screen.score,
        comparison: cfg.screen.comparison,
        split_fraction: cfg.cp.split_fraction,
        split_seed: seeds.split,
    };
    let mut rows = Vec::new();
    for name in &cfg.methods {
        let method = ScreeningMethod::from_name(name).ok_or_else(|| CliError::Usage(format!("unknown screening method '{name}'")))?;
        let fitted = registry.trainer(&cfg.trainer, &spec, &train).map_err(&err)?;
        let start = Instant::now();
        let p = screening_pvalues(&train, &test, &sc, method, fitted.trainer.as_ref(), fitted.stability.as_ref())
            .map_err(&err)?;
        let wall_time_s = start.elapsed().as_secs_f64();
        for &q in &cfg.screen.q_levels {
            let r = select(p.clone(), &test, &ScreeningConfig { q, ..sc.clone() });
            rows.push(ScreenRow {
                repetition,
                method: name.clone(),
                q,
                fdp: r.fdp.unwrap_or(0.0),
                power: r.power.unwrap_or(0.0),
                power_undefined: r.power_undefined,
                rejections: r.rejected.len(),
                wall_time_s,
                fit_count: fitted.trainer.fit_count(),
            });
        }
    }
    Ok(rows)
}

fn run_all<R, F>(cfg: &ExperimentConfig, base: Option<&Dataset>, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&ExperimentConfig, usize, Option<&Dataset>) -> Result<Vec<R>> + Sync,
{
    let per_rep = in_pool(cfg.parallelism, || {
        (0..cfg.repetitions).into_par_iter().map(|r| f(cfg, r, base)).collect::<Result<Vec<_>>>()
    })??;
    Ok(per_rep.into_iter().flatten().collect())
}

/// Runs every repetition and writes outputs when `cfg.out` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<Output> {
    let base = load_base(cfg)?;
    let output = match cfg.mode {
        Mode::Simulate | Mode::Bench => {
            let rows = run_all(cfg, base.as_ref(), interval_repetition)?;
            let summary = summarize(&rows);
            Output::Intervals { rows, summary }
        }
        Mode::Screen => {
            let rows = run_all(cfg, base.as_ref(), screen_repetition)?;
            let summary = summarize(&rows);
            Output::Screen { rows, summary }
        }
    };
    if let Some(dir) = &cfg.out {
        write_outputs(cfg, &output, dir)?;
    }
    Ok(output)
}

fn with_reference(cfg: &ExperimentConfig) -> bool {
    cfg.mode == Mode::Screen && matches!(cfg.source, DataSource::Csv { .. })
}

fn reference_columns(s: &SummaryRow) -> Vec<(&'static str, String)> {
    let q: f64 = s.group[1].parse().unwrap_or(f64::NAN);
    let r = reference::recruitment(&s.group[0], q);
    let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    vec![
        ("reference_fdp", cell(r.map(|r| r.0))),
        ("reference_power", cell(r.map(|r| r.1))),
        ("reference_time_s", cell(r.map(|r| r.2))),
    ]
}

fn write_all<R: Row>(rows: &[R], summary: &[SummaryRow], dir: &Path, reference: bool) -> Result<()> {
    write_metrics(rows, &dir.join("metrics.csv"))?;
    let annotate: Option<crate::metrics::Annotate<'_>> = if reference { Some(&reference_columns) } else { None };
    write_summary::<R>(summary, &dir.join("summary.csv"), annotate)?;
    write_plot_data(rows, &dir.join("plot_data.csv"))
}

pub fn write_outputs(cfg: &ExperimentConfig, output: &Output, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.echo"), cfg.echo())?;
    match output {
        Output::Intervals { rows, summary } => write_all(rows, summary, dir, false),
        Output::Screen { rows, summary } => write_all(rows, summary, dir, with_reference(cfg)),
    }
}

/// Human-readable summary, with published reference values for the
/// recruitment screen.
pub fn report(cfg: &ExperimentConfig, output: &Output) -> String {
    let mut text = format_summary(output.summary());
    if with_reference(cfg) {
        text.push_str("\nreference (recruitment data, published means; not a pass/fail gate):\n");
        for s in output.summary() {
            let cols = reference_columns(s);
            if cols[0].1.is_empty() {
                continue;
            }
            let ours = (s.stat("fdp").unwrap_or_default().0, s.stat("power").unwrap_or_default().0);
            text.push_str(&format!(
                "{:<10} q={:<4} fdp {:.4} vs {}  power {:.4} vs {}\n",
                s.group[0], s.group[1], ours.0, cols[0].1, ours.1, cols[1].1
            ));
        }
    }
    text
}
