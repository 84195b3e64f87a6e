//! Prediction intervals: leave-one-out and replace-one stable conformal
//! prediction, and the full, split, oracle and majority-vote multi-split
//! baselines.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scores::{conformal_quantile, lower_quantile, ScoreKind};
use crate::seeds::derive_seed;
use crate::stability::StabilityProvider;
use crate::trainers::Trainer;

const SCORE: ScoreKind = ScoreKind::AbsoluteResidual;

/// Closed interval `[lo, hi]`; endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval {
    pub lo: f64,
    pub hi: f64,
}

impl PredictionInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn centered(center: f64, half_width: f64) -> Self {
        Self::new(center - half_width, center + half_width)
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains_interval(&self, other: &PredictionInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// A union of disjoint sorted intervals. Interval-valued methods produce one
/// piece; full conformal and the multi-split vote may produce several or none.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub pieces: Vec<PredictionInterval>,
    /// Point prediction the set is built around, when there is one.
    pub center: Option<f64>,
    /// Guessed response used for the refit, for replace-one sets.
    pub guess: Option<f64>,
}

impl PredictionSet {
    pub fn interval(center: f64, half_width: f64) -> Self {
        Self { pieces: vec![PredictionInterval::centered(center, half_width)], center: Some(center), guess: None }
    }

    pub fn from_pieces(pieces: Vec<PredictionInterval>) -> Self {
        Self { pieces, center: None, guess: None }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn hull(&self) -> Option<PredictionInterval> {
        Some(PredictionInterval::new(self.pieces.first()?.lo, self.pieces.last()?.hi))
    }

    pub fn contains(&self, y: f64) -> bool {
        self.pieces.iter().any(|p| p.contains(y))
    }

    /// Total length of the pieces.
    pub fn length(&self) -> f64 {
        self.pieces.iter().map(PredictionInterval::length).sum()
    }

    /// Every piece of `other` lies inside the hull of `self`.
    pub fn covers(&self, other: &PredictionSet) -> bool {
        match self.hull() {
            Some(h) => other.pieces.iter().all(|p| h.contains_interval(p)),
            None => other.is_empty(),
        }
    }
}

/// Candidate responses for full conformal prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `points` equispaced values over `[min y - k sd, max y + k sd]`.
    Auto { points: usize, sd_multiple: f64 },
    Explicit(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto { points: 200, sd_multiple: 3.0 }
    }
}

impl GridSpec {
    pub fn resolve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let grid = match self {
            GridSpec::Explicit(g) => g.clone(),
            GridSpec::Auto { points, sd_multiple } => {
                if y.is_empty() {
                    return Err(Error::EmptySample);
                }
                let n = y.len() as f64;
                let mean = y.iter().sum::<f64>() / n;
                let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                let lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - sd_multiple * sd;
                let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + sd_multiple * sd;
                match points {
                    0 => Vec::new(),
                    1 => vec![0.5 * (lo + hi)],
                    p => (0..*p).map(|k| lo + (hi - lo) * k as f64 / (*p - 1) as f64).collect(),
                }
            }
        };
        if grid.is_empty() {
            return Err(Error::InvalidConfig("full conformal grid is empty".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig("full conformal grid must be strictly increasing".into()));
        }
        Ok(grid)
    }
}

/// How replace-one stable conformal prediction guesses the test response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuessRule {
    /// Prediction of one extra fit on the training data.
    BaseFit,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpConfig {
    pub alpha: f64,
    pub grid: GridSpec,
    /// Share of the data used for training in split methods.
    pub split_fraction: f64,
    pub n_splits: usize,
    pub guess_rule: GuessRule,
    /// Seed for data splits.
    pub seed: u64,
}

impl Default for CpConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            grid: GridSpec::default(),
            split_fraction: 0.7,
            n_splits: 30,
            guess_rule: GuessRule::BaseFit,
            seed: 0,
        }
    }
}

impl CpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("split fraction {} outside (0, 1)", self.split_fraction)));
        }
        if self.n_splits == 0 {
            return Err(Error::InvalidConfig("number of splits must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

fn rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.transpose()
}

fn abs_scores(y: &[f64], pred: &[f64]) -> Vec<f64> {
    y.iter().zip(pred).map(|(&a, &b)| SCORE.score(a, b)).collect()
}

/// Fits once on `data`; each test point gets
/// `f(x) +/- (Q_{1-alpha}({S_i + tau_i} + {inf}) + tau_test)`.
pub fn loo_stabcp(
    data: &Dataset,
    test_x: &DMatrix<f64>,
    alpha: f64,
    trainer: &dyn Trainer,
    stability: &dyn StabilityProvider,
) -> Result<Vec<PredictionSet>> {
    check_alpha(alpha)?;
    let y = data.responses()?;
    let model = trainer.fit(data)?;
    let scores = abs_scores(y.as_slice(), &model.predict_rows(&data.x));
    let bounds = stability.loo(data, test_x, SCORE.gamma())?;
    let centers = model.predict_rows(test_x);
    bounds
        .iter()
        .zip(centers)
        .map(|(b, c)| {
            let adjusted: Vec<f64> = scores.iter().zip(&b.tau_train).map(|(s, t)| s + t).collect();
            Ok(PredictionSet::interval(c, conformal_quantile(&adjusted, alpha)? + b.tau_test))
        })
        .collect()
}

/// Refits on `data` plus `(x_j, guess_j)` for each test point and widens by
/// the replace-one bounds.
pub fn ro_stabcp(
    data: &Dataset,
    test_x: &DMatrix<f64>,
    alpha: f64,
    trainer: &dyn Trainer,
    stability: &dyn StabilityProvider,
    guess_rule: GuessRule,
) -> Result<Vec<PredictionSet>> {
    check_alpha(alpha)?;
    let y = data.responses()?;
    let bounds = stability.ro(data, test_x, SCORE.gamma())?;
    let guesses = match guess_rule {
        GuessRule::BaseFit => trainer.fit(data)?.predict_rows(test_x),
        GuessRule::Constant(c) => vec![c; test_x.nrows()],
    };
    let test_rows = rows(test_x);
    let n = data.n();
    test_rows
        .column_iter()
        .zip(bounds.iter().zip(guesses))
        .map(|(x, (b, guess))| {
            let aug = data.augmented(&x.into_owned(), guess)?;
            let model = trainer.fit(&aug)?;
            let pred = model.predict_rows(&data.x);
            let adjusted: Vec<f64> =
                (0..n).map(|i| SCORE.score(y[i], pred[i]) + b.tau_train[i]).collect();
            let center = model.predict(x.as_slice());
            let mut set = PredictionSet::interval(center, conformal_quantile(&adjusted, alpha)? + b.tau_test);
            set.guess = Some(guess);
            Ok(set)
        })
        .collect()
}

/// Grid full conformal prediction: `y` is accepted when its score under the
/// fit on `data + (x, y)` is at most the conformal quantile of the training
/// scores under that fit. Runs of consecutive accepted grid points become
/// pieces of the returned set.
pub fn full_cp(
    data: &Dataset,
    test_x: &DMatrix<f64>,
    alpha: f64,
    trainer: &dyn Trainer,
    grid: &GridSpec,
) -> Result<Vec<PredictionSet>> {
    check_alpha(alpha)?;
    let y = data.responses()?;
    let grid = grid.resolve(y.as_slice())?;
    let test_rows = rows(test_x);
    test_rows
        .column_iter()
        .map(|x| {
            let x = x.into_owned();
            let mut accepted = Vec::with_capacity(grid.len());
            for &g in &grid {
                let model = trainer.fit(&data.augmented(&x, g)?)?;
                let scores = abs_scores(y.as_slice(), &model.predict_rows(&data.x));
                let test_score = SCORE.score(g, model.predict(x.as_slice()));
                accepted.push(test_score <= conformal_quantile(&scores, alpha)?);
            }
            Ok(PredictionSet::from_pieces(accepted_runs(&grid, &accepted)))
        })
        .collect()
}

fn accepted_runs(grid: &[f64], accepted: &[bool]) -> Vec<PredictionInterval> {
    let mut pieces = Vec::new();
    let mut start = None;
    for (k, &a) in accepted.iter().enumerate() {
        match (a, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                pieces.push(PredictionInterval::new(grid[s], grid[k - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        pieces.push(PredictionInterval::new(grid[s], grid[grid.len() - 1]));
    }
    pieces
}

/// Random train/calibration split with `round(fraction n)` training rows.
pub fn split_folds(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction {fraction} outside (0, 1)")));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::EmptyFold(format!("splitting {n} rows at fraction {fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = sample(&mut rng, n, n_train).into_vec();
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let calib = (0..n).filter(|&i| !in_train[i]).collect();
    Ok((train, calib))
}

/// Split conformal prediction: one fit on the training fold, scores on the
/// calibration fold.
pub fn split_cp(
    data: &Dataset,
    test_x: &DMatrix<f64>,
    alpha: f64,
    trainer: &dyn Trainer,
    split_fraction: f64,
    seed: u64,
) -> Result<Vec<PredictionSet>> {
    check_alpha(alpha)?;
    data.responses()?;
    let (train_idx, calib_idx) = split_folds(data.n(), split_fraction, seed)?;
    let calib = data.select(&calib_idx);
    let model = trainer.fit(&data.select(&train_idx))?;
    let scores = abs_scores(calib.responses()?.as_slice(), &model.predict_rows(&calib.x));
    let q = conformal_quantile(&scores, alpha)?;
    Ok(model.predict_rows(test_x).into_iter().map(|c| PredictionSet::interval(c, q)).collect())
}

/// Fits on `data` plus the true test point and takes the plain quantile of
/// all `n + 1` scores (no infinite sentinel).
pub fn oracle_cp(data: &Dataset, test: &Dataset, alpha: f64, trainer: &dyn Trainer) -> Result<Vec<PredictionSet>> {
    check_alpha(alpha)?;
    let y_test = test.responses()?;
    (0..test.n())
        .map(|j| {
            let x = test.row(j);
            let aug = data.augmented(&x, y_test[j])?;
            let model = trainer.fit(&aug)?;
            let scores = abs_scores(aug.responses()?.as_slice(), &model.predict_rows(&aug.x));
            Ok(PredictionSet::interval(model.predict(x.as_slice()), lower_quantile(&scores, 1.0 - alpha)?))
        })
        .collect()
}

/// Points covered by more than half of `sets`, found by sweeping the sorted
/// endpoints. Openings sort before closings at the same position so that
/// closed intervals touching at a point count as overlapping there.
pub fn majority_vote(sets: &[PredictionInterval]) -> Vec<PredictionInterval> {
    let k = sets.len();
    let mut events: Vec<(f64, i32)> = sets.iter().flat_map(|s| [(s.lo, 1), (s.hi, -1)]).collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut count = 0i64;
    let mut start = None;
    let mut out = Vec::new();
    for (pos, delta) in events {
        count += delta as i64;
        let majority = 2 * count > k as i64;
        match (majority, start) {
            (true, None) => start = Some(pos),
            (false, Some(s)) => {
                out.push(PredictionInterval::new(s, pos));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// `K` split conformal intervals at level `alpha / 2` on independent splits,
/// combined by majority vote.
pub fn mm_split_cp(
    data: &Dataset,
    test_x: &DMatrix<f64>,
    alpha: f64,
    trainer: &dyn Trainer,
    n_splits: usize,
    split_fraction: f64,
    seed: u64,
) -> Result<Vec<PredictionSet>> {
    check_alpha(alpha)?;
    if n_splits == 0 {
        return Err(Error::InvalidConfig("number of splits must be at least 1".into()));
    }
    let per_split = (0..n_splits)
        .map(|k| split_cp(data, test_x, alpha / 2.0, trainer, split_fraction, derive_seed(seed, k as u64, "mm-split")))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..test_x.nrows())
        .map(|j| {
            let ivs: Vec<PredictionInterval> = per_split.iter().map(|s| s[j].pieces[0]).collect();
            PredictionSet::from_pieces(majority_vote(&ivs))
        })
        .collect())
}

/// Everything a conformal method may need.
pub struct MethodInput<'a> {
    pub train: &'a Dataset,
    /// Test features; responses are used only by the oracle.
    pub test: &'a Dataset,
    pub trainer: &'a dyn Trainer,
    pub stability: &'a dyn StabilityProvider,
    pub cfg: &'a CpConfig,
}

/// A conformal prediction method selectable by name.
pub trait ConformalMethod: Send + Sync {
    fn name(&self) -> &str;

    fn predict(&self, input: &MethodInput<'_>) -> Result<Vec<PredictionSet>>;
}

pub struct LooStabCp;
pub struct RoStabCp;
pub struct FullCp;
pub struct SplitCp;
pub struct OracleCp;
pub struct MmSplitCp;

impl ConformalMethod for LooStabCp {
    fn name(&self) -> &str {
        "loo-stab"
    }

    fn predict(&self, i: &MethodInput<'_>) -> Result<Vec<PredictionSet>> {
        loo_stabcp(i.train, &i.test.x, i.cfg.alpha, i.trainer, i.stability)
    }
}

impl ConformalMethod for RoStabCp {
    fn name(&self) -> &str {
        "ro-stab"
    }

    fn predict(&self, i: &MethodInput<'_>) -> Result<Vec<PredictionSet>> {
        ro_stabcp(i.train, &i.test.x, i.cfg.alpha, i.trainer, i.stability, i.cfg.guess_rule)
    }
}

impl ConformalMethod for FullCp {
    fn name(&self) -> &str {
        "full"
    }

    fn predict(&self, i: &MethodInput<'_>) -> Result<Vec<PredictionSet>> {
        full_cp(i.train, &i.test.x, i.cfg.alpha, i.trainer, &i.cfg.grid)
    }
}

impl ConformalMethod for SplitCp {
    fn name(&self) -> &str {
        "split"
    }

    fn predict(&self, i: &MethodInput<'_>) -> Result<Vec<PredictionSet>> {
        split_cp(i.train, &i.test.x, i.cfg.alpha, i.trainer, i.cfg.split_fraction, i.cfg.seed)
    }
}

impl ConformalMethod for OracleCp {
    fn name(&self) -> &str {
        "oracle"
    }

    fn predict(&self, i: &MethodInput<'_>) -> Result<Vec<PredictionSet>> {
        oracle_cp(i.train, i.test, i.cfg.alpha, i.trainer)
    }
}

impl ConformalMethod for MmSplitCp {
    fn name(&self) -> &str {
        "mm-split"
    }

    fn predict(&self, i: &MethodInput<'_>) -> Result<Vec<PredictionSet>> {
        mm_split_cp(i.train, &i.test.x, i.cfg.alpha, i.trainer, i.cfg.n_splits, i.cfg.split_fraction, i.cfg.seed)
    }
}
