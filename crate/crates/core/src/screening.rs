//! Conformal selection: conformal p-values for `H0_j: Y_j <= c_j`, the
//! Benjamini-Hochberg procedure and false-discovery accounting.

use crate::conformal::split_folds;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scores::ScoreKind;
use crate::stability::{BoundKind, StabilityBounds, StabilityProvider};
use crate::trainers::Trainer;

/// Comparison used when counting scores and when rejecting in BH.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Comparison {
    #[default]
    Strict,
    NonStrict,
}

impl Comparison {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Comparison::Strict => a < b,
            Comparison::NonStrict => a <= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Thresholds {
    Constant(f64),
    PerPoint(Vec<f64>),
}

impl Thresholds {
    pub fn resolve(&self, m: usize) -> Result<Vec<f64>> {
        match self {
            Thresholds::Constant(c) => Ok(vec![*c; m]),
            Thresholds::PerPoint(c) if c.len() == m => Ok(c.clone()),
            Thresholds::PerPoint(c) => Err(Error::DimensionMismatch { expected: m, got: c.len() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningConfig {
    /// Target FDR level.
    pub q: f64,
    pub thresholds: Thresholds,
    pub score: ScoreKind,
    pub comparison: Comparison,
    /// Training share for the split baseline.
    pub split_fraction: f64,
    pub split_seed: u64,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self {
            q: 0.1,
            thresholds: Thresholds::Constant(0.0),
            score: ScoreKind::SignedResidual,
            comparison: Comparison::Strict,
            split_fraction: 0.7,
            split_seed: 0,
        }
    }
}

impl ScreeningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidConfig(format!("q {} outside (0, 1)", self.q)));
        }
        if self.score == ScoreKind::AbsoluteResidual {
            return Err(Error::InvalidConfig("screening needs a score monotone in the response (signed or clip)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScreeningMethod {
    /// Split-conformal p-values.
    CfBh,
    RoCfBh,
    LooCfBh,
}

impl ScreeningMethod {
    pub const ALL: [ScreeningMethod; 3] = [ScreeningMethod::CfBh, ScreeningMethod::RoCfBh, ScreeningMethod::LooCfBh];

    pub fn name(self) -> &'static str {
        match self {
            ScreeningMethod::CfBh => "cfbh",
            ScreeningMethod::RoCfBh => "ro-cfbh",
            ScreeningMethod::LooCfBh => "loo-cfbh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningResult {
    pub p_values: Vec<f64>,
    pub k_star: usize,
    /// Rejected test indices, ascending.
    pub rejected: Vec<usize>,
    pub fdp: Option<f64>,
    pub power: Option<f64>,
    /// True when no alternative holds and power was set to 1 by convention.
    pub power_undefined: bool,
}

/// `(#{i : S_i < T_j} + 1) / (|calib| + 1)`.
pub fn split_pvalues(calib_scores: &[f64], test_scores: &[f64], cmp: Comparison) -> Result<Vec<f64>> {
    if calib_scores.is_empty() {
        return Err(Error::EmptySample);
    }
    let denom = calib_scores.len() as f64 + 1.0;
    Ok(test_scores
        .iter()
        .map(|&t| (calib_scores.iter().filter(|&&s| cmp.holds(s, t)).count() as f64 + 1.0) / denom)
        .collect())
}

/// `(#{i : S_i - tau_i < T_j + tau_test} + 1) / (n + 1)` with bounds of `kind`.
pub fn stable_pvalues(
    train_scores: &[f64],
    test_scores: &[f64],
    bounds: &[StabilityBounds],
    kind: BoundKind,
    cmp: Comparison,
) -> Result<Vec<f64>> {
    if train_scores.is_empty() {
        return Err(Error::EmptySample);
    }
    if bounds.len() != test_scores.len() {
        return Err(Error::DimensionMismatch { expected: test_scores.len(), got: bounds.len() });
    }
    let denom = train_scores.len() as f64 + 1.0;
    test_scores
        .iter()
        .zip(bounds)
        .map(|(&t, b)| {
            if b.kind != kind {
                return Err(Error::InvalidConfig(format!("expected {kind:?} bounds, got {:?}", b.kind)));
            }
            if b.tau_train.len() != train_scores.len() {
                return Err(Error::DimensionMismatch { expected: train_scores.len(), got: b.tau_train.len() });
            }
            let hi = t + b.tau_test;
            let count = train_scores.iter().zip(&b.tau_train).filter(|&(&s, &tau)| cmp.holds(s - tau, hi)).count();
            Ok((count as f64 + 1.0) / denom)
        })
        .collect()
}

pub fn loo_pvalues(train_scores: &[f64], test_scores: &[f64], bounds: &[StabilityBounds], cmp: Comparison) -> Result<Vec<f64>> {
    stable_pvalues(train_scores, test_scores, bounds, BoundKind::Loo, cmp)
}

pub fn ro_pvalues(train_scores: &[f64], test_scores: &[f64], bounds: &[StabilityBounds], cmp: Comparison) -> Result<Vec<f64>> {
    stable_pvalues(train_scores, test_scores, bounds, BoundKind::Ro, cmp)
}

/// `k* = max{k : #{p_j <= q k / m} >= k}`; rejects `p_j < q k* / m` (or `<=`).
pub fn bh_procedure(p_values: &[f64], q: f64, cmp: Comparison) -> (usize, Vec<usize>) {
    let m = p_values.len();
    if m == 0 {
        return (0, Vec::new());
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // #{p <= qk/m} >= k  iff  the k-th smallest p is <= qk/m
    let k_star = (1..=m).rev().find(|&k| sorted[k - 1] <= q * k as f64 / m as f64).unwrap_or(0);
    if k_star == 0 {
        return (0, Vec::new());
    }
    let cut = q * k_star as f64 / m as f64;
    let rejected = (0..m).filter(|&j| cmp.holds(p_values[j], cut)).collect();
    (k_star, rejected)
}

/// `(FDP, power, power_undefined)` for rejections against `h1[j] = Y_j > c_j`.
pub fn fdp_power(rejected: &[usize], h1: &[bool]) -> (f64, f64, bool) {
    let false_rej = rejected.iter().filter(|&&j| !h1[j]).count();
    let true_rej = rejected.len() - false_rej;
    let fdp = false_rej as f64 / rejected.len().max(1) as f64;
    let n_h1 = h1.iter().filter(|&&h| h).count();
    if n_h1 == 0 {
        (fdp, 1.0, true)
    } else {
        (fdp, true_rej as f64 / n_h1 as f64, false)
    }
}

/// p-values of one screening method; the trainer's fit count records the
/// fits used (1 for split and LOO, `m + 1` for RO).
pub fn screening_pvalues(
    data: &Dataset,
    test: &Dataset,
    cfg: &ScreeningConfig,
    method: ScreeningMethod,
    trainer: &dyn Trainer,
    stability: &dyn StabilityProvider,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let y = data.responses()?;
    let m = test.n();
    let c = cfg.thresholds.resolve(m)?;
    let score = cfg.score;
    match method {
        ScreeningMethod::CfBh => {
            let (train_idx, calib_idx) = split_folds(data.n(), cfg.split_fraction, cfg.split_seed)?;
            let model = trainer.fit(&data.select(&train_idx))?;
            let calib = data.select(&calib_idx);
            let cy = calib.responses()?;
            let calib_scores: Vec<f64> =
                model.predict_rows(&calib.x).iter().zip(cy.iter()).map(|(&z, &yi)| score.score(yi, z)).collect();
            let test_scores: Vec<f64> =
                model.predict_rows(&test.x).iter().zip(&c).map(|(&z, &cj)| score.score(cj, z)).collect();
            split_pvalues(&calib_scores, &test_scores, cfg.comparison)
        }
        ScreeningMethod::LooCfBh => {
            let model = trainer.fit(data)?;
            let train_scores: Vec<f64> =
                model.predict_rows(&data.x).iter().zip(y.iter()).map(|(&z, &yi)| score.score(yi, z)).collect();
            let test_scores: Vec<f64> =
                model.predict_rows(&test.x).iter().zip(&c).map(|(&z, &cj)| score.score(cj, z)).collect();
            let bounds = stability.loo(data, &test.x, score.gamma())?;
            loo_pvalues(&train_scores, &test_scores, &bounds, cfg.comparison)
        }
        ScreeningMethod::RoCfBh => {
            let bounds = stability.ro(data, &test.x, score.gamma())?;
            let guesses = trainer.fit(data)?.predict_rows(&test.x);
            (0..m)
                .map(|j| {
                    let x = test.row(j);
                    let model = trainer.fit(&data.augmented(&x, guesses[j])?)?;
                    let train_scores: Vec<f64> =
                        model.predict_rows(&data.x).iter().zip(y.iter()).map(|(&z, &yi)| score.score(yi, z)).collect();
                    let t = score.score(c[j], model.predict(x.as_slice()));
                    Ok(ro_pvalues(&train_scores, &[t], std::slice::from_ref(&bounds[j]), cfg.comparison)?[0])
                })
                .collect()
        }
    }
}

/// p-values, BH at level `q`, and FDP and power when `test` carries responses.
pub fn run_screening(
    data: &Dataset,
    test: &Dataset,
    cfg: &ScreeningConfig,
    method: ScreeningMethod,
    trainer: &dyn Trainer,
    stability: &dyn StabilityProvider,
) -> Result<ScreeningResult> {
    let p_values = screening_pvalues(data, test, cfg, method, trainer, stability)?;
    Ok(select(p_values, test, cfg))
}

/// BH and accounting for precomputed p-values, so several `q` levels can
/// share one set of fits.
pub fn select(p_values: Vec<f64>, test: &Dataset, cfg: &ScreeningConfig) -> ScreeningResult {
    let (k_star, rejected) = bh_procedure(&p_values, cfg.q, cfg.comparison);
    let (fdp, power, power_undefined) = match (&test.y, cfg.thresholds.resolve(test.n())) {
        (Some(y), Ok(c)) => {
            let h1: Vec<bool> = y.iter().zip(&c).map(|(yj, cj)| yj > cj).collect();
            let (f, p, u) = fdp_power(&rejected, &h1);
            (Some(f), Some(p), u)
        }
        _ => (None, None, false),
    };
    ScreeningResult { p_values, k_star, rejected, fdp, power, power_undefined }
}
