//! Non-conformity scores and lower sample quantiles.
//!
//! `+inf` (`f64::INFINITY`) is the sentinel appended by conformal quantiles.
//! It only ever takes part in comparisons; adding a finite stability
//! correction to it leaves it infinite, which is the intended reading.

use crate::error::{Error, Result};

/// How the discrepancy between a response `y` and a prediction `z` is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreKind {
    /// `|y - z|`
    AbsoluteResidual,
    /// `y - z`
    SignedResidual,
    /// `100 y - z`, used for binary responses in screening.
    Clip,
}

impl ScoreKind {
    pub fn score(self, y: f64, z: f64) -> f64 {
        match self {
            ScoreKind::AbsoluteResidual => (y - z).abs(),
            ScoreKind::SignedResidual => y - z,
            ScoreKind::Clip => 100.0 * y - z,
        }
    }

    /// Lipschitz constant of `z -> score(y, z)`. All built-in kinds are 1-Lipschitz.
    pub fn gamma(self) -> f64 {
        1.0
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::AbsoluteResidual => "absolute",
            ScoreKind::SignedResidual => "signed",
            ScoreKind::Clip => "clip",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "absolute" | "abs" => Some(ScoreKind::AbsoluteResidual),
            "signed" => Some(ScoreKind::SignedResidual),
            "clip" => Some(ScoreKind::Clip),
            _ => None,
        }
    }
}

/// Free-function form of [`ScoreKind::score`].
pub fn score(kind: ScoreKind, y: f64, z: f64) -> f64 {
    kind.score(y, z)
}

/// Rank `ceil(p * n)` (1-based) of the lower-`p` quantile among `n` values.
///
/// `p * n` is nudged down by a relative 1e-12 before the ceiling so that
/// levels such as `0.9` with `n = 100` select rank 90 instead of being
/// pushed to 91 by binary representation error.
pub fn quantile_rank(p: f64, n: usize) -> usize {
    let raw = p * n as f64;
    let k = (raw - raw.abs() * 1e-12).ceil();
    (k.max(1.0) as usize).min(n)
}

/// `inf { x : F(x) >= p }` for the empirical CDF `F` of `values`, i.e. the
/// `ceil(p * N)`-th smallest value. Ties are kept.
pub fn lower_quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!("quantile level {p} outside (0, 1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("NaN in quantile input".into()));
    }
    let k = quantile_rank(p, values.len());
    let mut buf = values.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// `Q_{1-alpha}(scores ∪ {+inf})`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut with_sentinel = Vec::with_capacity(scores.len() + 1);
    with_sentinel.extend_from_slice(scores);
    with_sentinel.push(f64::INFINITY);
    lower_quantile(&with_sentinel, 1.0 - alpha)
}
