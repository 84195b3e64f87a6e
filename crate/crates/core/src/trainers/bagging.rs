use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RegressionTree;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseLearner {
    Stump,
    Tree { max_depth: usize },
}

impl BaseLearner {
    pub fn max_depth(self) -> usize {
        match self {
            BaseLearner::Stump => 1,
            BaseLearner::Tree { max_depth } => max_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaggingConfig {
    pub bags: usize,
    /// Bootstrap size; `None` means the training size `n`.
    pub bag_size: Option<usize>,
    pub base: BaseLearner,
    pub seed: u64,
}

impl Default for BaggingConfig {
    fn default() -> Self {
        Self { bags: 100, bag_size: None, base: BaseLearner::Tree { max_depth: 3 }, seed: 0 }
    }
}

impl BaggingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bags == 0 {
            return Err(Error::InvalidConfig("bags must be at least 1".into()));
        }
        if self.bag_size == Some(0) {
            return Err(Error::InvalidConfig("bag size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn bag_size_for(&self, n: usize) -> usize {
        self.bag_size.unwrap_or(n)
    }

    /// Indices of bag `b`: `m` uniform draws with replacement from `[0, n)`.
    pub fn bag_indices(&self, b: usize, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(b as u64);
        (0..self.bag_size_for(n)).map(|_| rng.random_range(0..n as u64) as usize).collect()
    }
}

/// Average of trees fit on bootstrap bags.
#[derive(Debug, Clone, PartialEq)]
pub struct BaggingModel {
    pub members: Vec<RegressionTree>,
    /// `(min, max)` of the responses in each bag.
    pub bag_ranges: Vec<(f64, f64)>,
}

impl BaggingModel {
    pub fn member_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.members.iter().map(|t| t.predict(x)).collect()
    }
}

impl Predictor for BaggingModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.members.iter().map(|t| t.predict(x)).sum::<f64>() / self.members.len() as f64
    }
}

pub fn fit_bagging(data: &Dataset, cfg: &BaggingConfig) -> Result<BaggingModel> {
    cfg.validate()?;
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let y = data.responses()?.as_slice();
    let depth = cfg.base.max_depth();
    let (members, bag_ranges) = (0..cfg.bags)
        .map(|b| {
            let idx = cfg.bag_indices(b, n);
            let lo = idx.iter().map(|&i| y[i]).fold(f64::INFINITY, f64::min);
            let hi = idx.iter().map(|&i| y[i]).fold(f64::NEG_INFINITY, f64::max);
            (RegressionTree::fit(&data.x, y, &idx, depth), (lo, hi))
        })
        .unzip();
    Ok(BaggingModel { members, bag_ranges })
}
