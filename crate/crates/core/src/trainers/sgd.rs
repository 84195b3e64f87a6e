use nalgebra::{DMatrix, DVector};

use super::PermutationStream;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{Huber, LinearModel, MlpModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Starting parameter; zero when `None`.
    pub theta0: Option<DVector<f64>>,
    pub permutation_seed: u64,
}

impl SgdConfig {
    pub fn new(epochs: usize, learning_rate: f64, permutation_seed: u64) -> Self {
        Self { epochs, learning_rate, theta0: None, permutation_seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("learning rate must be non-negative, got {}", self.learning_rate)));
        }
        Ok(())
    }

    pub fn stream(&self) -> PermutationStream {
        PermutationStream::new(self.permutation_seed)
    }
}

/// The convex SGD stability bound needs `eta <= 2 / max phi_i`.
pub fn check_learning_rate(eta: f64, max_phi: f64) -> Result<()> {
    let limit = if max_phi > 0.0 { 2.0 / max_phi } else { f64::INFINITY };
    if eta > limit {
        return Err(Error::LearningRateTooLarge { eta, max_phi, limit });
    }
    Ok(())
}

/// Per-point SGD with random reshuffling on the Huber loss of `x^T theta`.
pub fn sgd_linear(features: &DMatrix<f64>, y: &DVector<f64>, cfg: &SgdConfig, huber: &Huber) -> Result<LinearModel> {
    cfg.validate()?;
    let (n, d) = features.shape();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let mut theta = match &cfg.theta0 {
        Some(t) if t.len() != d => return Err(Error::DimensionMismatch { expected: d, got: t.len() }),
        Some(t) => t.clone(),
        None => DVector::zeros(d),
    };
    // column i of the transpose is row i, contiguous
    let rows = features.transpose();
    let max_phi = rows.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
    if let Err(e) = check_learning_rate(cfg.learning_rate, max_phi) {
        log::warn!("{e}; the convex SGD stability bound does not apply");
    }
    let stream = cfg.stream();
    for epoch in 0..cfg.epochs {
        for i in stream.permutation(epoch as u64, n) {
            let xi = rows.column(i);
            let step = cfg.learning_rate * huber.psi(y[i], xi.dot(&theta));
            theta.axpy(step, &xi, 1.0);
        }
    }
    Ok(LinearModel::new(theta))
}

pub fn fit_sgd(data: &Dataset, cfg: &SgdConfig, epsilon: f64) -> Result<LinearModel> {
    sgd_linear(&data.x, data.responses()?, cfg, &Huber::new(epsilon)?)
}

/// Fits on `D` plus `(x, y)` and on `D` alone with coupled permutations: the
/// second run visits the points of `D` in the order induced by the first.
pub fn fit_sgd_coupled_loo(
    data: &Dataset,
    x: &DVector<f64>,
    y: f64,
    cfg: &SgdConfig,
    epsilon: f64,
) -> Result<(LinearModel, LinearModel)> {
    let with = fit_sgd(&data.augmented(x, y)?, cfg, epsilon)?;
    let without = fit_sgd(data, cfg, epsilon)?;
    Ok((with, without))
}

/// SGD with random reshuffling on a sigmoid network initialised from `init_seed`.
pub fn fit_sgd_mlp(data: &Dataset, hidden: &[usize], cfg: &SgdConfig, epsilon: f64, init_seed: u64) -> Result<MlpModel> {
    cfg.validate()?;
    let huber = Huber::new(epsilon)?;
    let y = data.responses()?;
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if hidden.contains(&0) {
        return Err(Error::InvalidConfig("hidden layer widths must be positive".into()));
    }
    let mut model = MlpModel::init(data.d(), hidden, init_seed);
    let rows = data.x.transpose();
    let stream = cfg.stream();
    for epoch in 0..cfg.epochs {
        for i in stream.permutation(epoch as u64, n) {
            let g = model.gradient(rows.column(i).as_slice(), y[i], &huber)?;
            model.descend(&g, cfg.learning_rate);
        }
    }
    Ok(model)
}
