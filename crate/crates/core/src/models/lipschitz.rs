use nalgebra::DMatrix;

use super::{min_eigenvalue, KernelMap};
use crate::error::{Error, Result};

/// Per-point constants feeding the stability bounds. The vectors hold the
/// `n` training points first, then the `m` test points.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzProfile {
    /// Loss-in-parameter Lipschitz constants.
    pub rho: Vec<f64>,
    /// Prediction-in-parameter Lipschitz constants.
    pub nu: Vec<f64>,
    /// Gradient Lipschitz constants.
    pub phi: Vec<f64>,
    /// Lipschitz constant of the score in its prediction argument.
    pub gamma: f64,
    /// Strong convexity of the penalty.
    pub lambda_sc: f64,
    pub n_train: usize,
}

impl LipschitzProfile {
    pub fn n_test(&self) -> usize {
        self.rho.len() - self.n_train
    }

    /// Mean of `rho` over the training points.
    pub fn rho_bar(&self) -> f64 {
        self.rho[..self.n_train].iter().sum::<f64>() / self.n_train as f64
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }
}

pub fn row_norms(x: &DMatrix<f64>) -> Vec<f64> {
    x.row_iter().map(|r| r.norm()).collect()
}

fn huber_profile(norms: Vec<f64>, n_train: usize, epsilon: f64, lambda_sc: f64) -> LipschitzProfile {
    LipschitzProfile {
        rho: norms.iter().map(|v| epsilon * v).collect(),
        phi: norms.iter().map(|v| v * v).collect(),
        nu: norms,
        gamma: 1.0,
        lambda_sc,
        n_train,
    }
}

/// Huber loss on `x^T theta`: `rho_i = eps ||x_i||`, `nu_i = ||x_i||`,
/// `phi_i = ||x_i||^2`, and `lambda = 2 omega` for `omega ||theta||^2`.
pub fn lipschitz_profile_linear_huber(
    features: &DMatrix<f64>,
    test_features: &DMatrix<f64>,
    epsilon: f64,
    omega_weight: f64,
) -> Result<LipschitzProfile> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("Huber epsilon must be positive, got {epsilon}")));
    }
    if test_features.nrows() > 0 && test_features.ncols() != features.ncols() {
        return Err(Error::DimensionMismatch { expected: features.ncols(), got: test_features.ncols() });
    }
    let mut norms = row_norms(features);
    norms.extend(row_norms(test_features));
    Ok(huber_profile(norms, features.nrows(), epsilon, 2.0 * omega_weight))
}

/// Same constants on kernel rows `k_i = k(x_i, basis)`; the penalty
/// `omega theta^T K theta` is `2 omega lambda_min(K)`-strongly convex.
pub fn lipschitz_profile_kernel_huber(
    map: &KernelMap,
    features: &DMatrix<f64>,
    test_features: &DMatrix<f64>,
    epsilon: f64,
    omega_weight: f64,
) -> Result<LipschitzProfile> {
    let lambda_min = min_eigenvalue(&map.gram());
    if lambda_min <= 1e-10 {
        return Err(Error::StrongConvexityRequired(lambda_min));
    }
    let kf = map.transform(features)?;
    let kt = if test_features.nrows() > 0 { map.transform(test_features)? } else { DMatrix::zeros(0, kf.ncols()) };
    let mut p = lipschitz_profile_linear_huber(&kf, &kt, epsilon, omega_weight)?;
    p.lambda_sc = 2.0 * omega_weight * lambda_min;
    Ok(p)
}
