use nalgebra::DVector;

use super::{dot, Predictor};
use crate::error::{Error, Result};

/// `f_theta(x) = x^T theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub theta: DVector<f64>,
}

impl LinearModel {
    pub fn new(theta: DVector<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(d: usize) -> Self {
        Self { theta: DVector::zeros(d) }
    }
}

impl Predictor for LinearModel {
    fn predict(&self, x: &[f64]) -> f64 {
        dot(x, self.theta.as_slice())
    }
}

pub fn predict_linear(model: &LinearModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.theta.len() {
        return Err(Error::DimensionMismatch { expected: model.theta.len(), got: x.len() });
    }
    Ok(model.predict(x))
}

/// Huber loss with knee `epsilon`, as a function of the residual `y - z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Huber {
    pub epsilon: f64,
}

impl Huber {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("Huber epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn loss(&self, y: f64, z: f64) -> f64 {
        let r = (y - z).abs();
        if r <= self.epsilon {
            0.5 * r * r
        } else {
            self.epsilon * r - 0.5 * self.epsilon * self.epsilon
        }
    }

    /// Clipped residual `clamp(y - z, -eps, eps)`; the derivative in `z` is its negative.
    pub fn psi(&self, y: f64, z: f64) -> f64 {
        (y - z).clamp(-self.epsilon, self.epsilon)
    }

    pub fn dz(&self, y: f64, z: f64) -> f64 {
        -self.psi(y, z)
    }
}

pub fn huber_loss(epsilon: f64, y: f64, z: f64) -> f64 {
    Huber { epsilon }.loss(y, z)
}

pub fn huber_dz(epsilon: f64, y: f64, z: f64) -> f64 {
    Huber { epsilon }.dz(y, z)
}
