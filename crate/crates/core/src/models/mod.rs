//! Prediction functions, the Huber loss and per-point Lipschitz constants.

mod kernel;
mod linear;
mod lipschitz;
mod mlp;

pub use kernel::{kernel_matrix, min_eigenvalue, KernelKind, KernelMap, KernelModel, KernelSpec};
pub use linear::{huber_dz, huber_loss, predict_linear, Huber, LinearModel};
pub use lipschitz::{lipschitz_profile_kernel_huber, lipschitz_profile_linear_huber, row_norms, LipschitzProfile};
pub use mlp::{Layer, MlpModel};

use nalgebra::DMatrix;

/// A fitted prediction function.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;

    /// Predictions for every row of `x`.
    fn predict_rows(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let xt = x.transpose();
        xt.column_iter().map(|c| self.predict(c.as_slice())).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
