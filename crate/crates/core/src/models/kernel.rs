use nalgebra::{DMatrix, DVector};

use super::{dot, Predictor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Rbf,
    Polynomial,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// RBF bandwidth.
    pub sigma: f64,
    /// Polynomial offset.
    pub c: f64,
    /// Polynomial degree.
    pub degree: u32,
}

impl KernelSpec {
    pub fn rbf(sigma: f64) -> Self {
        Self { kind: KernelKind::Rbf, sigma, c: 0.0, degree: 1 }
    }

    pub fn polynomial(c: f64, degree: u32) -> Self {
        Self { kind: KernelKind::Polynomial, sigma: 1.0, c, degree }
    }

    pub fn linear() -> Self {
        Self { kind: KernelKind::Linear, sigma: 1.0, c: 0.0, degree: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            KernelKind::Rbf if !(self.sigma > 0.0) => {
                Err(Error::InvalidConfig(format!("RBF bandwidth must be positive, got {}", self.sigma)))
            }
            KernelKind::Polynomial if self.degree < 1 => {
                Err(Error::InvalidConfig("polynomial degree must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * self.sigma * self.sigma)).exp()
            }
            KernelKind::Polynomial => (dot(a, b) + self.c).powi(self.degree as i32),
            KernelKind::Linear => dot(a, b),
        }
    }
}

/// `K_ij = k(A_i, B_j)`.
pub fn kernel_matrix(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: b.ncols() });
    }
    let (at, bt) = (a.transpose(), b.transpose());
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| spec.eval(at.column(i).as_slice(), bt.column(j).as_slice())))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(k: &DMatrix<f64>) -> f64 {
    k.clone().symmetric_eigenvalues().min()
}

/// Maps a point to its row of kernel evaluations against a fixed basis
/// (the training features), turning kernel regression into a linear model
/// with penalty `theta^T K theta`.
#[derive(Debug, Clone)]
pub struct KernelMap {
    pub spec: KernelSpec,
    basis: DMatrix<f64>,
    basis_t: DMatrix<f64>,
}

impl KernelMap {
    pub fn new(spec: KernelSpec, basis: DMatrix<f64>) -> Result<Self> {
        spec.validate()?;
        let basis_t = basis.transpose();
        Ok(Self { spec, basis, basis_t })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn input_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        kernel_matrix(&self.spec, &self.basis, &self.basis).expect("basis is self-consistent")
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        self.basis_t.column_iter().map(|b| self.spec.eval(x, b.as_slice())).collect()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        kernel_matrix(&self.spec, x, &self.basis)
    }
}

/// Kernel expansion `x -> k(x, basis)^T theta`.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub map: KernelMap,
    pub theta: DVector<f64>,
}

impl Predictor for KernelModel {
    fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.map.features(x), self.theta.as_slice())
    }
}
