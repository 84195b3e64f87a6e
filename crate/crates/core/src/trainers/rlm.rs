use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{Huber, LinearModel};

/// Optimizer for the strongly convex Huber RLM objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RlmSolver {
    /// Semismooth Newton with Armijo backtracking. The objective is piecewise
    /// quadratic, so this converges in a handful of steps even when the
    /// penalty is badly conditioned (kernel Gram matrices).
    Newton,
    /// Full-batch gradient descent from zero; `None` steps by `1/L` for the
    /// objective's smoothness constant `L`.
    GradientDescent { learning_rate: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlmConfig {
    /// `omega` in the penalty `omega ||theta||^2`.
    pub omega_weight: f64,
    pub solver: RlmSolver,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for RlmConfig {
    fn default() -> Self {
        Self { omega_weight: 1.0, solver: RlmSolver::GradientDescent { learning_rate: None }, max_iters: 100_000, grad_tol: 1e-8 }
    }
}

impl RlmConfig {
    pub fn with_omega(omega_weight: f64) -> Self {
        Self { omega_weight, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_weight > 0.0) {
            return Err(Error::InvalidConfig(format!("omega must be positive, got {}", self.omega_weight)));
        }
        if let RlmSolver::GradientDescent { learning_rate: Some(eta) } = self.solver {
            if !(eta > 0.0) {
                return Err(Error::InvalidConfig(format!("learning rate must be positive, got {eta}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

/// `(1/n) sum_i huber(y_i, x_i^T theta) + omega theta^T P theta`, with `P = I`
/// when `penalty` is `None`.
pub fn rlm_objective(
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    huber: &Huber,
    omega: f64,
    penalty: Option<&DMatrix<f64>>,
    theta: &DVector<f64>,
) -> f64 {
    let z = features * theta;
    let data_term = y.iter().zip(z.iter()).map(|(&yi, &zi)| huber.loss(yi, zi)).sum::<f64>() / y.len() as f64;
    let reg = match penalty {
        Some(p) => theta.dot(&(p * theta)),
        None => theta.norm_squared(),
    };
    data_term + omega * reg
}

fn gradient(
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    huber: &Huber,
    omega: f64,
    penalty: Option<&DMatrix<f64>>,
    theta: &DVector<f64>,
) -> DVector<f64> {
    let z = features * theta;
    let dz = DVector::from_iterator(y.len(), y.iter().zip(z.iter()).map(|(&yi, &zi)| huber.dz(yi, zi)));
    let mut g = features.tr_mul(&dz) / y.len() as f64;
    match penalty {
        Some(p) => g.gemv(2.0 * omega, p, theta, 1.0),
        None => g.axpy(2.0 * omega, theta, 1.0),
    }
    g
}

fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().max()
}

/// Minimizes the Huber RLM objective from zero with the configured solver,
/// stopping once the gradient norm is at most `grad_tol`.
pub fn minimize_huber_ridge(
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    huber: &Huber,
    cfg: &RlmConfig,
    penalty: Option<&DMatrix<f64>>,
) -> Result<DVector<f64>> {
    cfg.validate()?;
    let (n, d) = features.shape();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if let Some(p) = penalty {
        if p.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, got: p.nrows() });
        }
    }
    let problem = Problem { features, y, huber, omega: cfg.omega_weight, penalty };
    match cfg.solver {
        RlmSolver::Newton => newton(&problem, cfg),
        RlmSolver::GradientDescent { learning_rate } => gradient_descent(&problem, cfg, learning_rate),
    }
}

struct Problem<'a> {
    features: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    huber: &'a Huber,
    omega: f64,
    penalty: Option<&'a DMatrix<f64>>,
}

impl Problem<'_> {
    fn objective(&self, theta: &DVector<f64>) -> f64 {
        rlm_objective(self.features, self.y, self.huber, self.omega, self.penalty, theta)
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        gradient(self.features, self.y, self.huber, self.omega, self.penalty, theta)
    }

    /// Generalized Hessian: quadratic-zone rows of `X^T X / n` plus `2 omega P`.
    fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let (n, d) = self.features.shape();
        let z = self.features * theta;
        let mut h = match self.penalty {
            Some(p) => p * (2.0 * self.omega),
            None => DMatrix::identity(d, d) * (2.0 * self.omega),
        };
        let quadratic: Vec<usize> =
            (0..n).filter(|&i| (self.y[i] - z[i]).abs() <= self.huber.epsilon).collect();
        if !quadratic.is_empty() {
            let xa = self.features.select_rows(&quadratic);
            h.gemm(1.0 / n as f64, &xa.transpose(), &xa, 1.0);
        }
        h
    }
}

fn newton(problem: &Problem<'_>, cfg: &RlmConfig) -> Result<DVector<f64>> {
    let d = problem.features.ncols();
    let mut theta = DVector::zeros(d);
    let mut f = problem.objective(&theta);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let g = problem.gradient(&theta);
        grad_norm = g.norm();
        if grad_norm <= cfg.grad_tol {
            return Ok(theta);
        }
        if !grad_norm.is_finite() {
            break;
        }
        let step = match problem.hessian(&theta).cholesky() {
            Some(chol) => -chol.solve(&g),
            None => -g.clone(),
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut next = &theta + &step;
        let mut f_next = problem.objective(&next);
        // near the optimum the decrease drowns in rounding; accept a full
        // step that does not increase the objective beyond that level
        let noise = 4.0 * f64::EPSILON * f.abs().max(1.0);
        if f_next > f + noise {
            while f_next > f + 1e-4 * t * slope && t > 1e-12 {
                t *= 0.5;
                next = &theta + &step * t;
                f_next = problem.objective(&next);
            }
        }
        theta = next;
        f = f_next;
    }
    Err(Error::NonConvergence { iters: cfg.max_iters, grad_norm })
}

fn gradient_descent(problem: &Problem<'_>, cfg: &RlmConfig, learning_rate: Option<f64>) -> Result<DVector<f64>> {
    let (n, d) = problem.features.shape();
    let step = match learning_rate {
        Some(eta) => eta,
        None => {
            let data_smooth = max_eigenvalue(&(problem.features.tr_mul(problem.features) / n as f64));
            let pen_smooth = problem.penalty.map_or(1.0, max_eigenvalue);
            1.0 / (data_smooth + 2.0 * problem.omega * pen_smooth)
        }
    };
    let mut theta = DVector::zeros(d);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let g = problem.gradient(&theta);
        grad_norm = g.norm();
        if grad_norm <= cfg.grad_tol {
            return Ok(theta);
        }
        if !grad_norm.is_finite() {
            break;
        }
        theta.axpy(-step, &g, 1.0);
    }
    Err(Error::NonConvergence { iters: cfg.max_iters, grad_norm })
}

/// Linear Huber RLM with penalty `omega ||theta||^2`.
pub fn fit_rlm(data: &Dataset, cfg: &RlmConfig, epsilon: f64) -> Result<LinearModel> {
    let huber = Huber::new(epsilon)?;
    let theta = minimize_huber_ridge(&data.x, data.responses()?, &huber, cfg, None)?;
    Ok(LinearModel::new(theta))
}
