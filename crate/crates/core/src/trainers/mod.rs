//! Model fitting: regularized loss minimization, SGD with random
//! reshuffling, and bagging. Each procedure is also exposed behind the
//! [`Trainer`] trait so conformal methods can refit it by name.

mod bagging;
mod permutation;
mod rlm;
mod sgd;
mod tree;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use bagging::{fit_bagging, BaggingConfig, BaggingModel, BaseLearner};
pub use permutation::PermutationStream;
pub use rlm::{fit_rlm, minimize_huber_ridge, rlm_objective, RlmConfig, RlmSolver};
pub use sgd::{check_learning_rate, fit_sgd, fit_sgd_coupled_loo, fit_sgd_mlp, sgd_linear, SgdConfig};
pub use tree::RegressionTree;

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::Result;
use crate::models::{min_eigenvalue, Huber, KernelMap, KernelModel, LinearModel, MlpModel, Predictor};

/// Number of model fits performed. Clones share the same count.
#[derive(Debug, Clone, Default)]
pub struct FitCounter(Arc<AtomicU64>);

impl FitCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn increment(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// A model-fitting procedure. Every call to [`Trainer::fit`] counts as one
/// model fit.
pub trait Trainer: Send + Sync {
    fn name(&self) -> &str;

    fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor>>;

    fn counter(&self) -> &FitCounter;

    fn fit_count(&self) -> u64 {
        self.counter().count()
    }
}

pub struct RlmTrainer {
    pub cfg: RlmConfig,
    pub huber: Huber,
    counter: FitCounter,
}

impl RlmTrainer {
    pub fn new(cfg: RlmConfig, epsilon: f64) -> Result<Self> {
        Ok(Self { cfg, huber: Huber::new(epsilon)?, counter: FitCounter::new() })
    }
}

impl Trainer for RlmTrainer {
    fn name(&self) -> &str {
        "rlm"
    }

    fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor>> {
        self.counter.increment();
        Ok(Box::new(fit_rlm(data, &self.cfg, self.huber.epsilon)?))
    }

    fn counter(&self) -> &FitCounter {
        &self.counter
    }
}

pub struct SgdTrainer {
    pub cfg: SgdConfig,
    pub huber: Huber,
    counter: FitCounter,
}

impl SgdTrainer {
    pub fn new(cfg: SgdConfig, epsilon: f64) -> Result<Self> {
        Ok(Self { cfg, huber: Huber::new(epsilon)?, counter: FitCounter::new() })
    }
}

impl Trainer for SgdTrainer {
    fn name(&self) -> &str {
        "sgd"
    }

    fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor>> {
        self.counter.increment();
        Ok(Box::new(fit_sgd(data, &self.cfg, self.huber.epsilon)?))
    }

    fn counter(&self) -> &FitCounter {
        &self.counter
    }
}

/// SGD on a sigmoid network; `init_seed` fixes the starting weights so that
/// every refit starts from the same point.
pub struct MlpTrainer {
    pub hidden: Vec<usize>,
    pub cfg: SgdConfig,
    pub huber: Huber,
    pub init_seed: u64,
    counter: FitCounter,
}

impl MlpTrainer {
    pub fn new(hidden: Vec<usize>, cfg: SgdConfig, epsilon: f64, init_seed: u64) -> Result<Self> {
        Ok(Self { hidden, cfg, huber: Huber::new(epsilon)?, init_seed, counter: FitCounter::new() })
    }
}

impl Trainer for MlpTrainer {
    fn name(&self) -> &str {
        "mlp"
    }

    fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor>> {
        self.counter.increment();
        let model: MlpModel = fit_sgd_mlp(data, &self.hidden, &self.cfg, self.huber.epsilon, self.init_seed)?;
        Ok(Box::new(model))
    }

    fn counter(&self) -> &FitCounter {
        &self.counter
    }
}

pub struct BaggingTrainer {
    pub cfg: BaggingConfig,
    counter: FitCounter,
}

impl BaggingTrainer {
    pub fn new(cfg: BaggingConfig) -> Self {
        Self { cfg, counter: FitCounter::new() }
    }
}

impl Trainer for BaggingTrainer {
    fn name(&self) -> &str {
        "bagging"
    }

    fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor>> {
        self.counter.increment();
        Ok(Box::new(fit_bagging(data, &self.cfg)?))
    }

    fn counter(&self) -> &FitCounter {
        &self.counter
    }
}

/// Kernel RLM: Huber loss on kernel rows against a fixed basis with the
/// penalty `omega theta^T K theta`.
pub struct KernelRlmTrainer {
    pub map: KernelMap,
    pub cfg: RlmConfig,
    pub huber: Huber,
    gram: DMatrix<f64>,
    counter: FitCounter,
}

impl KernelRlmTrainer {
    pub fn new(map: KernelMap, cfg: RlmConfig, epsilon: f64) -> Result<Self> {
        let gram = map.gram();
        let lambda_min = min_eigenvalue(&gram);
        if lambda_min <= 1e-10 {
            return Err(crate::error::Error::StrongConvexityRequired(lambda_min));
        }
        Ok(Self { map, cfg, huber: Huber::new(epsilon)?, gram, counter: FitCounter::new() })
    }
}

impl Trainer for KernelRlmTrainer {
    fn name(&self) -> &str {
        "kernel-rlm"
    }

    fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor>> {
        self.counter.increment();
        let features = self.map.transform(&data.x)?;
        let theta = minimize_huber_ridge(&features, data.responses()?, &self.huber, &self.cfg, Some(&self.gram))?;
        Ok(Box::new(KernelModel { map: self.map.clone(), theta }))
    }

    fn counter(&self) -> &FitCounter {
        &self.counter
    }
}

/// SGD on kernel rows against a fixed basis.
pub struct KernelSgdTrainer {
    pub map: KernelMap,
    pub cfg: SgdConfig,
    pub huber: Huber,
    counter: FitCounter,
}

impl KernelSgdTrainer {
    pub fn new(map: KernelMap, cfg: SgdConfig, epsilon: f64) -> Result<Self> {
        Ok(Self { map, cfg, huber: Huber::new(epsilon)?, counter: FitCounter::new() })
    }
}

impl Trainer for KernelSgdTrainer {
    fn name(&self) -> &str {
        "kernel-sgd"
    }

    fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor>> {
        self.counter.increment();
        let features = self.map.transform(&data.x)?;
        let LinearModel { theta } = sgd_linear(&features, data.responses()?, &self.cfg, &self.huber)?;
        Ok(Box::new(KernelModel { map: self.map.clone(), theta }))
    }

    fn counter(&self) -> &FitCounter {
        &self.counter
    }
}
