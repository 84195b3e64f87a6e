//! Name-keyed registries of conformal methods and trainers. A trainer entry
//! builds the trainer together with the stability provider that matches it.

use std::collections::BTreeMap;

use crate::conformal::{ConformalMethod, FullCp, LooStabCp, MmSplitCp, OracleCp, RoStabCp, SplitCp};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{KernelMap, KernelSpec};
use crate::stability::{
    ApproxNnStability, BaggingBound, BaggingStability, KernelRlmStability, RlmStability, SgdStability, StabilityProvider,
};
use crate::trainers::{
    BaggingConfig, BaggingTrainer, BaseLearner, KernelRlmTrainer, KernelSgdTrainer, MlpTrainer, RlmConfig, RlmSolver, RlmTrainer,
    SgdConfig, SgdTrainer, Trainer,
};

/// Hyperparameters shared by all registered trainers; each trainer reads
/// the fields it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerSpec {
    pub epsilon: f64,
    pub omega: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub permutation_seed: u64,
    /// `None` picks per trainer: gradient descent for `rlm`, Newton for
    /// `kernel-rlm`, whose Gram penalty is too ill-conditioned for plain steps.
    pub rlm_solver: Option<RlmSolver>,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub kernel: KernelSpec,
    pub hidden: Vec<usize>,
    pub init_seed: u64,
    pub bags: usize,
    pub bag_size: Option<usize>,
    pub base: BaseLearner,
    pub bagging_seed: u64,
    pub bagging_bound: BaggingBound,
}

impl Default for TrainerSpec {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            omega: 1.0,
            epochs: 15,
            learning_rate: 0.001,
            permutation_seed: 0,
            rlm_solver: None,
            max_iters: 100_000,
            grad_tol: 1e-8,
            kernel: KernelSpec::rbf(1.0),
            hidden: vec![20],
            init_seed: 0,
            bags: 100,
            bag_size: None,
            base: BaseLearner::Tree { max_depth: 3 },
            bagging_seed: 0,
            bagging_bound: BaggingBound::Derandomized,
        }
    }
}

impl TrainerSpec {
    pub fn rlm_config(&self, default_solver: RlmSolver) -> RlmConfig {
        RlmConfig {
            omega_weight: self.omega,
            solver: self.rlm_solver.unwrap_or(default_solver),
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
        }
    }

    pub fn sgd_config(&self) -> SgdConfig {
        SgdConfig::new(self.epochs, self.learning_rate, self.permutation_seed)
    }

    pub fn bagging_config(&self) -> BaggingConfig {
        BaggingConfig { bags: self.bags, bag_size: self.bag_size, base: self.base, seed: self.bagging_seed }
    }
}

pub struct Fitted {
    pub trainer: Box<dyn Trainer>,
    pub stability: Box<dyn StabilityProvider>,
}

/// Builds a trainer for a training set; kernel trainers use its features as basis.
pub type TrainerFactory = fn(&TrainerSpec, &Dataset) -> Result<Fitted>;
pub type MethodFactory = fn() -> Box<dyn ConformalMethod>;

pub struct Registry {
    methods: BTreeMap<&'static str, MethodFactory>,
    trainers: BTreeMap<&'static str, TrainerFactory>,
}

fn unknown(kind: &str, name: &str, available: Vec<&str>) -> Error {
    Error::InvalidConfig(format!("unknown {kind} '{name}' (available: {})", available.join(", ")))
}

impl Registry {
    pub fn empty() -> Self {
        Self { methods: BTreeMap::new(), trainers: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register_method("oracle", || Box::new(OracleCp));
        r.register_method("full", || Box::new(FullCp));
        r.register_method("split", || Box::new(SplitCp));
        r.register_method("ro-stab", || Box::new(RoStabCp));
        r.register_method("loo-stab", || Box::new(LooStabCp));
        r.register_method("mm-split", || Box::new(MmSplitCp));

        r.register_trainer("rlm", |s, _| {
            Ok(Fitted {
                trainer: Box::new(RlmTrainer::new(
                    s.rlm_config(RlmSolver::GradientDescent { learning_rate: None }),
                    s.epsilon,
                )?),
                stability: Box::new(RlmStability { epsilon: s.epsilon, omega_weight: s.omega }),
            })
        });
        r.register_trainer("sgd", |s, _| {
            Ok(Fitted {
                trainer: Box::new(SgdTrainer::new(s.sgd_config(), s.epsilon)?),
                stability: Box::new(SgdStability {
                    epsilon: s.epsilon,
                    epochs: s.epochs,
                    learning_rate: s.learning_rate,
                    map: None,
                }),
            })
        });
        r.register_trainer("mlp", |s, _| {
            Ok(Fitted {
                trainer: Box::new(MlpTrainer::new(s.hidden.clone(), s.sgd_config(), s.epsilon, s.init_seed)?),
                stability: Box::new(ApproxNnStability { epochs: s.epochs, learning_rate: s.learning_rate }),
            })
        });
        r.register_trainer("bagging", |s, _| {
            Ok(Fitted {
                trainer: Box::new(BaggingTrainer::new(s.bagging_config())),
                stability: Box::new(BaggingStability { bound: s.bagging_bound, bag_size: s.bag_size }),
            })
        });
        r.register_trainer("kernel-rlm", |s, d| {
            let map = KernelMap::new(s.kernel, d.x.clone())?;
            Ok(Fitted {
                trainer: Box::new(KernelRlmTrainer::new(map.clone(), s.rlm_config(RlmSolver::Newton), s.epsilon)?),
                stability: Box::new(KernelRlmStability { map, epsilon: s.epsilon, omega_weight: s.omega }),
            })
        });
        r.register_trainer("kernel-sgd", |s, d| {
            let map = KernelMap::new(s.kernel, d.x.clone())?;
            Ok(Fitted {
                trainer: Box::new(KernelSgdTrainer::new(map.clone(), s.sgd_config(), s.epsilon)?),
                stability: Box::new(SgdStability {
                    epsilon: s.epsilon,
                    epochs: s.epochs,
                    learning_rate: s.learning_rate,
                    map: Some(map),
                }),
            })
        });
        r
    }

    pub fn register_method(&mut self, name: &'static str, f: MethodFactory) {
        self.methods.insert(name, f);
    }

    pub fn register_trainer(&mut self, name: &'static str, f: TrainerFactory) {
        self.trainers.insert(name, f);
    }

    pub fn method_names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }

    pub fn trainer_names(&self) -> Vec<&'static str> {
        self.trainers.keys().copied().collect()
    }

    pub fn method(&self, name: &str) -> Result<Box<dyn ConformalMethod>> {
        self.methods.get(name).map(|f| f()).ok_or_else(|| unknown("method", name, self.method_names()))
    }

    pub fn has_trainer(&self, name: &str) -> bool {
        self.trainers.contains_key(name)
    }

    pub fn trainer(&self, name: &str, spec: &TrainerSpec, train: &Dataset) -> Result<Fitted> {
        let f = self.trainers.get(name).ok_or_else(|| unknown("trainer", name, self.trainer_names()))?;
        f(spec, train)
    }
}
