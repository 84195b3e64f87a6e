//! Stable conformal prediction: leave-one-out and replace-one conformal
//! intervals built from algorithmic stability bounds, together with the
//! full, split, oracle and multi-split baselines and conformal selection.

pub mod conformal;
pub mod data;
pub mod error;
pub mod models;
pub mod registry;
pub mod scores;
pub mod screening;
pub mod seeds;
pub mod stability;
pub mod trainers;

pub use conformal::{CpConfig, GridSpec, GuessRule, PredictionInterval, PredictionSet};
pub use data::{Dataset, MeanModel, SyntheticSpec};
pub use error::{Error, Result};
pub use registry::{Registry, TrainerSpec};
pub use scores::ScoreKind;
