//! Benchmark harness for stable conformal prediction: synthetic and CSV
//! interval benchmarks and conformal screening, with seeded repetitions and
//! CSV output.

pub mod config;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod reference;

pub use config::{parse_args, ExperimentConfig};
pub use error::{CliError, Result};
