//! Cost-frugal hyperparameter search: a randomized direct-search optimizer
//! with a self-adjusting stepsize, the baselines it is compared against, and
//! the harness used to benchmark it and check its guarantees.

pub mod baselines;
pub mod cfo;
pub mod error;
pub mod flow2;
pub mod harness;
pub mod objectives;
pub mod optimizer;
pub mod sampler;
pub mod space;

pub use baselines::{RandomSearch, Zogd};
pub use cfo::{Cfo, StepSchedule, StepsizeEvent};
pub use error::{Error, Result};
pub use flow2::{Flow2Kernel, Flow2Search};
pub use objectives::SyntheticObjective;
pub use optimizer::{EvalKind, Optimizer, Suggestion};
pub use space::{DimensionKind, DimensionSpec, NormPoint, RawConfig, Scale, SearchSpace};
