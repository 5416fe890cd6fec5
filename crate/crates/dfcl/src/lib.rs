//! Decision-focused continual learning over a stream of scheduling tasks:
//! the regret of forecast-driven decisions is differentiated end to end
//! through the surrogate and both optimization stages, and consolidation
//! against forgetting is a Fisher-anchored quadratic applied proximally.

pub mod error;
pub mod fisher;
pub mod optimizer;
pub mod par;
pub mod pipeline;
pub mod regret;
pub mod trainer;

pub use error::DfclError;
pub use fisher::{estimate_fisher, ewc_penalty, FisherEstimate, FisherMode, FisherState};
pub use optimizer::RmsOptimizer;
pub use pipeline::{build_pipeline_graph, SampleData, TaskContext};
pub use regret::{eval_pf_cost, eval_pipeline_cost, eval_regret, training_pf_cost, training_regret};
pub use trainer::{train_task, Hyper, ModelPair, TrainLog, TrainMode, TrainOutcome};
