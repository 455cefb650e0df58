//! Evaluation harness: policies, per-trajectory metrics, fixed-seed batch
//! runs, and report aggregation.

mod harness;
mod metrics;
mod policy;
mod report;

pub use harness::{
    compare_guidance, evaluate, evaluate_logged, sweep_pedestrians, EvalContext, EvalError,
    TrajectoryLog,
};
pub use metrics::{discounted_return, smoothness};
pub use policy::{
    DiffusionPolicy, GuidanceMode, ModedPolicy, OrcaPolicy, Policy, RandomPolicy, StraightToGoal,
};
pub use report::{render_table, EpisodeStats, EvalReport};
