//! Off-policy training of the diffusion policy: replay storage, critic and
//! score updates, and the episode loop that ties them together.

mod buffer;
mod learner;
mod trainer;

pub use buffer::{ReplayBuffer, Transition};
pub use learner::Learner;
pub use trainer::{
    rollout, train, warm_start, RolloutSummary, TrainConfig, TrainError, TrainReport, TrainSetup,
};
