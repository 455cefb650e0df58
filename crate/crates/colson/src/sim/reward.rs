//! Step reward as a function of pedestrian clearance and goal arrival.

pub const COLLISION_PENALTY: f64 = -0.25;
pub const DISCOMFORT_DIST: f64 = 0.2;
pub const GOAL_REWARD: f64 = 1.0;

/// Branch order matters and is part of the contract: collision, then the
/// discomfort band, then goal, then zero. A robot that reaches the goal while
/// inside the discomfort band earns the discomfort penalty, not the bonus.
///
/// `min_separation` is the smallest surface-to-surface distance to any
/// pedestrian this step (+inf when there are none); negative means overlap.
pub fn reward(min_separation: f64, at_goal: bool) -> f64 {
    if min_separation < 0.0 {
        COLLISION_PENALTY
    } else if min_separation < DISCOMFORT_DIST {
        -0.1 + min_separation / 2.0
    } else if at_goal {
        GOAL_REWARD
    } else {
        0.0
    }
}
