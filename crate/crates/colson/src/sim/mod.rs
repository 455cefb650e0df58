//! World state, stepping, reward, scenarios, and static obstacles.

mod obstacle;
mod reward;
mod scenario;
mod state;
mod world;

pub use obstacle::{ObstacleMap, ObstacleQuery};
pub use reward::{reward, COLLISION_PENALTY, DISCOMFORT_DIST, GOAL_REWARD};
pub use scenario::{
    make_circle_crossing, make_wall_scenario, ScenarioKind, ScenarioSpec,
    WALL_CORRIDOR_HALF_WIDTH, WALL_CORRIDOR_LENGTH,
};
pub use state::{Action, Observation, OutcomeKind, PedestrianState, RobotState, SimConfig};
pub use world::{CrowdModel, SimError, StepResult, WorldState};
