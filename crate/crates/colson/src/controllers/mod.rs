//! Pedestrian controllers: reciprocal collision avoidance and social forces.

mod orca;
mod social_force;

pub use orca::{
    orca_halfplanes, orca_robot_velocity, orca_velocity, goal_seek_velocity, HalfPlane, OrcaAgent,
    OrcaCrowd, OrcaParams,
};
pub use social_force::{sf_acceleration, SocialForceCrowd, SocialForceParams};

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::sim::{CrowdModel, WorldState};

/// Which controller drives the pedestrians of a world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrowdController {
    Orca(OrcaParams),
    SocialForce(SocialForceParams),
}

impl Default for CrowdController {
    fn default() -> Self {
        CrowdController::Orca(OrcaParams::default())
    }
}

impl CrowdModel for CrowdController {
    fn velocity(&self, world: &WorldState, ped_index: usize) -> Vec2 {
        match self {
            CrowdController::Orca(p) => OrcaCrowd { params: *p }.velocity(world, ped_index),
            CrowdController::SocialForce(p) => {
                SocialForceCrowd { params: *p }.velocity(world, ped_index)
            }
        }
    }
}
