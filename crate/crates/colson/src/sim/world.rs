//! Synchronous world stepping.
//!
//! All agents move on the same clock: pedestrian velocities are computed from
//! the pre-step state, then every agent integrates at once. Rewards and
//! terminal checks use post-step positions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::sim::obstacle::ObstacleMap;
use crate::sim::reward::{reward, COLLISION_PENALTY};
use crate::sim::state::{Action, Observation, OutcomeKind, PedestrianState, RobotState, SimConfig};
use crate::util::Fnv1a;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("action contains non-finite components")]
    NonFiniteAction,
    #[error("could not place pedestrian {pedestrian} without overlap after {attempts} attempts")]
    PlacementFailed { pedestrian: usize, attempts: u32 },
}

/// Velocity selector for one pedestrian given the full pre-step world.
pub trait CrowdModel {
    fn velocity(&self, world: &WorldState, ped_index: usize) -> Vec2;
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    /// `None` while the episode continues.
    pub outcome: Option<OutcomeKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: RobotState,
    pub pedestrians: Vec<PedestrianState>,
    pub obstacles: ObstacleMap,
    /// When false the robot is invisible: pedestrians plan as if it were not
    /// there. The robot always sees the pedestrians.
    pub visible: bool,
    pub time: f64,
    pub steps: u32,
    pub config: SimConfig,
}

impl WorldState {
    /// Smallest surface-to-surface distance from the robot to any pedestrian;
    /// +inf with no pedestrians. Negative means overlap.
    pub fn min_separation(&self) -> f64 {
        self.pedestrians
            .iter()
            .map(|p| (p.position - self.robot.position).norm() - p.radius - self.robot.radius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn observation(&self) -> Observation {
        let g = self.robot.goal_relative_position();
        let robot = [g.x, g.y, self.robot.velocity.x, self.robot.velocity.y, self.robot.heading];
        let peds = self
            .pedestrians
            .iter()
            .map(|p| {
                let pos = p.position_robot_frame(&self.robot);
                let vel = p.velocity_robot_frame(&self.robot);
                [pos.x, pos.y, vel.x, vel.y]
            })
            .collect();
        Observation { robot, peds }
    }

    /// Advances one tick. The action is clipped to the robot's preferred
    /// speed before integration.
    pub fn step(&mut self, action: Action, crowd: &dyn CrowdModel) -> Result<StepResult, SimError> {
        if !action.0.is_finite() {
            return Err(SimError::NonFiniteAction);
        }
        let a = action.clipped(self.robot.v_pref).0;

        // Pedestrian commands from the pre-step world; a pedestrian standing
        // on its goal holds position but keeps its radius.
        let ped_velocities: Vec<Vec2> = (0..self.pedestrians.len())
            .map(|i| {
                if self.pedestrians[i].at_goal() {
                    Vec2::ZERO
                } else {
                    crowd.velocity(self, i)
                }
            })
            .collect();

        let dt = self.config.dt;
        self.robot.position += a * dt;
        self.robot.velocity = a;
        for (p, v) in self.pedestrians.iter_mut().zip(&ped_velocities) {
            p.position += *v * dt;
            p.velocity = *v;
        }
        self.steps += 1;
        self.time += dt;

        let min_sep = self.min_separation();
        let at_goal = self.robot.at_goal();
        let mut r = reward(min_sep, at_goal);

        let outcome = if min_sep < 0.0 {
            Some(OutcomeKind::PedestrianCollision)
        } else if self.obstacles.disc_collides(self.robot.position, self.robot.radius) {
            r = COLLISION_PENALTY;
            Some(OutcomeKind::WallCollision)
        } else if at_goal {
            Some(OutcomeKind::Success)
        } else if self.steps >= self.config.max_steps() {
            Some(OutcomeKind::Timeout)
        } else {
            None
        };

        Ok(StepResult { reward: r, outcome })
    }

    /// Order-sensitive digest of the full dynamic state; used to confirm that
    /// paired evaluations saw identical worlds.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        let mut f = |v: f64| h.write_u64(v.to_bits());
        f(self.robot.position.x);
        f(self.robot.position.y);
        f(self.robot.velocity.x);
        f(self.robot.velocity.y);
        f(self.robot.heading);
        f(self.robot.radius);
        f(self.robot.v_pref);
        f(self.robot.goal.x);
        f(self.robot.goal.y);
        for p in &self.pedestrians {
            f(p.position.x);
            f(p.position.y);
            f(p.velocity.x);
            f(p.velocity.y);
            f(p.goal.x);
            f(p.goal.y);
            f(p.radius);
            f(p.v_pref);
        }
        for s in &self.obstacles.segments {
            f(s.a.x);
            f(s.a.y);
            f(s.b.x);
            f(s.b.y);
        }
        for rc in &self.obstacles.rects {
            f(rc.min.x);
            f(rc.min.y);
            f(rc.max.x);
            f(rc.max.y);
        }
        h.write_u64(self.visible as u64);
        h.write_u64(self.steps as u64);
        h.finish()
    }
}
