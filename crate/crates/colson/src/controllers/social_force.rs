//! Circular-specification social force model: relaxation toward the desired
//! velocity plus exponential repulsion from nearby bodies.

use serde::{Deserialize, Serialize};

use crate::geom::{vec2, Vec2};
use crate::sim::{CrowdModel, WorldState};

use super::goal_seek_velocity;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SocialForceParams {
    /// Repulsion amplitude.
    pub strength_a: f64,
    /// Repulsion e-folding range in meters.
    pub range_b: f64,
    /// Seconds to relax toward the desired velocity.
    pub relaxation_time: f64,
}

impl Default for SocialForceParams {
    fn default() -> Self {
        SocialForceParams { strength_a: 2.0, range_b: 0.3, relaxation_time: 0.5 }
    }
}

/// Acceleration on an agent at `position` moving at `velocity`, pulled toward
/// `desired_velocity` and pushed by each (position, radius) body in `others`.
pub fn sf_acceleration(
    position: Vec2,
    velocity: Vec2,
    radius: f64,
    desired_velocity: Vec2,
    others: &[(Vec2, f64)],
    params: &SocialForceParams,
) -> Vec2 {
    let mut accel = (desired_velocity - velocity) / params.relaxation_time;
    for &(other_pos, other_radius) in others {
        let offset = position - other_pos;
        let d = offset.norm();
        let n = if d > 1e-12 {
            offset / d
        } else if velocity.norm_sq() > 1e-12 {
            // Coincident centers: push sideways off the direction of travel.
            velocity.perp().normalized()
        } else {
            vec2(1.0, 0.0)
        };
        let magnitude = params.strength_a * ((radius + other_radius - d) / params.range_b).exp();
        accel += n * magnitude;
    }
    accel
}

/// Crowd driver: explicit Euler on the social force, speed clipped to each
/// pedestrian's preferred speed. The robot repels only when visible.
pub struct SocialForceCrowd {
    pub params: SocialForceParams,
}

impl CrowdModel for SocialForceCrowd {
    fn velocity(&self, world: &WorldState, ped_index: usize) -> Vec2 {
        let me = &world.pedestrians[ped_index];
        let desired =
            goal_seek_velocity(me.position, me.goal, me.v_pref, world.config.dt, me.radius);
        let mut others: Vec<(Vec2, f64)> =
            Vec::with_capacity(world.pedestrians.len());
        for (j, p) in world.pedestrians.iter().enumerate() {
            if j != ped_index {
                others.push((p.position, p.radius));
            }
        }
        if world.visible {
            others.push((world.robot.position, world.robot.radius));
        }
        let a = sf_acceleration(me.position, me.velocity, me.radius, desired, &others, &self.params);
        (me.velocity + a * world.config.dt).clipped(me.v_pref)
    }
}
