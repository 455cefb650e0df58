//! Optimal reciprocal collision avoidance.
//!
//! Each neighbor induces a half-plane of permitted velocities built from the
//! truncated velocity obstacle: outside the cutoff circle the relative
//! velocity is projected onto the circle or onto one of the cone legs;
//! already-overlapping agents get a cutoff circle at one-timestep range. The
//! agent then takes the feasible velocity closest to its preferred one via an
//! incremental linear program, falling back to least penetration when the
//! constraints are jointly infeasible.

use serde::{Deserialize, Serialize};

use crate::geom::{vec2, Vec2};
use crate::sim::{CrowdModel, WorldState};

const EPS: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrcaParams {
    /// Seconds of lookahead for mutual avoidance.
    pub time_horizon: f64,
    /// Neighbors beyond this distance are ignored.
    pub neighbor_distance: f64,
    /// Added to both radii when building constraints.
    pub safety_margin: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        OrcaParams { time_horizon: 5.0, neighbor_distance: 10.0, safety_margin: 0.0 }
    }
}

/// Kinematic snapshot of one disc agent.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct OrcaAgent {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Closed half-plane of permitted velocities: v is allowed when
/// (v - point) . normal >= 0. The normal has unit length.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct HalfPlane {
    pub point: Vec2,
    pub normal: Vec2,
}

impl HalfPlane {
    pub fn permits(&self, v: Vec2) -> bool {
        (v - self.point).dot(self.normal) >= 0.0
    }

    /// Signed violation: positive when v is on the forbidden side.
    pub fn violation(&self, v: Vec2) -> f64 {
        -(v - self.point).dot(self.normal)
    }

    /// Boundary direction such that the permitted side lies to its left.
    fn direction(&self) -> Vec2 {
        vec2(self.normal.y, -self.normal.x)
    }

    fn from_point_direction(point: Vec2, direction: Vec2) -> Self {
        HalfPlane { point, normal: direction.perp() }
    }
}

/// One half-plane per neighbor; this agent takes half the avoidance effort.
pub fn orca_halfplanes(
    me: &OrcaAgent,
    neighbors: &[OrcaAgent],
    params: &OrcaParams,
    dt: f64,
) -> Vec<HalfPlane> {
    let inv_horizon = 1.0 / params.time_horizon;
    let mut planes = Vec::with_capacity(neighbors.len());

    for other in neighbors {
        let rel_pos = other.position - me.position;
        let rel_vel = me.velocity - other.velocity;
        let dist_sq = rel_pos.norm_sq();
        let combined = me.radius + other.radius + params.safety_margin;
        let combined_sq = combined * combined;

        let (direction, u);
        if dist_sq > combined_sq {
            // No current overlap: truncated cone with cutoff at range/horizon.
            let w = rel_vel - rel_pos * inv_horizon;
            let w_len_sq = w.norm_sq();
            let dot1 = w.dot(rel_pos);
            if dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq {
                // Closest point lies on the cutoff circle.
                let w_len = w_len_sq.sqrt();
                let unit_w = w / w_len;
                direction = vec2(unit_w.y, -unit_w.x);
                u = unit_w * (combined * inv_horizon - w_len);
            } else {
                // Closest point lies on a cone leg.
                let leg = (dist_sq - combined_sq).sqrt();
                if rel_pos.det(w) > 0.0 {
                    direction = vec2(
                        rel_pos.x * leg - rel_pos.y * combined,
                        rel_pos.x * combined + rel_pos.y * leg,
                    ) / dist_sq;
                } else {
                    direction = -vec2(
                        rel_pos.x * leg + rel_pos.y * combined,
                        -rel_pos.x * combined + rel_pos.y * leg,
                    ) / dist_sq;
                }
                let dot2 = rel_vel.dot(direction);
                u = direction * dot2 - rel_vel;
            }
        } else {
            // Overlapping: push apart within one simulation step.
            let inv_dt = 1.0 / dt;
            let w = rel_vel - rel_pos * inv_dt;
            let w_len = w.norm();
            let unit_w = if w_len > EPS {
                w / w_len
            } else if rel_pos.norm_sq() > EPS {
                -rel_pos.normalized()
            } else {
                vec2(1.0, 0.0)
            };
            direction = vec2(unit_w.y, -unit_w.x);
            u = unit_w * (combined * inv_dt - w_len);
        }
        planes.push(HalfPlane::from_point_direction(me.velocity + u * 0.5, direction));
    }
    planes
}

fn det(a: Vec2, b: Vec2) -> f64 {
    a.det(b)
}

/// Optimum along the boundary of `lines[line_no]` subject to the earlier
/// lines and the speed disc. Returns false when that boundary is infeasible.
fn lp1(
    lines: &[HalfPlane],
    line_no: usize,
    radius: f64,
    opt: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> bool {
    let point = lines[line_no].point;
    let dir = lines[line_no].direction();
    let dot = point.dot(dir);
    let discriminant = dot * dot + radius * radius - point.norm_sq();
    if discriminant < 0.0 {
        return false;
    }
    let sqrt_d = discriminant.sqrt();
    let mut t_left = -dot - sqrt_d;
    let mut t_right = -dot + sqrt_d;

    for i in 0..line_no {
        let dir_i = lines[i].direction();
        let denom = det(dir, dir_i);
        let numer = det(dir_i, point - lines[i].point);
        if denom.abs() <= EPS {
            if numer < 0.0 {
                return false;
            }
            continue;
        }
        let t = numer / denom;
        if denom >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    let t = if direction_opt {
        if opt.dot(dir) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        (dir.dot(opt - point)).clamp(t_left, t_right)
    };
    *result = point + dir * t;
    true
}

/// Incremental LP over the half-planes and the speed disc. Returns the index
/// of the first failing constraint, or lines.len() on success.
fn lp2(lines: &[HalfPlane], radius: f64, opt: Vec2, direction_opt: bool, result: &mut Vec2) -> usize {
    *result = if direction_opt {
        opt * radius
    } else if opt.norm_sq() > radius * radius {
        opt.normalized() * radius
    } else {
        opt
    };
    for i in 0..lines.len() {
        if det(lines[i].direction(), lines[i].point - *result) > 0.0 {
            let saved = *result;
            if !lp1(lines, i, radius, opt, direction_opt, result) {
                *result = saved;
                return i;
            }
        }
    }
    lines.len()
}

/// Least-penetration fallback: starting from the first infeasible constraint,
/// minimizes the maximum violation over the remaining half-planes.
fn lp3(lines: &[HalfPlane], begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        let dir_i = lines[i].direction();
        if det(dir_i, lines[i].point - *result) > distance {
            let mut proj: Vec<HalfPlane> = Vec::with_capacity(i);
            for j in 0..i {
                let dir_j = lines[j].direction();
                let determinant = det(dir_i, dir_j);
                let point = if determinant.abs() <= EPS {
                    if dir_i.dot(dir_j) > 0.0 {
                        continue;
                    }
                    (lines[i].point + lines[j].point) * 0.5
                } else {
                    lines[i].point + dir_i * (det(dir_j, lines[i].point - lines[j].point) / determinant)
                };
                proj.push(HalfPlane::from_point_direction(point, (dir_j - dir_i).normalized()));
            }
            let saved = *result;
            if lp2(&proj, radius, dir_i.perp(), true, result) < proj.len() {
                *result = saved;
            }
            distance = det(dir_i, lines[i].point - *result);
        }
    }
}

/// Feasible velocity closest to `pref`, or the least-penetration velocity
/// when the half-planes are jointly infeasible. Always within the speed disc.
pub fn orca_velocity(half_planes: &[HalfPlane], pref: Vec2, max_speed: f64) -> Vec2 {
    let mut v = Vec2::ZERO;
    let fail = lp2(half_planes, max_speed, pref, false, &mut v);
    if fail < half_planes.len() {
        lp3(half_planes, fail, max_speed, &mut v);
    }
    v
}

/// Straight-to-goal preferred velocity with a final-step taper so the agent
/// does not overshoot, zero within `hold_radius` of the goal.
pub fn goal_seek_velocity(position: Vec2, goal: Vec2, v_pref: f64, dt: f64, hold_radius: f64) -> Vec2 {
    let to_goal = goal - position;
    let d = to_goal.norm();
    if d <= hold_radius {
        return Vec2::ZERO;
    }
    to_goal / d * v_pref.min(d / dt)
}

/// Crowd driver: every pedestrian runs the same reciprocal avoidance against
/// its neighbors, which include the robot only when the world marks it
/// visible. Static obstacles are not part of a pedestrian's picture.
pub struct OrcaCrowd {
    pub params: OrcaParams,
}

impl CrowdModel for OrcaCrowd {
    fn velocity(&self, world: &WorldState, ped_index: usize) -> Vec2 {
        let me_state = &world.pedestrians[ped_index];
        let me = OrcaAgent {
            position: me_state.position,
            velocity: me_state.velocity,
            radius: me_state.radius,
        };
        let mut neighbors: Vec<OrcaAgent> = Vec::with_capacity(world.pedestrians.len());
        for (j, p) in world.pedestrians.iter().enumerate() {
            if j == ped_index {
                continue;
            }
            if (p.position - me.position).norm() <= self.params.neighbor_distance {
                neighbors.push(OrcaAgent { position: p.position, velocity: p.velocity, radius: p.radius });
            }
        }
        if world.visible
            && (world.robot.position - me.position).norm() <= self.params.neighbor_distance
        {
            neighbors.push(OrcaAgent {
                position: world.robot.position,
                velocity: world.robot.velocity,
                radius: world.robot.radius,
            });
        }
        let pref = goal_seek_velocity(
            me_state.position,
            me_state.goal,
            me_state.v_pref,
            world.config.dt,
            me_state.radius,
        );
        let planes = orca_halfplanes(&me, &neighbors, &self.params, world.config.dt);
        orca_velocity(&planes, pref, me_state.v_pref)
    }
}

/// Velocity the robot itself would pick under the same reciprocal rules.
/// Every pedestrian in range is a neighbor; the world's visibility flag is
/// irrelevant here because the robot always sees the crowd.
pub fn orca_robot_velocity(world: &WorldState, params: &OrcaParams) -> Vec2 {
    let me = OrcaAgent {
        position: world.robot.position,
        velocity: world.robot.velocity,
        radius: world.robot.radius,
    };
    let neighbors: Vec<OrcaAgent> = world
        .pedestrians
        .iter()
        .filter(|p| (p.position - me.position).norm() <= params.neighbor_distance)
        .map(|p| OrcaAgent { position: p.position, velocity: p.velocity, radius: p.radius })
        .collect();
    let pref = goal_seek_velocity(
        world.robot.position,
        world.robot.goal,
        world.robot.v_pref,
        world.config.dt,
        world.robot.radius,
    );
    let planes = orca_halfplanes(&me, &neighbors, params, world.config.dt);
    orca_velocity(&planes, pref, world.robot.v_pref)
}
