use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

/// Fixed simulation constants for an episode.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step, seconds.
    pub dt: f64,
    /// Episode wall-clock limit, seconds.
    pub time_limit: f64,
    /// Radius of the crossing circle, meters.
    pub circle_radius: f64,
    pub robot_radius: f64,
    pub robot_v_pref: f64,
    pub ped_radius: f64,
    pub ped_v_pref: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.25,
            time_limit: 25.0,
            circle_radius: 4.0,
            robot_radius: 0.3,
            robot_v_pref: 1.0,
            ped_radius: 0.3,
            ped_v_pref: 1.0,
        }
    }
}

impl SimConfig {
    pub fn max_steps(&self) -> u32 {
        (self.time_limit / self.dt).ceil() as u32
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Absolute position; not part of the policy observation.
    pub position: Vec2,
    pub velocity: Vec2,
    /// Radians in (-pi, pi]. Held constant over an episode; it orients the
    /// robot-centered observation frame.
    pub heading: f64,
    pub radius: f64,
    pub v_pref: f64,
    pub goal: Vec2,
}

impl RobotState {
    /// Robot position expressed relative to the goal.
    pub fn goal_relative_position(&self) -> Vec2 {
        self.position - self.goal
    }

    pub fn distance_to_goal(&self) -> f64 {
        (self.position - self.goal).norm()
    }

    pub fn at_goal(&self) -> bool {
        self.distance_to_goal() <= self.radius
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PedestrianState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub goal: Vec2,
    pub radius: f64,
    pub v_pref: f64,
}

impl PedestrianState {
    /// Position in the robot-centered frame: translated by the robot
    /// position, rotated by minus the robot heading.
    pub fn position_robot_frame(&self, robot: &RobotState) -> Vec2 {
        (self.position - robot.position).rotated(-robot.heading)
    }

    /// Velocity rotated into the robot frame (free vector, no translation).
    pub fn velocity_robot_frame(&self, robot: &RobotState) -> Vec2 {
        self.velocity.rotated(-robot.heading)
    }

    pub fn at_goal(&self) -> bool {
        (self.position - self.goal).norm() <= self.radius
    }
}

/// Holonomic velocity command in world coordinates, meters/second.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action(pub Vec2);

impl Action {
    /// Magnitude clipped to the robot's preferred speed.
    pub fn clipped(self, v_pref: f64) -> Action {
        Action(self.0.clipped(v_pref))
    }

    /// Physical command from a policy output in the unit box: components
    /// scaled by the preferred speed, then the magnitude clipped to it.
    pub fn from_normalized(n: Vec2, v_pref: f64) -> Action {
        Action((n * v_pref).clipped(v_pref))
    }

    /// Inverse of `from_normalized` up to the speed clip: components divided
    /// by the preferred speed and clamped to the unit box.
    pub fn to_normalized(self, v_pref: f64) -> Vec2 {
        Vec2 {
            x: (self.0.x / v_pref).clamp(-1.0, 1.0),
            y: (self.0.y / v_pref).clamp(-1.0, 1.0),
        }
    }
}

/// Policy input: everything the robot is allowed to see.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// [goal-relative x, goal-relative y, vx, vy, heading]
    pub robot: [f64; 5],
    /// Per pedestrian: [x, y, vx, vy] in the robot frame.
    pub peds: Vec<[f64; 4]>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeKind {
    Success,
    PedestrianCollision,
    WallCollision,
    Timeout,
}

impl OutcomeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeKind::Success => "success",
            OutcomeKind::PedestrianCollision => "pedestrian_collision",
            OutcomeKind::WallCollision => "wall_collision",
            OutcomeKind::Timeout => "timeout",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::vec2;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn default_step_budget_is_one_hundred() {
        assert_eq!(SimConfig::default().max_steps(), 100);
    }

    #[test]
    fn robot_frame_recomposes_to_absolute() {
        let robot = RobotState {
            position: vec2(1.0, -2.0),
            velocity: vec2(0.3, 0.1),
            heading: FRAC_PI_2,
            radius: 0.3,
            v_pref: 1.0,
            goal: vec2(0.0, 4.0),
        };
        let ped = PedestrianState {
            position: vec2(-1.5, 2.5),
            velocity: vec2(0.7, -0.2),
            goal: vec2(3.0, 3.0),
            radius: 0.3,
            v_pref: 1.0,
        };
        let p_rf = ped.position_robot_frame(&robot);
        let v_rf = ped.velocity_robot_frame(&robot);
        let p_back = p_rf.rotated(robot.heading) + robot.position;
        let v_back = v_rf.rotated(robot.heading);
        assert!((p_back - ped.position).norm() < 1e-9);
        assert!((v_back - ped.velocity).norm() < 1e-9);
    }

    #[test]
    fn action_clip_is_a_noop_inside_the_ball() {
        let a = Action(vec2(0.3, 0.4)).clipped(1.0);
        assert_eq!(a.0, vec2(0.3, 0.4));
        let b = Action(vec2(3.0, 4.0)).clipped(1.0);
        assert!((b.0.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_actions_scale_then_clip() {
        // Inside the unit disc the map is a pure scale and inverts exactly.
        let a = Action::from_normalized(vec2(0.3, -0.4), 2.0);
        assert_eq!(a.0, vec2(0.6, -0.8));
        assert_eq!(a.to_normalized(2.0), vec2(0.3, -0.4));
        // Corners of the box land on the speed ball.
        let b = Action::from_normalized(vec2(1.0, 1.0), 1.0);
        assert!((b.0.norm() - 1.0).abs() < 1e-12);
        assert_eq!(b.0.x, b.0.y);
    }

    #[test]
    fn goal_relative_position_points_from_goal_to_robot() {
        let robot = RobotState {
            position: vec2(0.0, -4.0),
            velocity: Vec2::ZERO,
            heading: FRAC_PI_2,
            radius: 0.3,
            v_pref: 1.0,
            goal: vec2(0.0, 4.0),
        };
        assert_eq!(robot.goal_relative_position(), vec2(0.0, -8.0));
        assert!(!robot.at_goal());
    }
}
