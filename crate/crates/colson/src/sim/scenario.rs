//! Episode generators: circle crossing and a walled corridor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{vec2, Segment, Vec2};
use crate::sim::obstacle::ObstacleMap;
use crate::sim::reward::DISCOMFORT_DIST;
use crate::sim::state::{PedestrianState, RobotState, SimConfig};
use crate::sim::world::{SimError, WorldState};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Circle,
    Wall,
}

/// Which world generator an episode comes from, as configuration data.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Circle crossing only; the corridor always seats its three lanes.
    pub pedestrians: usize,
    pub visible: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self { kind: ScenarioKind::Circle, pedestrians: 5, visible: true }
    }
}

impl ScenarioSpec {
    pub fn build(&self, seed: u64, config: &SimConfig) -> Result<WorldState, SimError> {
        match self.kind {
            ScenarioKind::Circle => {
                make_circle_crossing(self.pedestrians, seed, self.visible, config)
            }
            ScenarioKind::Wall => make_wall_scenario(seed, self.visible, config),
        }
    }
}

const PLACEMENT_ATTEMPTS: u32 = 1000;
// Dense crowds can paint sequential sampling into a corner; throwing away the
// partial layout and starting over is cheap and almost always unsticks it.
const PLACEMENT_RESTARTS: u32 = 100;

pub const WALL_CORRIDOR_HALF_WIDTH: f64 = 1.5;
pub const WALL_CORRIDOR_LENGTH: f64 = 10.0;

fn robot_facing(position: Vec2, goal: Vec2, config: &SimConfig) -> RobotState {
    let to_goal = goal - position;
    RobotState {
        position,
        velocity: Vec2::ZERO,
        heading: to_goal.y.atan2(to_goal.x),
        radius: config.robot_radius,
        v_pref: config.robot_v_pref,
        goal,
    }
}

/// True when `p` keeps `margin` clearance from every existing agent position
/// and goal.
fn clear_of(p: Vec2, margin: f64, robot: &RobotState, peds: &[PedestrianState]) -> bool {
    if (p - robot.position).norm() < margin || (p - robot.goal).norm() < margin {
        return false;
    }
    for other in peds {
        if (p - other.position).norm() < margin || (p - other.goal).norm() < margin {
            return false;
        }
    }
    true
}

/// Robot crosses a circle of radius `circle_radius` bottom to top;
/// pedestrians start on the circle with jittered positions and walk to the
/// diametrically opposite point. Same seed, same world, bit for bit.
pub fn make_circle_crossing(
    n_pedestrians: usize,
    seed: u64,
    visible: bool,
    config: &SimConfig,
) -> Result<WorldState, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = config.circle_radius;
    let robot = robot_facing(vec2(0.0, -r), vec2(0.0, r), config);

    let mut peds: Vec<PedestrianState> = Vec::with_capacity(n_pedestrians);
    'restart: for restart in 0..=PLACEMENT_RESTARTS {
        peds.clear();
        for i in 0..n_pedestrians {
            let mut placed = false;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let jx = (rng.gen::<f64>() - 0.5) * config.ped_v_pref;
                let jy = (rng.gen::<f64>() - 0.5) * config.ped_v_pref;
                let pos = vec2(r * angle.cos() + jx, r * angle.sin() + jy);
                let margin =
                    config.ped_radius + config.robot_radius.max(config.ped_radius) + DISCOMFORT_DIST;
                if clear_of(pos, margin, &robot, &peds) {
                    peds.push(PedestrianState {
                        position: pos,
                        velocity: Vec2::ZERO,
                        goal: -pos,
                        radius: config.ped_radius,
                        v_pref: config.ped_v_pref,
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                if restart == PLACEMENT_RESTARTS {
                    return Err(SimError::PlacementFailed {
                        pedestrian: i,
                        attempts: PLACEMENT_ATTEMPTS,
                    });
                }
                continue 'restart;
            }
        }
        break;
    }

    Ok(WorldState {
        robot,
        pedestrians: peds,
        obstacles: ObstacleMap::default(),
        visible,
        time: 0.0,
        steps: 0,
        config: *config,
    })
}

/// A 3m-wide, 10m-long corridor. The robot runs the length of it while three
/// pedestrians come the other way, so it has to thread between oncoming
/// traffic and the walls. Walls are not fed to the pedestrian controllers;
/// traffic stays off them by construction.
pub fn make_wall_scenario(seed: u64, visible: bool, config: &SimConfig) -> Result<WorldState, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_w = WALL_CORRIDOR_HALF_WIDTH;
    let half_l = WALL_CORRIDOR_LENGTH / 2.0;
    let obstacles = ObstacleMap {
        segments: vec![
            Segment::new(vec2(-half_w, -half_l), vec2(-half_w, half_l)),
            Segment::new(vec2(half_w, -half_l), vec2(half_w, half_l)),
        ],
        rects: vec![],
    };

    let robot = robot_facing(vec2(0.0, -half_l + 0.5), vec2(0.0, half_l - 0.5), config);

    let lanes = [-0.9, 0.0, 0.9];
    let mut peds: Vec<PedestrianState> = Vec::with_capacity(lanes.len());
    for (i, lane) in lanes.iter().enumerate() {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let pos = vec2(
                lane + rng.gen_range(-0.15..0.15),
                half_l - 1.0 + rng.gen_range(-0.3..0.3),
            );
            let margin = 2.0 * config.ped_radius + DISCOMFORT_DIST;
            if clear_of(pos, margin, &robot, &peds) {
                // Cross to the mirrored lane past the robot's start, already
                // walking that way.
                let goal = vec2(-lane, -half_l - 0.5);
                peds.push(PedestrianState {
                    position: pos,
                    velocity: (goal - pos).normalized() * config.ped_v_pref,
                    goal,
                    radius: config.ped_radius,
                    v_pref: config.ped_v_pref,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SimError::PlacementFailed { pedestrian: i, attempts: PLACEMENT_ATTEMPTS });
        }
    }

    Ok(WorldState {
        robot,
        pedestrians: peds,
        obstacles,
        visible,
        time: 0.0,
        steps: 0,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_crossing_is_reproducible_bitwise() {
        let cfg = SimConfig::default();
        let a = make_circle_crossing(5, 1234, true, &cfg).unwrap();
        let b = make_circle_crossing(5, 1234, true, &cfg).unwrap();
        assert_eq!(a, b);
        let c = make_circle_crossing(5, 1235, true, &cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn circle_crossing_geometry() {
        let cfg = SimConfig::default();
        let w = make_circle_crossing(5, 7, true, &cfg).unwrap();
        assert_eq!(w.robot.position, vec2(0.0, -4.0));
        assert_eq!(w.robot.goal, vec2(0.0, 4.0));
        assert!((w.robot.heading - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        for p in &w.pedestrians {
            assert_eq!(p.goal, -p.position);
            // On the circle up to the +-0.5m jitter per axis.
            let r = p.position.norm();
            assert!(r > cfg.circle_radius - 1.0 && r < cfg.circle_radius + 1.0, "r = {r}");
        }
    }

    #[test]
    fn no_initial_overlaps_across_many_seeds() {
        let cfg = SimConfig::default();
        for seed in 0..300 {
            let w = make_circle_crossing(5, seed, true, &cfg).unwrap();
            assert!(w.min_separation() > 0.0, "seed {seed}");
            for i in 0..w.pedestrians.len() {
                for j in (i + 1)..w.pedestrians.len() {
                    let gap = (w.pedestrians[i].position - w.pedestrians[j].position).norm()
                        - w.pedestrians[i].radius
                        - w.pedestrians[j].radius;
                    assert!(gap > 0.0, "seed {seed}: peds {i},{j} overlap");
                }
            }
        }
    }

    #[test]
    fn zero_pedestrians_is_valid() {
        let w = make_circle_crossing(0, 3, true, &SimConfig::default()).unwrap();
        assert!(w.pedestrians.is_empty());
        assert_eq!(w.min_separation(), f64::INFINITY);
    }

    #[test]
    fn dense_crowds_still_place() {
        let cfg = SimConfig::default();
        for seed in 0..20 {
            assert!(make_circle_crossing(20, seed, true, &cfg).is_ok(), "seed {seed}");
        }
    }

    #[test]
    fn wall_scenario_layout() {
        let cfg = SimConfig::default();
        let w = make_wall_scenario(11, true, &cfg).unwrap();
        assert_eq!(w.obstacles.segments.len(), 2);
        assert_eq!(w.pedestrians.len(), 3);
        // Robot and its straight-line path stay strictly inside the corridor.
        let path = Segment::new(w.robot.position, w.robot.goal);
        for wall in &w.obstacles.segments {
            assert!(!path.intersects(wall));
        }
        assert!(w.robot.position.x.abs() < WALL_CORRIDOR_HALF_WIDTH);
        // Oncoming traffic: every pedestrian goal is past the robot start and
        // the initial velocity already points into the robot's half.
        for p in &w.pedestrians {
            assert!(p.goal.y < w.robot.position.y);
            assert!(p.position.y > 0.0);
            assert!(p.position.x.abs() < WALL_CORRIDOR_HALF_WIDTH - cfg.ped_radius);
            assert!(p.velocity.y < 0.0);
            assert!((p.velocity.norm() - cfg.ped_v_pref).abs() < 1e-12);
        }
    }

    #[test]
    fn wall_scenario_is_reproducible() {
        let cfg = SimConfig::default();
        assert_eq!(
            make_wall_scenario(5, true, &cfg).unwrap(),
            make_wall_scenario(5, true, &cfg).unwrap()
        );
    }

    #[test]
    fn spec_dispatches_to_the_right_generator() {
        let cfg = SimConfig::default();
        let spec = ScenarioSpec { kind: ScenarioKind::Circle, pedestrians: 2, visible: false };
        let w = spec.build(9, &cfg).unwrap();
        assert_eq!(w, make_circle_crossing(2, 9, false, &cfg).unwrap());
        assert!(!w.visible);

        let spec = ScenarioSpec { kind: ScenarioKind::Wall, pedestrians: 7, visible: true };
        let w = spec.build(9, &cfg).unwrap();
        assert_eq!(w, make_wall_scenario(9, true, &cfg).unwrap());
        assert_eq!(w.pedestrians.len(), 3, "corridor ignores the requested count");
    }
}
