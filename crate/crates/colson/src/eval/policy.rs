//! Robot policies under evaluation: scripted baselines and the learned
//! diffusion policy in its three sampling modes.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ndgrad::{NdError, Tensor};

use crate::controllers::{orca_robot_velocity, goal_seek_velocity, OrcaParams};
use crate::diffusion::{
    sample_obstacle_aware, DiffusionSchedule, GaussianSource, GuidanceConfig, Sampler,
    SamplerConfig,
};
use crate::geom::{vec2, Vec2};
use crate::nets::{BatchedGraphs, NetConfig, Nets};
use crate::sim::{Action, Observation, WorldState};

/// A policy maps the pre-step world to an action in the normalized box.
/// `prev` carries the previous normalized action of the same episode, the
/// anchor for partial-noising smoothness.
pub trait Policy: Sync {
    fn act(
        &self,
        world: &WorldState,
        obs: &Observation,
        prev: Option<Vec2>,
        rng: &mut ChaCha8Rng,
    ) -> Vec2;
}

/// Robot runs the same reciprocal planner the crowd does.
#[derive(Clone, Debug, Default)]
pub struct OrcaPolicy {
    pub params: OrcaParams,
}

impl Policy for OrcaPolicy {
    fn act(&self, world: &WorldState, _: &Observation, _: Option<Vec2>, _: &mut ChaCha8Rng) -> Vec2 {
        Action(orca_robot_velocity(world, &self.params)).to_normalized(world.robot.v_pref)
    }
}

/// Drives at preferred speed straight at the goal, ignoring everything.
#[derive(Clone, Copy, Debug, Default)]
pub struct StraightToGoal;

impl Policy for StraightToGoal {
    fn act(&self, world: &WorldState, _: &Observation, _: Option<Vec2>, _: &mut ChaCha8Rng) -> Vec2 {
        let r = &world.robot;
        let v = goal_seek_velocity(r.position, r.goal, r.v_pref, world.config.dt, r.radius);
        Action(v).to_normalized(r.v_pref)
    }
}

/// Uniform actions over the whole box; the floor any learned policy must beat.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&self, _: &WorldState, _: &Observation, _: Option<Vec2>, rng: &mut ChaCha8Rng) -> Vec2 {
        vec2(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
    }
}

/// How the diffusion policy turns noise into an action.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    /// Full reverse chain from fresh noise.
    Plain,
    /// Partial noising of the previous action, then denoising from there.
    Smoothed,
    /// Full chain with an obstacle-repulsion pull at every step.
    ObstacleGuided,
}

impl GuidanceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GuidanceMode::Plain => "plain",
            GuidanceMode::Smoothed => "smoothed",
            GuidanceMode::ObstacleGuided => "obstacle_guided",
        }
    }
}

/// The learned policy: a scene encoder conditioning a score network whose
/// reverse chain emits one action per observation.
pub struct DiffusionPolicy {
    pub nets: Nets,
    pub schedule: DiffusionSchedule,
    pub sampler: SamplerConfig,
    pub mode: GuidanceMode,
    /// Noising depth for the smoothed mode, in 1..=T.
    pub edit_depth: usize,
    pub guidance: GuidanceConfig,
}

impl DiffusionPolicy {
    pub fn new(net_cfg: &NetConfig, diffusion_steps: usize, sampler: SamplerConfig, seed: u64) -> Self {
        DiffusionPolicy {
            nets: Nets::new(net_cfg, seed),
            schedule: DiffusionSchedule::linear(diffusion_steps),
            sampler,
            mode: GuidanceMode::Plain,
            edit_depth: (diffusion_steps / 2).max(1),
            guidance: GuidanceConfig::default(),
        }
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<(), NdError> {
        self.nets.load(path)
    }

    /// A borrowed view of the same weights under a different sampling mode;
    /// lets paired comparisons share one loaded network.
    pub fn with_mode(&self, mode: GuidanceMode) -> ModedPolicy<'_> {
        ModedPolicy { base: self, mode }
    }

    pub fn act_with_mode(
        &self,
        mode: GuidanceMode,
        world: &WorldState,
        obs: &Observation,
        prev: Option<Vec2>,
        rng: &mut ChaCha8Rng,
    ) -> Vec2 {
        let g = BatchedGraphs::from_observations(std::slice::from_ref(obs));
        let h = self.nets.encode_actor(&g);
        let t = self.schedule.len();
        let mut score =
            |x: &Tensor, tau: usize| self.nets.score_plain(&h, x, &vec![tau; x.rows()], t);
        let sampler = Sampler::new(&self.schedule, self.sampler);
        let mut noise = GaussianSource(rng);
        let out = match (mode, prev) {
            (GuidanceMode::Smoothed, Some(p)) => {
                let anchor = Tensor::from_vec(1, 2, vec![p.x, p.y]);
                sampler.sample_smoothed(&anchor, self.edit_depth, &mut score, &mut noise)
            }
            (GuidanceMode::ObstacleGuided, _) => sample_obstacle_aware(
                &sampler,
                1,
                &mut score,
                world.robot.position,
                world.robot.v_pref,
                &world.obstacles,
                &self.guidance,
                &mut noise,
            ),
            // The first step of a smoothed episode has no anchor yet.
            _ => sampler.sample(1, &mut score, &mut noise),
        };
        vec2(out.get(0, 0), out.get(0, 1))
    }
}

impl Policy for DiffusionPolicy {
    fn act(&self, world: &WorldState, obs: &Observation, prev: Option<Vec2>, rng: &mut ChaCha8Rng) -> Vec2 {
        self.act_with_mode(self.mode, world, obs, prev, rng)
    }
}

pub struct ModedPolicy<'a> {
    base: &'a DiffusionPolicy,
    mode: GuidanceMode,
}

impl Policy for ModedPolicy<'_> {
    fn act(&self, world: &WorldState, obs: &Observation, prev: Option<Vec2>, rng: &mut ChaCha8Rng) -> Vec2 {
        self.base.act_with_mode(self.mode, world, obs, prev, rng)
    }
}
