//! The training loop: scripted warm start, exploration-annealed rollouts,
//! replayed gradient steps, periodic evaluation and checkpoints.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use ndgrad::NdError;

use crate::controllers::{orca_robot_velocity, CrowdController, OrcaParams};
use crate::diffusion::{DiffusionSchedule, GaussianSource, SamplerConfig};
use crate::geom::{vec2, Vec2};
use crate::nets::NetConfig;
use crate::sim::{
    Action, CrowdModel, Observation, OutcomeKind, ScenarioSpec, SimConfig, SimError, WorldState,
};

use super::buffer::{ReplayBuffer, Transition};
use super::learner::Learner;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Episodes driven by the scripted planner before learning starts.
    pub warm_start_episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub discount: f64,
    /// Per-step fraction the target critics keep of their old value.
    pub polyak_rate: f64,
    /// Multiplier turning critic action-gradients into score targets.
    pub score_scale: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Environment steps consumed per gradient step; 1 trains every step.
    pub steps_per_gradient: usize,
    /// Chance of a uniform random action, annealed to zero over the first
    /// third of training.
    pub exploration_start: f64,
    /// Episode period between saved checkpoints; 0 disables them.
    pub checkpoint_every: usize,
    /// Episode period between held-out evaluations; 0 disables them.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 2000,
            warm_start_episodes: 2000,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            discount: 0.9,
            polyak_rate: 0.995,
            score_scale: 400.0,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            steps_per_gradient: 1,
            exploration_start: 0.3,
            checkpoint_every: 500,
            eval_every: 500,
            eval_episodes: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) {
        assert!(self.batch_size >= 1, "batch size must be positive");
        assert!(
            self.buffer_capacity >= self.batch_size,
            "buffer smaller than one batch"
        );
        assert!((0.0..=1.0).contains(&self.discount), "discount outside [0, 1]");
        assert!(
            self.polyak_rate > 0.0 && self.polyak_rate <= 1.0,
            "tracking rate outside (0, 1]"
        );
        assert!(self.score_scale >= 0.0, "score scale must be nonnegative");
        assert!(self.actor_lr > 0.0 && self.critic_lr > 0.0, "learning rates must be positive");
        assert!(self.steps_per_gradient >= 1, "steps per gradient must be positive");
        assert!(
            (0.0..=1.0).contains(&self.exploration_start),
            "exploration chance outside [0, 1]"
        );
    }
}

/// Everything a training run needs, serializable so a run directory can
/// reproduce itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSetup {
    pub scenario: ScenarioSpec,
    pub sim: SimConfig,
    pub controller: CrowdController,
    pub net: NetConfig,
    pub sampler: SamplerConfig,
    pub diffusion_steps: usize,
    /// Noise-variance endpoints of the linear schedule.
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub trainer: TrainConfig,
    pub seed: u64,
    /// Start from these weights instead of a fresh initialization.
    pub init_checkpoint: Option<PathBuf>,
}

impl Default for TrainSetup {
    fn default() -> Self {
        TrainSetup {
            scenario: ScenarioSpec::default(),
            sim: SimConfig::default(),
            controller: CrowdController::default(),
            net: NetConfig::default(),
            sampler: SamplerConfig::default(),
            diffusion_steps: 100,
            alpha_min: 1e-4,
            alpha_max: 0.02,
            trainer: TrainConfig::default(),
            seed: 0,
            init_checkpoint: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nd(#[from] NdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("non-finite loss at episode {episode}; weights dumped to {path}")]
    NonFinite { episode: usize, path: PathBuf },
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    pub episodes: usize,
    pub warm_transitions: usize,
    pub buffer_len: usize,
    pub final_success_rate: Option<f64>,
    pub checkpoints: Vec<PathBuf>,
    pub metrics_path: PathBuf,
}

/// One line per episode in the metrics log.
#[derive(Debug, Serialize)]
struct MetricsRow {
    episode: usize,
    #[serde(rename = "return")]
    ret: f64,
    success: bool,
    steps: u32,
    critic_loss: Option<f64>,
    qsm_loss: Option<f64>,
    eval_success: Option<f64>,
}

pub struct RolloutSummary {
    pub ret: f64,
    pub steps: u32,
    pub outcome: OutcomeKind,
}

/// Runs one episode to termination. `pick` sees the pre-step world and
/// observation and returns an action in the normalized box; transitions land
/// in `sink` when one is given.
pub fn rollout(
    world: &mut WorldState,
    crowd: &dyn CrowdModel,
    pick: &mut dyn FnMut(&WorldState, &Observation) -> Vec2,
    mut sink: Option<&mut Vec<Transition>>,
) -> Result<RolloutSummary, SimError> {
    let mut ret = 0.0;
    let mut steps = 0;
    loop {
        let obs = world.observation();
        let normalized = pick(world, &obs);
        let action = Action::from_normalized(normalized, world.robot.v_pref);
        let result = world.step(action, crowd)?;
        ret += result.reward;
        steps += 1;
        if let Some(out) = sink.as_deref_mut() {
            out.push(Transition {
                observation: obs,
                action: normalized,
                reward: result.reward,
                next_observation: world.observation(),
                done: result.outcome.is_some(),
            });
        }
        if let Some(outcome) = result.outcome {
            return Ok(RolloutSummary { ret, steps, outcome });
        }
    }
}

/// How many gradient steps a finished episode buys, given steps carried over
/// from previous episodes; returns (steps, new carry).
fn gradient_allowance(env_steps: u32, carry: u32, per: u32) -> (u32, u32) {
    let total = env_steps + carry;
    (total / per, total % per)
}

/// Uniform-action chance for episode `e` of `total`: starts at `start` and
/// reaches zero a third of the way through.
fn exploration_chance(e: usize, total: usize, start: f64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    start * (1.0 - 3.0 * e as f64 / total as f64).max(0.0)
}

/// Scripted warm-start episodes: the robot runs the same reciprocal planner
/// as the crowd, in a world where everyone can see it, and the transitions
/// seed the replay buffer.
pub fn warm_start(
    setup: &TrainSetup,
    buffer: &mut ReplayBuffer,
    rng: &mut ChaCha8Rng,
) -> Result<usize, TrainError> {
    let mut spec = setup.scenario.clone();
    spec.visible = true;
    let planner = OrcaParams::default();
    let mut stored = 0;
    for _ in 0..setup.trainer.warm_start_episodes {
        let seed: u64 = rng.gen();
        let mut world = spec.build(seed, &setup.sim)?;
        let mut transitions = Vec::new();
        let mut pick = |w: &WorldState, _: &Observation| {
            Action(orca_robot_velocity(w, &planner)).to_normalized(w.robot.v_pref)
        };
        rollout(&mut world, &setup.controller, &mut pick, Some(&mut transitions))?;
        stored += transitions.len();
        for t in transitions {
            buffer.push(t);
        }
    }
    Ok(stored)
}

/// Deterministic evaluation sweep on rng streams disjoint from training, so
/// turning it on or off cannot perturb the learning trajectory.
fn internal_eval(
    learner: &Learner,
    setup: &TrainSetup,
    episode: usize,
) -> Result<f64, TrainError> {
    let n = setup.trainer.eval_episodes;
    if n == 0 {
        return Ok(0.0);
    }
    let mut successes = 0;
    for i in 0..n {
        let mix = setup.seed ^ ((episode as u64 + 1) << 32) ^ (i as u64 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(mix);
        let world_seed: u64 = rng.gen();
        let mut world = setup.scenario.build(world_seed, &setup.sim)?;
        let mut pick = |_: &WorldState, obs: &Observation| {
            learner.sample_action(obs, &mut GaussianSource(&mut rng))
        };
        let summary = rollout(&mut world, &setup.controller, &mut pick, None)?;
        if summary.outcome == OutcomeKind::Success {
            successes += 1;
        }
    }
    Ok(successes as f64 / n as f64)
}

/// Full run: warm start, training loop, checkpoints, metrics log. Returns
/// early with the offending episode if any loss goes non-finite.
pub fn train(setup: &TrainSetup, out_dir: &Path) -> Result<TrainReport, TrainError> {
    setup.trainer.validate();
    let ckpt_dir = out_dir.join("checkpoints");
    let log_dir = out_dir.join("logs");
    fs::create_dir_all(&ckpt_dir)?;
    fs::create_dir_all(&log_dir)?;

    let schedule =
        DiffusionSchedule::linear_range(setup.diffusion_steps, setup.alpha_min, setup.alpha_max);
    let mut learner =
        Learner::new(&setup.net, schedule, setup.sampler, setup.trainer, setup.seed);
    if let Some(path) = &setup.init_checkpoint {
        learner.nets.load(path)?;
    }

    let mut checkpoints = Vec::new();
    let init_path = ckpt_dir.join("init.ndgt");
    learner.nets.save(&init_path)?;
    checkpoints.push(init_path);

    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut buffer = ReplayBuffer::new(setup.trainer.buffer_capacity);
    let warm_transitions = warm_start(setup, &mut buffer, &mut rng)?;

    let metrics_path = log_dir.join("metrics.jsonl");
    let mut metrics = BufWriter::new(File::create(&metrics_path)?);
    // Wall-clock timings live beside the metrics, not in them, so the log
    // stays byte-identical between runs of the same seed.
    let mut timing = BufWriter::new(File::create(log_dir.join("timing.txt"))?);

    let total = setup.trainer.episodes;
    let mut carry = 0u32;
    let mut final_success = None;
    for e in 0..total {
        let started = Instant::now();
        let world_seed: u64 = rng.gen();
        let mut world = setup.scenario.build(world_seed, &setup.sim)?;
        let epsilon = exploration_chance(e, total, setup.trainer.exploration_start);

        let mut transitions = Vec::new();
        let summary = {
            let learner = &learner;
            let rng = &mut rng;
            let mut pick = move |_: &WorldState, obs: &Observation| {
                if rng.gen::<f64>() < epsilon {
                    vec2(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
                } else {
                    learner.sample_action(obs, &mut GaussianSource(rng))
                }
            };
            rollout(&mut world, &setup.controller, &mut pick, Some(&mut transitions))?
        };
        // The buffer only sees whole episodes; nothing is learned mid-rollout.
        for t in transitions {
            buffer.push(t);
        }

        let (allowed, new_carry) =
            gradient_allowance(summary.steps, carry, setup.trainer.steps_per_gradient as u32);
        carry = new_carry;

        let mut critic_losses = Vec::new();
        let mut qsm_losses = Vec::new();
        if buffer.len() >= setup.trainer.batch_size {
            for _ in 0..allowed {
                let idx = buffer.sample_indices(setup.trainer.batch_size, &mut rng);
                let batch: Vec<&Transition> = idx.iter().map(|&i| buffer.get(i)).collect();
                let (c1, c2) = learner.critic_update(&batch, &mut rng);
                let qsm = learner.actor_update(&batch, &mut rng);
                learner.polyak();
                let critic = 0.5 * (c1 + c2);
                if !critic.is_finite() || !qsm.is_finite() {
                    let path = ckpt_dir.join("diagnostic.ndgt");
                    learner.nets.save(&path)?;
                    return Err(TrainError::NonFinite { episode: e, path });
                }
                critic_losses.push(critic);
                qsm_losses.push(qsm);
            }
        }

        let eval_success = if setup.trainer.eval_every > 0
            && (e + 1) % setup.trainer.eval_every == 0
        {
            let rate = internal_eval(&learner, setup, e)?;
            final_success = Some(rate);
            Some(rate)
        } else {
            None
        };

        if setup.trainer.checkpoint_every > 0 && (e + 1) % setup.trainer.checkpoint_every == 0 {
            let path = ckpt_dir.join(format!("ep{:06}.ndgt", e + 1));
            learner.nets.save(&path)?;
            checkpoints.push(path);
        }

        let row = MetricsRow {
            episode: e,
            ret: summary.ret,
            success: summary.outcome == OutcomeKind::Success,
            steps: summary.steps,
            critic_loss: mean(&critic_losses),
            qsm_loss: mean(&qsm_losses),
            eval_success,
        };
        writeln!(metrics, "{}", serde_json::to_string(&row)?)?;
        writeln!(timing, "{}\t{:.6}", e, started.elapsed().as_secs_f64())?;
    }

    if total > 0 {
        let path = ckpt_dir.join("final.ndgt");
        learner.nets.save(&path)?;
        checkpoints.push(path);
        if final_success.is_none() && setup.trainer.eval_episodes > 0 {
            final_success = Some(internal_eval(&learner, setup, total)?);
        }
    }
    metrics.flush()?;
    timing.flush()?;

    Ok(TrainReport {
        episodes: total,
        warm_transitions,
        buffer_len: buffer.len(),
        final_success_rate: final_success,
        checkpoints,
        metrics_path,
    })
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ScenarioKind;

    fn tiny_setup(episodes: usize) -> TrainSetup {
        TrainSetup {
            scenario: ScenarioSpec { kind: ScenarioKind::Circle, pedestrians: 1, visible: true },
            net: NetConfig {
                gat_hidden: 16,
                gat_heads: 2,
                mlp_hidden: 16,
                tau_embed_dim: 4,
                leaky_slope: 0.2,
                pooled_readout: false,
            },
            diffusion_steps: 3,
            trainer: TrainConfig {
                episodes,
                warm_start_episodes: 2,
                batch_size: 8,
                buffer_capacity: 10_000,
                steps_per_gradient: 8,
                checkpoint_every: 0,
                eval_every: 0,
                eval_episodes: 0,
                ..TrainConfig::default()
            },
            seed: 42,
            ..TrainSetup::default()
        }
    }

    #[test]
    fn scripted_warm_start_reaches_the_goal_alone() {
        let cfg = SimConfig::default();
        let mut world = make_empty_crossing(&cfg);
        let planner = OrcaParams::default();
        let mut pick = |w: &WorldState, _: &Observation| {
            Action(orca_robot_velocity(w, &planner)).to_normalized(w.robot.v_pref)
        };
        let crowd = CrowdController::default();
        let summary = rollout(&mut world, &crowd, &mut pick, None).unwrap();
        assert_eq!(summary.outcome, OutcomeKind::Success);
        // 8 m at 1 m/s and 0.25 s steps, minus the goal radius.
        assert!((25..40).contains(&summary.steps), "took {} steps", summary.steps);
        assert!(summary.ret > 0.9);
    }

    fn make_empty_crossing(cfg: &SimConfig) -> WorldState {
        crate::sim::make_circle_crossing(0, 5, true, cfg).unwrap()
    }

    #[test]
    fn warm_start_fills_the_buffer_reproducibly() {
        let setup = tiny_setup(0);
        let run = || {
            let mut buffer = ReplayBuffer::new(10_000);
            let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
            let n = warm_start(&setup, &mut buffer, &mut rng).unwrap();
            let tail: Vec<Transition> =
                (0..buffer.len()).map(|i| buffer.get(i).clone()).collect();
            (n, tail)
        };
        let (n1, t1) = run();
        let (n2, t2) = run();
        assert!(n1 > 0);
        assert_eq!(n1, t1.len());
        assert_eq!(n1, n2);
        assert_eq!(t1, t2);
        // The planner's transitions end each episode with the success reward.
        assert!(t1.iter().any(|t| t.reward == 1.0));
    }

    #[test]
    fn zero_episode_run_writes_only_the_initial_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let setup = tiny_setup(0);
        let report = train(&setup, dir.path()).unwrap();
        assert_eq!(report.episodes, 0);
        assert_eq!(report.checkpoints.len(), 1);
        assert!(report.checkpoints[0].ends_with("checkpoints/init.ndgt"));
        assert!(report.checkpoints[0].exists());
        assert!(!dir.path().join("checkpoints/final.ndgt").exists());
        assert_eq!(report.buffer_len, report.warm_transitions);
        assert_eq!(fs::read_to_string(report.metrics_path).unwrap(), "");
    }

    #[test]
    fn metrics_and_weights_are_bitwise_reproducible() {
        let mut setup = tiny_setup(3);
        setup.trainer.eval_every = 2;
        setup.trainer.eval_episodes = 2;
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            let report = train(&setup, dir.path()).unwrap();
            let metrics = fs::read(&report.metrics_path).unwrap();
            let weights = fs::read(dir.path().join("checkpoints/final.ndgt")).unwrap();
            (report.final_success_rate, metrics, weights)
        };
        let (s1, m1, w1) = run();
        let (s2, m2, w2) = run();
        assert_eq!(s1, s2);
        assert_eq!(m1, m2);
        assert_eq!(w1, w2);
        let text = String::from_utf8(m1).unwrap();
        assert_eq!(text.lines().count(), 3);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert!(first.get("return").is_some());
        assert!(first.get("critic_loss").is_some());
    }

    #[test]
    fn training_aborts_on_poisoned_weights() {
        let dir = tempfile::tempdir().unwrap();
        let mut setup = tiny_setup(2);

        // Plant a NaN in one critic head only: rollouts stay finite, the
        // first critic update does not.
        let net = crate::nets::Nets::new(&setup.net, setup.seed);
        let mut poisoned = net;
        let idx = poisoned.params.index_of("critic1.q.l0.w").unwrap();
        poisoned.params.get_mut(idx).data_mut()[0] = f64::NAN;
        let bad_path = dir.path().join("poisoned.ndgt");
        poisoned.save(&bad_path).unwrap();
        setup.init_checkpoint = Some(bad_path);
        setup.trainer.warm_start_episodes = 4;
        setup.trainer.steps_per_gradient = 1;

        let err = train(&setup, dir.path()).unwrap_err();
        match err {
            TrainError::NonFinite { episode, path } => {
                assert_eq!(episode, 0);
                assert!(path.exists());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn exploration_anneals_to_zero_after_the_first_third() {
        assert_eq!(exploration_chance(0, 900, 0.3), 0.3);
        let mid = exploration_chance(150, 900, 0.3);
        assert!((mid - 0.15).abs() < 1e-12);
        assert_eq!(exploration_chance(300, 900, 0.3), 0.0);
        assert_eq!(exploration_chance(700, 900, 0.3), 0.0);
        assert_eq!(exploration_chance(0, 0, 0.3), 0.0);
    }

    #[test]
    fn gradient_allowance_counts_environment_steps() {
        assert_eq!(gradient_allowance(10, 0, 4), (2, 2));
        assert_eq!(gradient_allowance(2, 2, 4), (1, 0));
        assert_eq!(gradient_allowance(3, 0, 4), (0, 3));
        assert_eq!(gradient_allowance(5, 3, 1), (8, 0));
    }
}
