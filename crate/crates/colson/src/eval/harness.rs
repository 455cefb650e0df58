//! Batch evaluation: fixed-seed episode sets run in parallel, guidance-mode
//! comparisons on identical worlds, and pedestrian-count sweeps.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::CrowdController;
use crate::geom::Vec2;
use crate::sim::{Action, ScenarioKind, ScenarioSpec, SimConfig, SimError};
use crate::util::Fnv1a;

use super::metrics::{discounted_return, smoothness};
use super::policy::{DiffusionPolicy, GuidanceMode, Policy};
use super::report::{EpisodeStats, EvalReport};

/// Offsets the per-episode policy rng stream away from the world seed.
const POLICY_STREAM: u64 = 0x9e3779b97f4a7c15;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("paired modes saw different worlds at seed {seed}")]
    SeedMismatch { seed: u64 },
}

/// The fixed surroundings of an evaluation: world physics, crowd behavior,
/// and the discount used for reported returns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalContext {
    pub sim: SimConfig,
    pub controller: CrowdController,
    pub discount: f64,
}

impl Default for EvalContext {
    fn default() -> Self {
        EvalContext {
            sim: SimConfig::default(),
            controller: CrowdController::default(),
            discount: 0.9,
        }
    }
}

/// Positions of everyone over one episode, for rendering. The robot path has
/// one more entry than there were steps: it starts at the initial pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub seed: u64,
    pub outcome: String,
    pub robot: Vec<[f64; 2]>,
    pub pedestrians: Vec<Vec<[f64; 2]>>,
    /// Per-step rewards; returns are recomputable from these alone.
    pub rewards: Vec<f64>,
    /// Axis-aligned wall rectangles as [min_x, min_y, max_x, max_y].
    pub walls: Vec<[f64; 4]>,
    /// Wall line segments as [x0, y0, x1, y1].
    #[serde(default)]
    pub segments: Vec<[f64; 4]>,
    pub goal: [f64; 2],
}

/// Runs the seeds `base_seed..base_seed+n` and reduces in seed order, so the
/// result is independent of worker scheduling.
fn run_batch(
    policy: &dyn Policy,
    scenario: &ScenarioSpec,
    ctx: &EvalContext,
    n_episodes: usize,
    base_seed: u64,
    capture: bool,
) -> Result<(Vec<EpisodeStats>, Vec<TrajectoryLog>), SimError> {
    assert!(n_episodes >= 1, "an evaluation needs at least one episode");
    let seeds: Vec<u64> = (0..n_episodes as u64).map(|i| base_seed + i).collect();
    let mut runs: Vec<(EpisodeStats, Option<TrajectoryLog>)> = seeds
        .par_iter()
        .map(|&seed| run_episode(policy, scenario, ctx, seed, capture))
        .collect::<Result<_, _>>()?;
    runs.sort_by_key(|(s, _)| s.seed);
    let logs = runs.iter_mut().filter_map(|(_, l)| l.take()).collect();
    Ok((runs.into_iter().map(|(s, _)| s).collect(), logs))
}

fn run_episode(
    policy: &dyn Policy,
    scenario: &ScenarioSpec,
    ctx: &EvalContext,
    seed: u64,
    capture: bool,
) -> Result<(EpisodeStats, Option<TrajectoryLog>), SimError> {
    let mut world = scenario.build(seed, &ctx.sim)?;
    let init_fingerprint = world.fingerprint();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ POLICY_STREAM);

    let mut log = capture.then(|| TrajectoryLog {
        seed,
        outcome: String::new(),
        robot: vec![[world.robot.position.x, world.robot.position.y]],
        pedestrians: world
            .pedestrians
            .iter()
            .map(|p| vec![[p.position.x, p.position.y]])
            .collect(),
        rewards: Vec::new(),
        walls: world
            .obstacles
            .rects
            .iter()
            .map(|r| [r.min.x, r.min.y, r.max.x, r.max.y])
            .collect(),
        segments: world
            .obstacles
            .segments
            .iter()
            .map(|s| [s.a.x, s.a.y, s.b.x, s.b.y])
            .collect(),
        goal: [world.robot.goal.x, world.robot.goal.y],
    });

    let mut prev: Option<Vec2> = None;
    let mut actions: Vec<Vec2> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();
    let outcome = loop {
        let obs = world.observation();
        let normalized = policy.act(&world, &obs, prev, &mut rng);
        prev = Some(normalized);
        let physical = Action::from_normalized(normalized, world.robot.v_pref);
        actions.push(physical.0);
        let result = world.step(physical, &ctx.controller)?;
        rewards.push(result.reward);
        if let Some(log) = log.as_mut() {
            log.robot.push([world.robot.position.x, world.robot.position.y]);
            for (track, p) in log.pedestrians.iter_mut().zip(&world.pedestrians) {
                track.push([p.position.x, p.position.y]);
            }
            log.rewards.push(result.reward);
        }
        if let Some(outcome) = result.outcome {
            break outcome;
        }
    };
    if let Some(log) = log.as_mut() {
        log.outcome = outcome.as_str().to_string();
    }

    let stats = EpisodeStats {
        seed,
        outcome,
        steps: world.steps,
        exec_time: world.time,
        discounted: discounted_return(&rewards, ctx.discount, ctx.sim.dt, world.robot.v_pref),
        undiscounted: rewards.iter().sum(),
        smoothness: (actions.len() >= 2).then(|| smoothness(&actions, 1.0 / ctx.sim.dt)),
        init_fingerprint,
    };
    Ok((stats, log))
}

fn config_fingerprint(
    scenario: &ScenarioSpec,
    ctx: &EvalContext,
    n_episodes: usize,
    base_seed: u64,
) -> u64 {
    let mut h = Fnv1a::new();
    let blob = serde_json::to_string(&(scenario, &ctx.sim, &ctx.controller, ctx.discount))
        .expect("config serializes");
    h.write(blob.as_bytes());
    h.write_u64(n_episodes as u64);
    h.write_u64(base_seed);
    h.finish()
}

/// Evaluates one policy over a fixed seed range and aggregates the metrics.
pub fn evaluate(
    policy: &dyn Policy,
    scenario: &ScenarioSpec,
    ctx: &EvalContext,
    n_episodes: usize,
    base_seed: u64,
) -> Result<EvalReport, SimError> {
    let (stats, _) = run_batch(policy, scenario, ctx, n_episodes, base_seed, false)?;
    Ok(EvalReport::from_stats(&stats, config_fingerprint(scenario, ctx, n_episodes, base_seed)))
}

/// Like `evaluate`, but also returns the full position history of every
/// episode for rendering.
pub fn evaluate_logged(
    policy: &dyn Policy,
    scenario: &ScenarioSpec,
    ctx: &EvalContext,
    n_episodes: usize,
    base_seed: u64,
) -> Result<(EvalReport, Vec<TrajectoryLog>), SimError> {
    let (stats, logs) = run_batch(policy, scenario, ctx, n_episodes, base_seed, true)?;
    let report =
        EvalReport::from_stats(&stats, config_fingerprint(scenario, ctx, n_episodes, base_seed));
    Ok((report, logs))
}

/// Evaluates the same weights under each sampling mode on the identical seed
/// set; episode pairing is checked by fingerprinting the initial worlds.
pub fn compare_guidance(
    policy: &DiffusionPolicy,
    scenario: &ScenarioSpec,
    ctx: &EvalContext,
    modes: &[GuidanceMode],
    n_episodes: usize,
    base_seed: u64,
) -> Result<Vec<(GuidanceMode, EvalReport)>, EvalError> {
    let fingerprint = config_fingerprint(scenario, ctx, n_episodes, base_seed);
    let mut first: Option<Vec<(u64, u64)>> = None;
    let mut out = Vec::with_capacity(modes.len());
    for &mode in modes {
        let view = policy.with_mode(mode);
        let (stats, _) = run_batch(&view, scenario, ctx, n_episodes, base_seed, false)?;
        let prints: Vec<(u64, u64)> =
            stats.iter().map(|s| (s.seed, s.init_fingerprint)).collect();
        match &first {
            None => first = Some(prints),
            Some(reference) => {
                for (a, b) in reference.iter().zip(&prints) {
                    if a != b {
                        return Err(EvalError::SeedMismatch { seed: a.0 });
                    }
                }
            }
        }
        out.push((mode, EvalReport::from_stats(&stats, fingerprint)));
    }
    Ok(out)
}

/// One report per pedestrian count on circle crossings, optionally written
/// as a whitespace-aligned data file ready for plotting.
pub fn sweep_pedestrians(
    policy: &dyn Policy,
    counts: &[usize],
    visible: bool,
    ctx: &EvalContext,
    n_episodes: usize,
    base_seed: u64,
    plot_path: Option<&Path>,
) -> Result<Vec<(usize, EvalReport)>, EvalError> {
    let mut table = Vec::with_capacity(counts.len());
    for &pedestrians in counts {
        let scenario = ScenarioSpec { kind: ScenarioKind::Circle, pedestrians, visible };
        let report = evaluate(policy, &scenario, ctx, n_episodes, base_seed)?;
        table.push((pedestrians, report));
    }
    if let Some(path) = plot_path {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# pedestrians success_rate collision_rate timeout_rate smoothness_e3")?;
        for (count, r) in &table {
            writeln!(
                f,
                "{} {:.6} {:.6} {:.6} {:.6}",
                count,
                r.success_rate,
                r.collision_rate(),
                r.timeout_rate,
                r.smoothness.unwrap_or(0.0),
            )?;
        }
    }
    Ok(table)
}
