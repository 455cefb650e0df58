//! One function per subcommand. Each builds a configuration from file plus
//! flags, runs the library, and writes artifacts under the run directory.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use colson::eval::{
    compare_guidance, evaluate_logged, render_table, sweep_pedestrians, DiffusionPolicy,
    EvalReport, GuidanceMode, OrcaPolicy, Policy, RandomPolicy, StraightToGoal, TrajectoryLog,
};
use colson::sim::ScenarioKind;

use crate::config::{load_config, RunConfig};
use crate::svg;
use crate::{Args, CliError};

fn runtime(context: &str, e: impl Display) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}

fn base_config(a: &Args) -> Result<RunConfig, CliError> {
    let path = a.value("config").map(Path::new);
    let mut cfg =
        load_config(path, &a.values_of("set")).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(out) = a.value("out") {
        cfg.io.run_dir = PathBuf::from(out);
    }
    if let Some(jobs) = a.parsed::<usize>("jobs")? {
        cfg.io.jobs = jobs;
    }
    Ok(cfg)
}

/// `--seed` here moves the first episode seed, not the model seed; training
/// owns that one.
fn apply_eval_flags(cfg: &mut RunConfig, a: &Args) -> Result<(), CliError> {
    if let Some(seed) = a.parsed::<u64>("seed")? {
        cfg.eval.base_seed = seed;
    }
    if let Some(n) = a.parsed::<usize>("episodes")? {
        cfg.eval.episodes = n;
    }
    if let Some(peds) = a.parsed::<usize>("peds")? {
        cfg.scenario.pedestrians = peds;
    }
    if let Some(kind) = a.value("scenario") {
        cfg.scenario.kind = match kind {
            "circle" => ScenarioKind::Circle,
            "wall" => ScenarioKind::Wall,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown scenario {other:?} (circle, wall)"
                )))
            }
        };
    }
    if a.switch("visible") && a.switch("invisible") {
        return Err(CliError::Usage("--visible and --invisible exclude each other".into()));
    }
    if a.switch("visible") {
        cfg.scenario.visible = true;
    }
    if a.switch("invisible") {
        cfg.scenario.visible = false;
    }
    if let Some(ck) = a.value("checkpoint") {
        cfg.io.checkpoint = Some(PathBuf::from(ck));
    }
    if let Some(mode) = a.value("mode") {
        cfg.eval.mode = parse_mode(mode)?;
    }
    Ok(())
}

fn parse_mode(s: &str) -> Result<GuidanceMode, CliError> {
    match s {
        "plain" => Ok(GuidanceMode::Plain),
        "smooth" | "smoothed" => Ok(GuidanceMode::Smoothed),
        "obstacle" | "obstacle_guided" => Ok(GuidanceMode::ObstacleGuided),
        other => Err(CliError::Usage(format!("unknown mode {other:?} (plain, smooth, obstacle)"))),
    }
}

fn require_episodes(cfg: &RunConfig) -> Result<usize, CliError> {
    if cfg.eval.episodes == 0 {
        return Err(CliError::Usage("at least one episode is required".into()));
    }
    Ok(cfg.eval.episodes)
}

fn init_pool(jobs: usize) {
    if jobs > 0 {
        // Ignored when a pool already exists; fresh processes get the cap.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

/// Creates run/logs and run/reports, snapshots the effective configuration.
fn prepare_run_dir(cfg: &RunConfig) -> Result<(PathBuf, PathBuf, PathBuf), CliError> {
    let run = cfg.io.run_dir.clone();
    let logs = run.join("logs");
    let reports = run.join("reports");
    for dir in [&run, &logs, &reports] {
        fs::create_dir_all(dir).map_err(|e| runtime(&format!("creating {}", dir.display()), e))?;
    }
    let text = toml::to_string_pretty(cfg).map_err(|e| runtime("writing config snapshot", e))?;
    fs::write(run.join("config.toml"), text)
        .map_err(|e| runtime("writing config snapshot", e))?;
    Ok((run, logs, reports))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| runtime(&format!("encoding {}", path.display()), e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| runtime(&format!("writing {}", path.display()), e))
}

fn write_jsonl(path: &Path, logs: &[TrajectoryLog]) -> Result<(), CliError> {
    let mut text = String::new();
    for log in logs {
        let line = serde_json::to_string(log)
            .map_err(|e| runtime(&format!("encoding {}", path.display()), e))?;
        text.push_str(&line);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| runtime(&format!("writing {}", path.display()), e))
}

fn load_diffusion(cfg: &RunConfig) -> Result<DiffusionPolicy, CliError> {
    let Some(path) = cfg.io.checkpoint.as_ref() else {
        return Err(CliError::Usage(
            "the diffusion policy needs weights: pass --checkpoint or set io.checkpoint".into(),
        ));
    };
    let mut policy = cfg.diffusion_policy();
    policy
        .load_checkpoint(path)
        .map_err(|e| runtime(&format!("loading checkpoint {}", path.display()), e))?;
    Ok(policy)
}

/// Picks the policy by name; without a name, saved weights mean diffusion and
/// their absence means the reciprocal planner.
fn build_policy(cfg: &RunConfig, a: &Args) -> Result<(String, Box<dyn Policy>), CliError> {
    let fallback = if cfg.io.checkpoint.is_some() { "diffusion" } else { "orca" };
    let name = a.value("policy").unwrap_or(fallback);
    match name {
        "orca" => Ok(("orca".to_string(), Box::new(OrcaPolicy::default()))),
        "straight" => Ok(("straight".to_string(), Box::new(StraightToGoal))),
        "random" => Ok(("random".to_string(), Box::new(RandomPolicy))),
        "diffusion" => {
            let policy = load_diffusion(cfg)?;
            let label = format!("diffusion/{}", policy.mode.as_str());
            Ok((label, Box::new(policy)))
        }
        other => Err(CliError::Usage(format!(
            "unknown policy {other:?} (orca, straight, random, diffusion)"
        ))),
    }
}

pub(crate) fn train(a: &Args) -> Result<(), CliError> {
    let mut cfg = base_config(a)?;
    if let Some(seed) = a.parsed::<u64>("seed")? {
        cfg.seed = seed;
    }
    if let Some(n) = a.parsed::<usize>("episodes")? {
        cfg.trainer.episodes = n;
    }
    if let Some(ck) = a.value("checkpoint") {
        cfg.io.checkpoint = Some(PathBuf::from(ck));
    }
    init_pool(cfg.io.jobs);
    let (run, _, reports) = prepare_run_dir(&cfg)?;
    let setup = cfg.train_setup();
    let report =
        colson::train::train(&setup, &run).map_err(|e| runtime("training failed", e))?;
    write_json(&reports.join("train.json"), &report)?;
    println!(
        "trained {} episodes ({} warm transitions, buffer {})",
        report.episodes, report.warm_transitions, report.buffer_len
    );
    if let Some(rate) = report.final_success_rate {
        println!("internal success rate: {:.1}%", rate * 100.0);
    }
    println!("metrics: {}", report.metrics_path.display());
    println!("checkpoints: {}", run.join("checkpoints").display());
    Ok(())
}

pub(crate) fn collect(a: &Args) -> Result<(), CliError> {
    let mut cfg = base_config(a)?;
    apply_eval_flags(&mut cfg, a)?;
    // Demonstrations only make sense when the crowd reacts to the robot.
    cfg.scenario.visible = true;
    let episodes = require_episodes(&cfg)?;
    init_pool(cfg.io.jobs);
    let (_, logs_dir, _) = prepare_run_dir(&cfg)?;
    let policy = OrcaPolicy::default();
    let (_, logs) = evaluate_logged(
        &policy,
        &cfg.scenario.spec(),
        &cfg.eval_context(),
        episodes,
        cfg.eval.base_seed,
    )
    .map_err(|e| runtime("collection failed", e))?;
    let path = logs_dir.join("demos.jsonl");
    write_jsonl(&path, &logs)?;
    let successes = logs.iter().filter(|l| l.outcome == "success").count();
    println!("collected {episodes} demonstrations ({successes} successes)");
    println!("demos: {}", path.display());
    Ok(())
}

pub(crate) fn eval(a: &Args) -> Result<(), CliError> {
    let mut cfg = base_config(a)?;
    apply_eval_flags(&mut cfg, a)?;
    let episodes = require_episodes(&cfg)?;
    init_pool(cfg.io.jobs);
    let (_, logs_dir, reports) = prepare_run_dir(&cfg)?;
    let (label, policy) = build_policy(&cfg, a)?;
    let (report, logs) = evaluate_logged(
        policy.as_ref(),
        &cfg.scenario.spec(),
        &cfg.eval_context(),
        episodes,
        cfg.eval.base_seed,
    )
    .map_err(|e| runtime("evaluation failed", e))?;
    write_jsonl(&logs_dir.join("trajectories.jsonl"), &logs)?;
    write_json(&reports.join("eval.json"), &report)?;
    let table = render_table(&[(label.as_str(), &report)]);
    fs::write(reports.join("eval.txt"), &table)
        .map_err(|e| runtime("writing eval.txt", e))?;
    print!("{table}");
    Ok(())
}

pub(crate) fn compare(a: &Args) -> Result<(), CliError> {
    let mut cfg = base_config(a)?;
    apply_eval_flags(&mut cfg, a)?;
    let episodes = require_episodes(&cfg)?;
    let modes: Vec<GuidanceMode> = match a.value("modes") {
        Some(raw) => raw.split(',').map(|s| parse_mode(s.trim())).collect::<Result<_, _>>()?,
        None => {
            vec![GuidanceMode::Plain, GuidanceMode::Smoothed, GuidanceMode::ObstacleGuided]
        }
    };
    init_pool(cfg.io.jobs);
    let (_, _, reports) = prepare_run_dir(&cfg)?;
    let policy = load_diffusion(&cfg)?;
    let table = compare_guidance(
        &policy,
        &cfg.scenario.spec(),
        &cfg.eval_context(),
        &modes,
        episodes,
        cfg.eval.base_seed,
    )
    .map_err(|e| runtime("comparison failed", e))?;
    let rows: Vec<serde_json::Value> = table
        .iter()
        .map(|(mode, report)| serde_json::json!({ "mode": mode.as_str(), "report": report }))
        .collect();
    write_json(&reports.join("compare.json"), &rows)?;
    let labeled: Vec<(&str, &EvalReport)> =
        table.iter().map(|(mode, report)| (mode.as_str(), report)).collect();
    let text = render_table(&labeled);
    fs::write(reports.join("compare.txt"), &text)
        .map_err(|e| runtime("writing compare.txt", e))?;
    print!("{text}");
    Ok(())
}

pub(crate) fn rollout(a: &Args) -> Result<(), CliError> {
    let mut cfg = base_config(a)?;
    cfg.eval.episodes = 1;
    apply_eval_flags(&mut cfg, a)?;
    let episodes = require_episodes(&cfg)?;
    init_pool(cfg.io.jobs);
    let (_, logs_dir, reports) = prepare_run_dir(&cfg)?;
    let (_, policy) = build_policy(&cfg, a)?;
    let (_, logs) = evaluate_logged(
        policy.as_ref(),
        &cfg.scenario.spec(),
        &cfg.eval_context(),
        episodes,
        cfg.eval.base_seed,
    )
    .map_err(|e| runtime("rollout failed", e))?;
    write_jsonl(&logs_dir.join("trajectories.jsonl"), &logs)?;
    let picture = reports.join("rollout.svg");
    fs::write(&picture, svg::render_trajectories(&logs))
        .map_err(|e| runtime("writing rollout.svg", e))?;
    for log in &logs {
        println!("seed {}: {} after {} steps", log.seed, log.outcome, log.robot.len() - 1);
    }
    println!("picture: {}", picture.display());
    Ok(())
}

pub(crate) fn sweep(a: &Args) -> Result<(), CliError> {
    let mut cfg = base_config(a)?;
    apply_eval_flags(&mut cfg, a)?;
    if let Some(raw) = a.value("counts") {
        cfg.eval.counts = raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| CliError::Usage(format!("bad count {s:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
    }
    if cfg.eval.counts.is_empty() {
        return Err(CliError::Usage("sweep needs at least one pedestrian count".into()));
    }
    let episodes = require_episodes(&cfg)?;
    init_pool(cfg.io.jobs);
    let (_, _, reports) = prepare_run_dir(&cfg)?;
    let (label, policy) = build_policy(&cfg, a)?;
    let tsv = reports.join("sweep.tsv");
    let table = sweep_pedestrians(
        policy.as_ref(),
        &cfg.eval.counts,
        cfg.scenario.visible,
        &cfg.eval_context(),
        episodes,
        cfg.eval.base_seed,
        Some(&tsv),
    )
    .map_err(|e| runtime("sweep failed", e))?;
    let picture = reports.join("sweep.svg");
    fs::write(&picture, svg::render_sweep(&table))
        .map_err(|e| runtime("writing sweep.svg", e))?;
    let names: Vec<String> =
        table.iter().map(|(count, _)| format!("{label} n={count}")).collect();
    let rows: Vec<(&str, &EvalReport)> = names
        .iter()
        .zip(table.iter())
        .map(|(name, (_, report))| (name.as_str(), report))
        .collect();
    print!("{}", render_table(&rows));
    println!("table: {}", tsv.display());
    println!("picture: {}", picture.display());
    Ok(())
}

pub(crate) fn plot(a: &Args) -> Result<(), CliError> {
    let log_path = a
        .value("log")
        .ok_or_else(|| CliError::Usage("plot needs --log <trajectories.jsonl>".into()))?;
    let text = fs::read_to_string(log_path)
        .map_err(|e| runtime(&format!("reading {log_path}"), e))?;
    let mut logs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let log: TrajectoryLog = serde_json::from_str(line)
            .map_err(|e| CliError::Usage(format!("{log_path}:{}: {e}", i + 1)))?;
        logs.push(log);
    }
    if logs.is_empty() {
        return Err(CliError::Usage(format!("{log_path} holds no trajectories")));
    }
    let out = match a.value("out") {
        Some(p) => PathBuf::from(p),
        None => Path::new(log_path).with_extension("svg"),
    };
    fs::write(&out, svg::render_trajectories(&logs))
        .map_err(|e| runtime(&format!("writing {}", out.display()), e))?;
    println!("wrote {} ({} trajectories)", out.display(), logs.len());
    Ok(())
}
