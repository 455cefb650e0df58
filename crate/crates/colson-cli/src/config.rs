//! Sectioned run configuration: TOML files where every key has a default and
//! unknown keys are rejected, plus dotted-path command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use colson::controllers::CrowdController;
use colson::diffusion::{DiffusionSchedule, GuidanceConfig, SamplerConfig, ScoreSign};
use colson::eval::{DiffusionPolicy, EvalContext, GuidanceMode};
use colson::nets::{NetConfig, Nets};
use colson::sim::{ScenarioKind, ScenarioSpec, SimConfig};
use colson::train::{TrainConfig, TrainSetup};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("bad override {expr:?}: {message}")]
    BadSet { expr: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// World shape: scenario choice plus the simulation geometry it runs in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    pub pedestrians: usize,
    pub visible: bool,
    pub dt: f64,
    pub time_limit: f64,
    pub circle_radius: f64,
    pub robot_radius: f64,
    pub robot_v_pref: f64,
    pub ped_radius: f64,
    pub ped_v_pref: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let spec = ScenarioSpec::default();
        let sim = SimConfig::default();
        ScenarioSection {
            kind: spec.kind,
            pedestrians: spec.pedestrians,
            visible: spec.visible,
            dt: sim.dt,
            time_limit: sim.time_limit,
            circle_radius: sim.circle_radius,
            robot_radius: sim.robot_radius,
            robot_v_pref: sim.robot_v_pref,
            ped_radius: sim.ped_radius,
            ped_v_pref: sim.ped_v_pref,
        }
    }
}

impl ScenarioSection {
    pub fn spec(&self) -> ScenarioSpec {
        ScenarioSpec { kind: self.kind, pedestrians: self.pedestrians, visible: self.visible }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            time_limit: self.time_limit,
            circle_radius: self.circle_radius,
            robot_radius: self.robot_radius,
            robot_v_pref: self.robot_v_pref,
            ped_radius: self.ped_radius,
            ped_v_pref: self.ped_v_pref,
        }
    }
}

/// Network dimensions and the denoising schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub gat_hidden: usize,
    pub gat_heads: usize,
    pub mlp_hidden: usize,
    pub tau_embed_dim: usize,
    pub leaky_slope: f64,
    pub pooled_readout: bool,
    pub diffusion_steps: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub score_sign: ScoreSign,
    pub conventional_alpha: bool,
    /// Noising depth for smoothed sampling; 0 means half the chain.
    pub edit_depth: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let net = NetConfig::default();
        ModelSection {
            gat_hidden: net.gat_hidden,
            gat_heads: net.gat_heads,
            mlp_hidden: net.mlp_hidden,
            tau_embed_dim: net.tau_embed_dim,
            leaky_slope: net.leaky_slope,
            pooled_readout: net.pooled_readout,
            diffusion_steps: 100,
            alpha_min: 1e-4,
            alpha_max: 0.02,
            score_sign: ScoreSign::default(),
            conventional_alpha: false,
            edit_depth: 0,
        }
    }
}

impl ModelSection {
    pub fn net(&self) -> NetConfig {
        NetConfig {
            gat_hidden: self.gat_hidden,
            gat_heads: self.gat_heads,
            mlp_hidden: self.mlp_hidden,
            tau_embed_dim: self.tau_embed_dim,
            leaky_slope: self.leaky_slope,
            pooled_readout: self.pooled_readout,
        }
    }

    pub fn schedule(&self) -> DiffusionSchedule {
        DiffusionSchedule::linear_range(self.diffusion_steps, self.alpha_min, self.alpha_max)
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig { sign: self.score_sign, conventional_alpha: self.conventional_alpha }
    }

    pub fn effective_edit_depth(&self) -> usize {
        if self.edit_depth == 0 {
            (self.diffusion_steps / 2).max(1)
        } else {
            self.edit_depth
        }
    }
}

/// Evaluation batch shape and reporting choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
    pub base_seed: u64,
    pub discount: f64,
    pub mode: GuidanceMode,
    /// Pedestrian counts for sweeps.
    pub counts: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            episodes: 500,
            base_seed: 0,
            discount: 0.9,
            mode: GuidanceMode::Plain,
            counts: vec![5, 10, 15, 20],
        }
    }
}

/// Where artifacts land and which weights to start from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub run_dir: PathBuf,
    /// Weights file: evaluated by eval-like commands, the starting point for
    /// resumed training.
    pub checkpoint: Option<PathBuf>,
    /// Worker cap for parallel evaluation; 0 uses every core.
    pub jobs: usize,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection { run_dir: PathBuf::from("run"), checkpoint: None, jobs: 0 }
    }
}

/// Whole-run configuration. The file form is TOML whose tables mirror the
/// fields here; any key not listed is an error, never silently ignored.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioSection,
    pub controller: CrowdController,
    pub model: ModelSection,
    pub trainer: TrainConfig,
    pub guidance: GuidanceConfig,
    pub eval: EvalSection,
    pub io: IoSection,
}

impl RunConfig {
    pub fn train_setup(&self) -> TrainSetup {
        TrainSetup {
            scenario: self.scenario.spec(),
            sim: self.scenario.sim(),
            controller: self.controller.clone(),
            net: self.model.net(),
            sampler: self.model.sampler(),
            diffusion_steps: self.model.diffusion_steps,
            alpha_min: self.model.alpha_min,
            alpha_max: self.model.alpha_max,
            trainer: self.trainer,
            seed: self.seed,
            init_checkpoint: self.io.checkpoint.clone(),
        }
    }

    pub fn eval_context(&self) -> EvalContext {
        EvalContext {
            sim: self.scenario.sim(),
            controller: self.controller.clone(),
            discount: self.eval.discount,
        }
    }

    /// Fresh diffusion policy shaped by the model section; weights come from
    /// a checkpoint, never from here.
    pub fn diffusion_policy(&self) -> DiffusionPolicy {
        DiffusionPolicy {
            nets: Nets::new(&self.model.net(), self.seed),
            schedule: self.model.schedule(),
            sampler: self.model.sampler(),
            mode: self.eval.mode,
            edit_depth: self.model.effective_edit_depth(),
            guidance: self.guidance,
        }
    }

    /// The checks the trainer would assert on, surfaced as config errors.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.trainer;
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if t.batch_size < 1 {
            return fail("trainer.batch_size must be at least 1");
        }
        if t.buffer_capacity < t.batch_size {
            return fail("trainer.buffer_capacity smaller than trainer.batch_size");
        }
        if !(0.0..=1.0).contains(&t.discount) {
            return fail("trainer.discount outside [0, 1]");
        }
        if !(t.polyak_rate > 0.0 && t.polyak_rate <= 1.0) {
            return fail("trainer.polyak_rate outside (0, 1]");
        }
        if t.score_scale < 0.0 {
            return fail("trainer.score_scale must be nonnegative");
        }
        if t.actor_lr <= 0.0 || t.critic_lr <= 0.0 {
            return fail("trainer learning rates must be positive");
        }
        if t.steps_per_gradient < 1 {
            return fail("trainer.steps_per_gradient must be at least 1");
        }
        if !(0.0..=1.0).contains(&t.exploration_start) {
            return fail("trainer.exploration_start outside [0, 1]");
        }
        let m = &self.model;
        if m.diffusion_steps < 1 {
            return fail("model.diffusion_steps must be at least 1");
        }
        if m.edit_depth > m.diffusion_steps {
            return fail("model.edit_depth deeper than the denoising chain");
        }
        if !(m.alpha_min > 0.0 && m.alpha_min < 1.0 && m.alpha_max > 0.0 && m.alpha_max < 1.0) {
            return fail("model alpha endpoints must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.eval.discount) {
            return fail("eval.discount outside [0, 1]");
        }
        if self.scenario.dt <= 0.0 || self.scenario.time_limit <= 0.0 {
            return fail("scenario.dt and scenario.time_limit must be positive");
        }
        Ok(())
    }
}

/// Loads a config file (or the defaults when `path` is None), then applies
/// `section.key=value` overrides before type checking.
pub fn load_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
            text.parse::<toml::Table>().map_err(|e| ConfigError::Parse {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?
        }
        None => toml::Table::new(),
    };
    for expr in sets {
        apply_set(&mut table, expr)?;
    }
    let shown = path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<defaults>"));
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| ConfigError::Parse { path: shown, message: e.to_string() })?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_set(table: &mut toml::Table, expr: &str) -> Result<(), ConfigError> {
    let bad = |message: &str| ConfigError::BadSet {
        expr: expr.to_string(),
        message: message.to_string(),
    };
    let (key_path, raw) = expr.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let segments: Vec<&str> = key_path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(bad("empty key segment"));
    }
    let mut current = table;
    for segment in &segments[..segments.len() - 1] {
        current = current
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| bad("path crosses a non-section value"))?;
    }
    current.insert(segments[segments.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

/// Overrides parse with TOML syntax; anything that does not (bare words like
/// `wall`) is taken as a string.
fn parse_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("probe key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
