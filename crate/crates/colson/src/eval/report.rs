//! Aggregated evaluation results and their table rendering.

use serde::{Deserialize, Serialize};

use crate::sim::OutcomeKind;

/// Everything one evaluation batch produced, in the units the tables use:
/// rates in percent, times in seconds, smoothness scaled by 10³.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub success_rate: f64,
    pub pedestrian_collision_rate: f64,
    pub wall_collision_rate: f64,
    pub timeout_rate: f64,
    /// Seconds to reach the goal, averaged over successful episodes only;
    /// absent when nothing succeeded.
    pub mean_exec_time: Option<f64>,
    /// Time-scaled discounted return averaged over all episodes.
    pub mean_return: f64,
    pub mean_undiscounted_return: f64,
    /// Mean spectral roughness ×10³; absent when every episode was too short
    /// to measure.
    pub smoothness: Option<f64>,
    pub config_fingerprint: u64,
}

/// Per-episode numbers the report is reduced from.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub seed: u64,
    pub outcome: OutcomeKind,
    pub steps: u32,
    /// Simulated seconds until termination.
    pub exec_time: f64,
    pub discounted: f64,
    pub undiscounted: f64,
    /// Absent for episodes shorter than two actions.
    pub smoothness: Option<f64>,
    pub init_fingerprint: u64,
}

impl EvalReport {
    pub fn from_stats(stats: &[EpisodeStats], config_fingerprint: u64) -> EvalReport {
        assert!(!stats.is_empty(), "a report needs at least one episode");
        let n = stats.len() as f64;
        let count =
            |k: OutcomeKind| stats.iter().filter(|s| s.outcome == k).count() as f64 / n * 100.0;

        let successes: Vec<&EpisodeStats> =
            stats.iter().filter(|s| s.outcome == OutcomeKind::Success).collect();
        let mean_exec_time = if successes.is_empty() {
            None
        } else {
            Some(successes.iter().map(|s| s.exec_time).sum::<f64>() / successes.len() as f64)
        };
        let rough: Vec<f64> = stats.iter().filter_map(|s| s.smoothness).collect();
        let smoothness = if rough.is_empty() {
            None
        } else {
            Some(rough.iter().sum::<f64>() / rough.len() as f64 * 1e3)
        };

        EvalReport {
            episodes: stats.len(),
            success_rate: count(OutcomeKind::Success),
            pedestrian_collision_rate: count(OutcomeKind::PedestrianCollision),
            wall_collision_rate: count(OutcomeKind::WallCollision),
            timeout_rate: count(OutcomeKind::Timeout),
            mean_exec_time,
            mean_return: stats.iter().map(|s| s.discounted).sum::<f64>() / n,
            mean_undiscounted_return: stats.iter().map(|s| s.undiscounted).sum::<f64>() / n,
            smoothness,
            config_fingerprint,
        }
    }

    /// Pedestrian and wall collisions together.
    pub fn collision_rate(&self) -> f64 {
        self.pedestrian_collision_rate + self.wall_collision_rate
    }

    /// The four outcome rates; they partition the episodes.
    pub fn rate_sum(&self) -> f64 {
        self.success_rate + self.pedestrian_collision_rate + self.wall_collision_rate
            + self.timeout_rate
    }
}

/// Fixed-width table of labeled reports, one row each, mirroring the layout
/// of the result tables this tool exists to reproduce.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8} {:>8} {:>10} {:>9}\n",
        "method", "success%", "col-ped%", "col-wall%", "timeout%", "exec(s)", "return",
        "ret-flat", "smooth(e3)", "episodes"
    ));
    let opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.3}"),
        None => "-".to_string(),
    };
    for (label, r) in rows {
        out.push_str(&format!(
            "{:<16} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>8} {:>8.4} {:>8.4} {:>10} {:>9}\n",
            label,
            r.success_rate,
            r.pedestrian_collision_rate,
            r.wall_collision_rate,
            r.timeout_rate,
            opt(r.mean_exec_time),
            r.mean_return,
            r.mean_undiscounted_return,
            opt(r.smoothness),
            r.episodes,
        ));
    }
    out
}
