//! Static-obstacle pull vectors folded into the reverse process.

use serde::{Deserialize, Serialize};

use ndgrad::Tensor;

use crate::geom::Vec2;
use crate::sim::{Action, ObstacleMap};

use super::sampler::Sampler;
use super::schedule::NoiseSource;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidanceConfig {
    /// Distance under which the full repulsion applies, meters.
    pub safety_distance: f64,
    /// Exponential falloff rate beyond the safety distance, 1/m.
    pub decay_rate: f64,
    /// Repulsion weight near an obstacle.
    pub distance_cost: f64,
    /// Repulsion weight inside an obstacle.
    pub lethal_cost: f64,
    /// Lookahead horizon used to turn a candidate action into a predicted
    /// position, seconds.
    pub dt: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            safety_distance: 0.5,
            decay_rate: 4.0,
            distance_cost: 0.1,
            lethal_cost: 0.5,
            dt: 0.25,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) {
        assert!(self.safety_distance > 0.0, "safety distance must be positive");
        assert!(self.decay_rate > 0.0, "decay rate must be positive");
        assert!(self.distance_cost > 0.0, "distance cost must be positive");
        assert!(
            self.lethal_cost >= self.distance_cost,
            "inside an obstacle must repel at least as hard as near one"
        );
        assert!(self.dt > 0.0, "lookahead must be positive");
    }
}

/// Repulsion away from the nearest obstacle at a predicted position.
/// Inside: weight `lethal_cost`. Within the safety distance: `distance_cost`.
/// Beyond it: `distance_cost` decayed exponentially. Zero when the map is
/// empty. On the boundary (distance exactly zero) the obstacle's outward
/// normal supplies the direction and the near-field weight applies.
pub fn guidance_vector(predicted: Vec2, map: &ObstacleMap, config: &GuidanceConfig) -> Vec2 {
    let Some(q) = map.query(predicted) else {
        return Vec2::ZERO;
    };
    let away = q.away_direction();
    if q.inside {
        return away * config.lethal_cost;
    }
    let d = q.distance();
    if d <= config.safety_distance {
        away * config.distance_cost
    } else {
        away * (config.distance_cost * (config.decay_rate * (config.safety_distance - d)).exp())
    }
}

/// Runs the obstacle-steered sampler for a robot at `position` moving with
/// normalized actions scaled by `v_pref`: each candidate action is projected
/// one lookahead step ahead and the repulsion at that point is folded in.
pub fn sample_obstacle_aware(
    sampler: &Sampler<'_>,
    rows: usize,
    score_fn: &mut dyn FnMut(&Tensor, usize) -> Tensor,
    position: Vec2,
    v_pref: f64,
    map: &ObstacleMap,
    config: &GuidanceConfig,
    noise: &mut dyn NoiseSource,
) -> Tensor {
    let mut pull = |actions: &Tensor| {
        let mut g = Tensor::zeros(actions.rows(), actions.cols());
        for r in 0..actions.rows() {
            let v = Action::from_normalized(
                Vec2 { x: actions.get(r, 0), y: actions.get(r, 1) },
                v_pref,
            );
            let predicted = position + v.0 * config.dt;
            let pull = guidance_vector(predicted, map, config);
            g.set(r, 0, pull.x);
            g.set(r, 1, pull.y);
        }
        g
    };
    sampler.sample_guided(rows, score_fn, &mut pull, noise)
}
