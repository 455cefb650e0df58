//! Reverse-process samplers: plain, partial-renoise smoothing, and
//! obstacle-steered.

use serde::{Deserialize, Serialize};

use ndgrad::Tensor;

use super::schedule::{DiffusionSchedule, NoiseSource};
use crate::geom::Vec2;

/// Whether the score term is subtracted from or added to the rescaled state
/// during a reverse step. Training aligns the score head with the ascent
/// direction of the critic, so `Add` is what actually improves actions;
/// `Subtract` is kept selectable for comparison runs.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSign {
    Subtract,
    #[default]
    Add,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub sign: ScoreSign,
    /// Weight the score by α/√(1−α) instead of √α/√(1−α).
    pub conventional_alpha: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { sign: ScoreSign::Add, conventional_alpha: false }
    }
}

/// One reverse step: rescale the state by 1/√(1−α) and fold in the score.
pub fn denoise_step(x: Vec2, psi: Vec2, alpha: f64, config: SamplerConfig) -> Vec2 {
    let root = (1.0 - alpha).sqrt();
    let num = if config.conventional_alpha { alpha } else { alpha.sqrt() };
    let coef = num / root;
    match config.sign {
        ScoreSign::Subtract => x / root - psi * coef,
        ScoreSign::Add => x / root + psi * coef,
    }
}

/// Runs the reverse chain over batches of 2-d actions.
///
/// Internally the state is carried divided by the cumulative signal scale
/// Π√(1−α): one reverse step then becomes `state ± (√α_τ / Π_{k≤τ}√(1−α_k))·Ψ`,
/// which is the written recurrence with the per-step 1/√(1−α) rescale
/// telescoped into the coefficient. Same algebra, but when noise and score
/// are both zero the state is provably untouched instead of accumulating a
/// multiply/divide rounding pair per step.
pub struct Sampler<'a> {
    pub schedule: &'a DiffusionSchedule,
    pub config: SamplerConfig,
}

impl Sampler<'_> {
    pub fn new(schedule: &DiffusionSchedule, config: SamplerConfig) -> Sampler<'_> {
        Sampler { schedule, config }
    }

    fn score_coef(&self, alpha: f64) -> f64 {
        let num = if self.config.conventional_alpha { alpha } else { alpha.sqrt() };
        match self.config.sign {
            ScoreSign::Subtract => -num,
            ScoreSign::Add => num,
        }
    }

    /// Reverse loop from `from` down to 1 on the descaled state, with an
    /// optional extra pull applied after each score step.
    fn run_reverse(
        &self,
        state: &mut Tensor,
        from: usize,
        score_fn: &mut dyn FnMut(&Tensor, usize) -> Tensor,
        mut pull_fn: Option<&mut dyn FnMut(&Tensor) -> Tensor>,
    ) {
        let rows = state.rows();
        let cols = state.cols();
        for tau in (1..=from).rev() {
            let scale = self.schedule.signal_scale(tau);
            // The score net sees the state at its true magnitude.
            let mut physical = state.clone();
            for v in physical.data_mut() {
                *v *= scale;
            }
            let psi = score_fn(&physical, tau);
            assert_eq!(psi.rows(), rows);
            assert_eq!(psi.cols(), cols);
            let coef = self.score_coef(self.schedule.alpha(tau)) / scale;
            for r in 0..rows {
                for c in 0..cols {
                    let v = state.get(r, c) + coef * psi.get(r, c);
                    state.set(r, c, v);
                }
            }
            if let Some(pull) = pull_fn.as_deref_mut() {
                let g = pull(&physical);
                assert_eq!(g.rows(), rows);
                assert_eq!(g.cols(), cols);
                let inv = 1.0 / self.schedule.signal_scale(tau - 1);
                for r in 0..rows {
                    for c in 0..cols {
                        let v = state.get(r, c) + inv * g.get(r, c);
                        state.set(r, c, v);
                    }
                }
            }
        }
    }

    fn clip_unit_box(state: &mut Tensor) {
        for v in state.data_mut() {
            *v = v.clamp(-1.0, 1.0);
        }
    }

    /// Pure noise in, denoised actions out, clipped to the unit box.
    pub fn sample(
        &self,
        rows: usize,
        score_fn: &mut dyn FnMut(&Tensor, usize) -> Tensor,
        noise: &mut dyn NoiseSource,
    ) -> Tensor {
        let t = self.schedule.len();
        let mut state = Tensor::zeros(rows, 2);
        noise.fill_standard(state.data_mut());
        if t > 0 {
            // x_T expressed in descaled coordinates.
            let inv = 1.0 / self.schedule.signal_scale(t);
            for v in state.data_mut() {
                *v *= inv;
            }
            self.run_reverse(&mut state, t, score_fn, None);
        }
        Self::clip_unit_box(&mut state);
        state
    }

    /// Partially renoises `prev` for `t_edit` steps, then denoises back.
    /// Output stays correlated with `prev`; with zero noise and a zero score
    /// it is bit-for-bit `prev`.
    pub fn sample_smoothed(
        &self,
        prev: &Tensor,
        t_edit: usize,
        score_fn: &mut dyn FnMut(&Tensor, usize) -> Tensor,
        noise: &mut dyn NoiseSource,
    ) -> Tensor {
        assert!(t_edit <= self.schedule.len(), "edit depth past schedule end");
        let mut state = prev.clone();
        // Forward noising in descaled coordinates: the √(1−α) shrink factors
        // cancel against the final rescale, so only noise moves the state.
        let cols = state.cols();
        let mut z = vec![0.0; cols];
        for r in 0..state.rows() {
            for tau in 1..=t_edit {
                let coef = self.schedule.alpha(tau).sqrt() / self.schedule.signal_scale(tau);
                noise.fill_standard(&mut z);
                for c in 0..cols {
                    let v = state.get(r, c) + coef * z[c];
                    state.set(r, c, v);
                }
            }
        }
        self.run_reverse(&mut state, t_edit, score_fn, None);
        Self::clip_unit_box(&mut state);
        state
    }

    /// Like `sample`, but after every score step adds `pull_fn`'s vector to
    /// the state. The pull closure receives the current actions at true
    /// magnitude; returning zeros reproduces `sample` exactly.
    pub fn sample_guided(
        &self,
        rows: usize,
        score_fn: &mut dyn FnMut(&Tensor, usize) -> Tensor,
        pull_fn: &mut dyn FnMut(&Tensor) -> Tensor,
        noise: &mut dyn NoiseSource,
    ) -> Tensor {
        let t = self.schedule.len();
        let mut state = Tensor::zeros(rows, 2);
        noise.fill_standard(state.data_mut());
        if t > 0 {
            let inv = 1.0 / self.schedule.signal_scale(t);
            for v in state.data_mut() {
                *v *= inv;
            }
            self.run_reverse(&mut state, t, score_fn, Some(pull_fn));
        }
        Self::clip_unit_box(&mut state);
        state
    }
}
