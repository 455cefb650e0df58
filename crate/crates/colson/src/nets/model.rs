//! The full parameter bundle: an actor (encoder + score head), twin critics
//! (each with its own encoder), and frozen target copies of both critics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use ndgrad::{NdError, Tape, Tensor, Var};

use super::encoder::{encode_plain, encode_tape, register_encoder, EncIdx};
use super::graph::BatchedGraphs;
use super::mlp::{mlp_plain, mlp_tape, register_mlp, MlpIdx};
use super::params::ParamSet;
use super::NetConfig;

const ACTION_DIM: usize = 2;

/// Sinusoidal position features for denoising step indices, one row per
/// entry of `taus`. Steps count from 1 to `t_total` inclusive.
pub fn tau_embedding(taus: &[usize], t_total: usize, dim: usize) -> Tensor {
    assert!(dim % 2 == 0, "embedding width must be even");
    for &tau in taus {
        assert!(
            (1..=t_total).contains(&tau),
            "step index {tau} outside 1..={t_total}"
        );
    }
    Tensor::from_fn(taus.len(), dim, |r, c| {
        let i = (c / 2) as f64;
        let freq = 1.0 / 10000f64.powf(2.0 * i / dim as f64);
        let angle = taus[r] as f64 * freq;
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

#[derive(Clone, Debug)]
pub struct Nets {
    pub cfg: NetConfig,
    pub params: ParamSet,
    pub actor_enc: EncIdx,
    pub actor_score: MlpIdx,
    pub critic_enc: [EncIdx; 2],
    pub critic_q: [MlpIdx; 2],
    pub target_enc: [EncIdx; 2],
    pub target_q: [MlpIdx; 2],
}

impl Nets {
    pub fn new(cfg: &NetConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let h = cfg.gat_hidden;
        let m = cfg.mlp_hidden;
        let score_in = h + ACTION_DIM + cfg.tau_embed_dim;
        let q_in = h + ACTION_DIM;

        let actor_enc = register_encoder(&mut params, "actor.enc.", cfg, &mut rng);
        let actor_score =
            register_mlp(&mut params, "actor.score.", &[score_in, m, m, ACTION_DIM], true, &mut rng);

        let critic_enc = [
            register_encoder(&mut params, "critic1.enc.", cfg, &mut rng),
            register_encoder(&mut params, "critic2.enc.", cfg, &mut rng),
        ];
        let critic_q = [
            register_mlp(&mut params, "critic1.q.", &[q_in, m, m, 1], false, &mut rng),
            register_mlp(&mut params, "critic2.q.", &[q_in, m, m, 1], false, &mut rng),
        ];
        let target_enc = [
            register_encoder(&mut params, "target1.enc.", cfg, &mut rng),
            register_encoder(&mut params, "target2.enc.", cfg, &mut rng),
        ];
        let target_q = [
            register_mlp(&mut params, "target1.q.", &[q_in, m, m, 1], false, &mut rng),
            register_mlp(&mut params, "target2.q.", &[q_in, m, m, 1], false, &mut rng),
        ];
        // Targets start as exact copies of the critics they track.
        params.copy_namespace("critic1.", "target1.");
        params.copy_namespace("critic2.", "target2.");

        Nets {
            cfg: *cfg,
            params,
            actor_enc,
            actor_score,
            critic_enc,
            critic_q,
            target_enc,
            target_q,
        }
    }

    /// Scene feature from the actor's encoder, one row per graph.
    pub fn encode_actor(&self, g: &BatchedGraphs) -> Tensor {
        encode_plain(&self.params, &self.actor_enc, &self.cfg, g).expect("actor encoder shapes")
    }

    /// Score head on precomputed scene features. `x` carries one normalized
    /// action per row; `taus` gives each row's denoising step.
    pub fn score_plain(&self, h: &Tensor, x: &Tensor, taus: &[usize], t_total: usize) -> Tensor {
        assert_eq!(h.rows(), x.rows());
        assert_eq!(x.rows(), taus.len());
        let te = tau_embedding(taus, t_total, self.cfg.tau_embed_dim);
        let input = hstack(&[h, x, &te]);
        mlp_plain(&self.params, &self.actor_score, &input).expect("score head shapes")
    }

    /// Critic value for each (graph, action) row through the critic's own
    /// encoder; `target` reads the frozen copy.
    pub fn q_plain(&self, g: &BatchedGraphs, actions: &Tensor, which: usize, target: bool) -> Tensor {
        let (enc, head) = self.pick_critic(which, target);
        let h = encode_plain(&self.params, enc, &self.cfg, g).expect("critic encoder shapes");
        let input = hstack(&[&h, actions]);
        mlp_plain(&self.params, head, &input).expect("critic head shapes")
    }

    pub fn min_q_plain(&self, g: &BatchedGraphs, actions: &Tensor, target: bool) -> Tensor {
        let q1 = self.q_plain(g, actions, 1, target);
        let q2 = self.q_plain(g, actions, 2, target);
        let mut out = q1.clone();
        for (o, b) in out.data_mut().iter_mut().zip(q2.data()) {
            if *b < *o {
                *o = *b;
            }
        }
        out
    }

    fn pick_critic(&self, which: usize, target: bool) -> (&EncIdx, &MlpIdx) {
        assert!(which == 1 || which == 2, "critic index is 1 or 2");
        let i = which - 1;
        if target {
            (&self.target_enc[i], &self.target_q[i])
        } else {
            (&self.critic_enc[i], &self.critic_q[i])
        }
    }

    /// Differentiable actor forward: encoder then score head.
    pub fn score_tape(
        &self,
        tape: &mut Tape,
        leaves: &[Var],
        g: &BatchedGraphs,
        x: Var,
        taus: &[usize],
        t_total: usize,
    ) -> Result<Var, NdError> {
        let h = encode_tape(tape, leaves, &self.actor_enc, &self.cfg, g)?;
        let te = tape.leaf(tau_embedding(taus, t_total, self.cfg.tau_embed_dim));
        let input = tape.concat_cols(&[h, x, te])?;
        mlp_tape(tape, leaves, &self.actor_score, input)
    }

    /// Differentiable critic forward on the main (never target) parameters.
    pub fn q_tape(
        &self,
        tape: &mut Tape,
        leaves: &[Var],
        g: &BatchedGraphs,
        actions: Var,
        which: usize,
    ) -> Result<Var, NdError> {
        let (enc, head) = self.pick_critic(which, false);
        let h = encode_tape(tape, leaves, enc, &self.cfg, g)?;
        let input = tape.concat_cols(&[h, actions])?;
        mlp_tape(tape, leaves, head, input)
    }

    /// Nudges both target critics toward their mains.
    pub fn polyak(&mut self, rho: f64) {
        self.params.polyak("critic1.", "target1.", rho);
        self.params.polyak("critic2.", "target2.", rho);
    }

    pub fn save(&self, path: &Path) -> Result<(), NdError> {
        self.params.save(path)
    }

    pub fn load(&mut self, path: &Path) -> Result<(), NdError> {
        self.params.load(path)
    }
}

/// Row-wise concatenation of equally-tall matrices.
pub(crate) fn hstack(parts: &[&Tensor]) -> Tensor {
    let rows = parts[0].rows();
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut out = Tensor::zeros(rows, cols);
    for r in 0..rows {
        let mut at = 0;
        for p in parts {
            assert_eq!(p.rows(), rows, "hstack row mismatch");
            let w = p.cols();
            out.data_mut()[r * cols + at..r * cols + at + w].copy_from_slice(p.row_slice(r));
            at += w;
        }
    }
    out
}
