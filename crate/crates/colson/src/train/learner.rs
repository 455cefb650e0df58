//! Gradient-side machinery: critic regression, score matching, soft target
//! tracking, and action proposal for bootstrap targets.

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ndgrad::{Adam, Tape, Tensor};

use crate::diffusion::{
    forward_noise_rows, DiffusionSchedule, GaussianSource, NoiseSource, Sampler, SamplerConfig,
};
use crate::geom::{vec2, Vec2};
use crate::nets::{BatchedGraphs, NetConfig, Nets};
use crate::sim::Observation;

use super::buffer::Transition;
use super::trainer::TrainConfig;

/// Owns the networks and their optimizers. One instance is the single writer
/// of all parameters; everything it hands out is a copy.
pub struct Learner {
    pub nets: Nets,
    pub schedule: DiffusionSchedule,
    pub sampler_config: SamplerConfig,
    pub config: TrainConfig,
    actor_opt: Adam,
    critic_opt: Adam,
    actor_range: Range<usize>,
    critic_range: Range<usize>,
}

impl Learner {
    pub fn new(
        net_cfg: &NetConfig,
        schedule: DiffusionSchedule,
        sampler_config: SamplerConfig,
        config: TrainConfig,
        seed: u64,
    ) -> Self {
        assert!(!schedule.is_empty(), "denoising needs at least one step");
        let nets = Nets::new(net_cfg, seed);
        let actor_range = nets.params.prefix_range(&["actor."]);
        let critic_range = nets.params.prefix_range(&["critic1.", "critic2."]);
        let actor_opt = Adam::new(config.actor_lr, &nets.params.tensors()[actor_range.clone()]);
        let critic_opt = Adam::new(config.critic_lr, &nets.params.tensors()[critic_range.clone()]);
        Learner { nets, schedule, sampler_config, config, actor_opt, critic_opt, actor_range, critic_range }
    }

    fn sampler(&self) -> Sampler<'_> {
        Sampler::new(&self.schedule, self.sampler_config)
    }

    /// One action for one observation through the full reverse chain.
    pub fn sample_action(&self, obs: &Observation, noise: &mut dyn NoiseSource) -> Vec2 {
        let g = BatchedGraphs::from_observations(std::slice::from_ref(obs));
        let out = self.propose_actions(&g, noise);
        vec2(out.get(0, 0), out.get(0, 1))
    }

    /// Batched sampling: one action row per graph. The scene encoding is
    /// computed once and reused across every denoising step.
    pub fn propose_actions(&self, g: &BatchedGraphs, noise: &mut dyn NoiseSource) -> Tensor {
        let h = self.nets.encode_actor(g);
        let t = self.schedule.len();
        let mut score =
            |x: &Tensor, tau: usize| self.nets.score_plain(&h, x, &vec![tau; x.rows()], t);
        self.sampler().sample(g.n_graphs, &mut score, noise)
    }

    /// Bootstrap values y = r + γ·(1−done)·min of the frozen critics.
    pub fn critic_targets(
        &self,
        next_g: &BatchedGraphs,
        next_actions: &Tensor,
        rewards: &[f64],
        dones: &[bool],
    ) -> Vec<f64> {
        let q = self.nets.min_q_plain(next_g, next_actions, true);
        rewards
            .iter()
            .zip(dones)
            .enumerate()
            .map(|(i, (r, d))| {
                let mask = if *d { 0.0 } else { 1.0 };
                r + self.config.discount * mask * q.get(i, 0)
            })
            .collect()
    }

    /// One optimizer step pulling both critics toward `y`; returns each
    /// critic's mean squared error before the step.
    pub fn critic_step(&mut self, g: &BatchedGraphs, actions: &Tensor, y: &[f64]) -> (f64, f64) {
        let mut tape = Tape::new();
        let leaves = self.nets.params.leaves(&mut tape);
        let av = tape.leaf(actions.clone());
        let yv = tape.leaf(Tensor::from_vec(y.len(), 1, y.to_vec()));

        let mut losses = [0.0; 2];
        let mut loss_vars = Vec::with_capacity(2);
        for which in [1usize, 2] {
            let q = self.nets.q_tape(&mut tape, &leaves, g, av, which).expect("critic forward");
            let d = tape.sub(q, yv).expect("target shape");
            let sq = tape.square(d);
            let l = tape.mean(sq);
            losses[which - 1] = tape.value(l).get(0, 0);
            loss_vars.push(l);
        }
        // The two critics share no parameters, so one combined backward pass
        // yields both gradients without crosstalk.
        let total = tape.add(loss_vars[0], loss_vars[1]).expect("scalar add");
        tape.backward(total).expect("critic backward");
        let grads = self.nets.params.gradients(&tape, &leaves);
        self.critic_opt.step(
            &mut self.nets.params.tensors_mut()[self.critic_range.clone()],
            &grads[self.critic_range.clone()],
        );
        (losses[0], losses[1])
    }

    /// Scaled action-gradient of the smaller main critic at each row, taken
    /// as a constant — no gradient flows from here into the actor update.
    pub fn qsm_targets(&self, g: &BatchedGraphs, noisy: &Tensor) -> Tensor {
        let q1 = self.nets.q_plain(g, noisy, 1, false);
        let q2 = self.nets.q_plain(g, noisy, 2, false);

        let grad_of = |which: usize| -> Tensor {
            let mut tape = Tape::new();
            let leaves = self.nets.params.leaves(&mut tape);
            let av = tape.leaf(noisy.clone());
            let q = self.nets.q_tape(&mut tape, &leaves, g, av, which).expect("critic forward");
            // Rows are independent, so the gradient of the batch sum is the
            // per-row action gradient.
            let s = tape.sum(q);
            tape.input_gradient(s, av).expect("action gradient")
        };
        let g1 = grad_of(1);
        let g2 = grad_of(2);

        let mut out = Tensor::zeros(noisy.rows(), noisy.cols());
        for r in 0..noisy.rows() {
            let src = if q1.get(r, 0) <= q2.get(r, 0) { &g1 } else { &g2 };
            for c in 0..noisy.cols() {
                out.set(r, c, self.config.score_scale * src.get(r, c));
            }
        }
        out
    }

    /// Regresses the score head onto fixed targets at the given noised
    /// actions and step indices; one optimizer step; returns the pre-step
    /// loss (mean over the batch of squared target distance).
    pub fn actor_step(&mut self, g: &BatchedGraphs, noisy: &Tensor, taus: &[usize]) -> f64 {
        let targets = self.qsm_targets(g, noisy);
        let rows = noisy.rows();

        let mut tape = Tape::new();
        let leaves = self.nets.params.leaves(&mut tape);
        let av = tape.leaf(noisy.clone());
        let tv = tape.leaf(targets);
        let psi = self
            .nets
            .score_tape(&mut tape, &leaves, g, av, taus, self.schedule.len())
            .expect("score forward");
        let d = tape.sub(psi, tv).expect("target shape");
        let sq = tape.square(d);
        let total = tape.sum(sq);
        let loss = tape.scale(total, 1.0 / rows as f64);
        let value = tape.value(loss).get(0, 0);

        tape.backward(loss).expect("actor backward");
        let grads = self.nets.params.gradients(&tape, &leaves);
        self.actor_opt.step(
            &mut self.nets.params.tensors_mut()[self.actor_range.clone()],
            &grads[self.actor_range.clone()],
        );
        value
    }

    /// Full stochastic critic update on a sampled batch: propose next
    /// actions, form bootstrap targets, one step. Returns pre-step losses.
    pub fn critic_update(&mut self, batch: &[&Transition], rng: &mut ChaCha8Rng) -> (f64, f64) {
        let next_obs: Vec<Observation> =
            batch.iter().map(|t| t.next_observation.clone()).collect();
        let next_g = BatchedGraphs::from_observations(&next_obs);
        let next_actions = self.propose_actions(&next_g, &mut GaussianSource(rng));
        let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = batch.iter().map(|t| t.done).collect();
        let y = self.critic_targets(&next_g, &next_actions, &rewards, &dones);

        let obs: Vec<Observation> = batch.iter().map(|t| t.observation.clone()).collect();
        let g = BatchedGraphs::from_observations(&obs);
        let actions = actions_tensor(batch);
        self.critic_step(&g, &actions, &y)
    }

    /// Full stochastic score update: per element, a uniform step index and a
    /// freshly noised copy of the stored action.
    pub fn actor_update(&mut self, batch: &[&Transition], rng: &mut ChaCha8Rng) -> f64 {
        let obs: Vec<Observation> = batch.iter().map(|t| t.observation.clone()).collect();
        let g = BatchedGraphs::from_observations(&obs);
        let t = self.schedule.len();
        let taus: Vec<usize> = batch.iter().map(|_| rng.gen_range(1..=t)).collect();
        let a0 = actions_tensor(batch);
        let noisy = forward_noise_rows(&a0, &self.schedule, &taus, &mut GaussianSource(rng));
        self.actor_step(&g, &noisy, &taus)
    }

    pub fn polyak(&mut self) {
        self.nets.polyak(self.config.polyak_rate);
    }
}

fn actions_tensor(batch: &[&Transition]) -> Tensor {
    let mut a = Tensor::zeros(batch.len(), 2);
    for (r, t) in batch.iter().enumerate() {
        a.set(r, 0, t.action.x);
        a.set(r, 1, t.action.y);
    }
    a
}
