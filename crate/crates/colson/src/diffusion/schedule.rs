//! Noise schedule and the forward noising process.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use ndgrad::Tensor;

use crate::geom::Vec2;

/// Per-step noise fractions α_τ for τ = 1..T, each in (0,1), plus the
/// cumulative signal scale Π√(1−α) the samplers lean on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    alphas: Vec<f64>,
    #[serde(skip, default)]
    scales: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn from_alphas(alphas: Vec<f64>) -> Self {
        for (i, a) in alphas.iter().enumerate() {
            assert!(
                *a > 0.0 && *a < 1.0,
                "alpha[{}] = {} outside (0, 1)",
                i + 1,
                a
            );
        }
        let mut s = Self { alphas, scales: Vec::new() };
        s.rebuild_scales();
        s
    }

    /// Steps ramping linearly from `lo` at τ=1 to `hi` at τ=T.
    pub fn linear_range(t: usize, lo: f64, hi: f64) -> Self {
        let alphas = (0..t)
            .map(|i| if t > 1 { lo + (hi - lo) * i as f64 / (t - 1) as f64 } else { lo })
            .collect();
        Self::from_alphas(alphas)
    }

    /// The stock ramp: 1e-4 up to 0.02.
    pub fn linear(t: usize) -> Self {
        Self::linear_range(t, 1e-4, 0.02)
    }

    /// Recomputes cached products; needed after deserializing.
    pub fn rebuild_scales(&mut self) {
        let mut scales = Vec::with_capacity(self.alphas.len() + 1);
        scales.push(1.0);
        for a in &self.alphas {
            let prev = *scales.last().unwrap();
            scales.push(prev * (1.0 - a).sqrt());
        }
        self.scales = scales;
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// α_τ, 1-indexed to match the step loop.
    pub fn alpha(&self, tau: usize) -> f64 {
        assert!(tau >= 1 && tau <= self.alphas.len(), "step {tau} out of range");
        self.alphas[tau - 1]
    }

    /// Π_{k≤τ} √(1−α_k); index 0 gives exactly 1.
    pub fn signal_scale(&self, tau: usize) -> f64 {
        self.scales[tau]
    }
}

/// Supplier of the samplers' base randomness. Tests substitute silence.
pub trait NoiseSource {
    fn fill_standard(&mut self, out: &mut [f64]);
}

/// Standard normal draws from a seeded generator.
pub struct GaussianSource<'a>(pub &'a mut ChaCha8Rng);

impl NoiseSource for GaussianSource<'_> {
    fn fill_standard(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.0.sample(StandardNormal);
        }
    }
}

/// All zeros; turns the stochastic recurrences into their deterministic
/// skeletons.
pub struct ZeroSource;

impl NoiseSource for ZeroSource {
    fn fill_standard(&mut self, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Iterates x_τ = √(1−α_τ)·x_{τ−1} + √(α_τ)·z with fresh z each step, row by
/// row; row r runs `up_to[r]` steps. Draws go row-major, steps inner.
pub fn forward_noise_rows(
    x0: &Tensor,
    schedule: &DiffusionSchedule,
    up_to: &[usize],
    noise: &mut dyn NoiseSource,
) -> Tensor {
    assert_eq!(x0.rows(), up_to.len());
    let cols = x0.cols();
    let mut out = x0.clone();
    let mut z = vec![0.0; cols];
    for r in 0..out.rows() {
        assert!(up_to[r] <= schedule.len(), "noising depth past schedule end");
        for tau in 1..=up_to[r] {
            let a = schedule.alpha(tau);
            let keep = (1.0 - a).sqrt();
            let mix = a.sqrt();
            noise.fill_standard(&mut z);
            for c in 0..cols {
                let v = keep * out.get(r, c) + mix * z[c];
                out.set(r, c, v);
            }
        }
    }
    out
}

/// Single-action convenience over `forward_noise_rows`.
pub fn forward_noise(
    x0: Vec2,
    schedule: &DiffusionSchedule,
    up_to: usize,
    noise: &mut dyn NoiseSource,
) -> Vec2 {
    let t = forward_noise_rows(
        &Tensor::from_vec(1, 2, vec![x0.x, x0.y]),
        schedule,
        &[up_to],
        noise,
    );
    Vec2 { x: t.get(0, 0), y: t.get(0, 1) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::vec2;
    use rand::SeedableRng;

    #[test]
    fn linear_ramp_endpoints_and_bounds() {
        let s = DiffusionSchedule::linear(100);
        assert_eq!(s.len(), 100);
        assert_eq!(s.alpha(1), 1e-4);
        assert_eq!(s.alpha(100), 0.02);
        for tau in 1..=100 {
            assert!(s.alpha(tau) > 0.0 && s.alpha(tau) < 1.0);
            assert!(s.alpha(tau) >= s.alpha(1));
        }
        assert_eq!(s.signal_scale(0), 1.0);
        let mut prod = 1.0;
        for tau in 1..=100 {
            prod *= (1.0 - s.alpha(tau)).sqrt();
            assert_eq!(s.signal_scale(tau), prod);
        }
    }

    #[test]
    fn zero_depth_is_untouched() {
        let x = vec2(0.3, -0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = forward_noise(x, &DiffusionSchedule::linear(10), 0, &mut GaussianSource(&mut rng));
        assert_eq!(x, y);
    }

    #[test]
    fn silent_noise_shrinks_by_the_signal_scale() {
        let s = DiffusionSchedule::linear(10);
        let x = vec2(1.0, -2.0);
        let y = forward_noise(x, &s, 10, &mut ZeroSource);
        // Without noise the recurrence is a plain product of √(1−α).
        let mut expect = x;
        for tau in 1..=10 {
            expect = expect * (1.0 - s.alpha(tau)).sqrt();
        }
        assert_eq!(y, expect);
        // And in the vanishing-alpha limit nothing changes at all.
        let tiny = DiffusionSchedule::from_alphas(vec![1e-15; 10]);
        let z = forward_noise(x, &tiny, 10, &mut ZeroSource);
        assert!((z - x).norm() < 1e-9);
    }

    #[test]
    fn variance_tracks_the_recurrence() {
        let s = DiffusionSchedule::linear(10);
        let mut var = 0.0;
        for tau in 1..=s.len() {
            var = (1.0 - s.alpha(tau)) * var + s.alpha(tau);
        }
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut src = GaussianSource(&mut rng);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let y = forward_noise(Vec2::ZERO, &s, 10, &mut src);
            sum += y.x;
            sum_sq += y.x * y.x;
        }
        let mean = sum / n as f64;
        let sample_var = sum_sq / n as f64 - mean * mean;
        // Sample variance of normal data: SE ≈ σ²√(2/(n−1)).
        let se = var * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!(
            (sample_var - var).abs() < 3.0 * se,
            "sample {sample_var} vs analytic {var} (se {se})"
        );
    }

    #[test]
    fn per_row_depths_noise_independently() {
        let s = DiffusionSchedule::linear(10);
        let x0 = Tensor::from_vec(3, 2, vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = forward_noise_rows(&x0, &s, &[0, 3, 10], &mut GaussianSource(&mut rng));
        assert_eq!(out.row_slice(0), x0.row_slice(0), "depth 0 row untouched");
        assert_ne!(out.row_slice(1), x0.row_slice(1));
        assert_ne!(out.row_slice(2), out.row_slice(1));
    }

    #[test]
    fn same_seed_same_noise() {
        let s = DiffusionSchedule::linear(10);
        let x = vec2(0.2, 0.9);
        let mut r1 = ChaCha8Rng::seed_from_u64(77);
        let mut r2 = ChaCha8Rng::seed_from_u64(77);
        let a = forward_noise(x, &s, 10, &mut GaussianSource(&mut r1));
        let b = forward_noise(x, &s, 10, &mut GaussianSource(&mut r2));
        assert_eq!(a, b);
    }

    #[test]
    #[should_panic(expected = "outside (0, 1)")]
    fn degenerate_alpha_rejected() {
        DiffusionSchedule::from_alphas(vec![0.5, 1.0]);
    }
}
