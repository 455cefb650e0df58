//! Trajectory metrics: the spectral smoothness score and time-scaled
//! discounted returns.

use crate::geom::Vec2;

/// Frequency-weighted spectral roughness of an action sequence, per
/// dimension Sm = (2/(n·f_s))·Σ_k M_k·f_k over the one-sided spectrum
/// (k = 1..⌊n/2⌋, f_k = k·f_s/n, M_k the DFT magnitude), summed over the two
/// action dimensions. Constant input scores 0; pure alternation of amplitude
/// a scores a. The sampling rate cancels algebraically, so the score is
/// dimensionless.
pub fn smoothness(actions: &[Vec2], sample_rate: f64) -> f64 {
    let n = actions.len();
    assert!(n >= 2, "smoothness needs at least 2 actions, got {n}");
    assert!(sample_rate > 0.0, "sample rate must be positive");
    let mut total = 0.0;
    for dim in 0..2 {
        let series: Vec<f64> = actions.iter().map(|a| if dim == 0 { a.x } else { a.y }).collect();
        let mut weighted = 0.0;
        for k in 1..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, x) in series.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += x * angle.cos();
                im += x * angle.sin();
            }
            let magnitude = (re * re + im * im).sqrt();
            let freq = k as f64 * sample_rate / n as f64;
            weighted += magnitude * freq;
        }
        total += 2.0 / (n as f64 * sample_rate) * weighted;
    }
    total
}

/// Return discounted by elapsed robot-scaled time: Σ_t γ^(t·Δt·v_pref)·r_t,
/// the convention that makes returns comparable across preferred speeds.
pub fn discounted_return(rewards: &[f64], gamma: f64, dt: f64, v_pref: f64) -> f64 {
    rewards
        .iter()
        .enumerate()
        .map(|(t, r)| gamma.powf(t as f64 * dt * v_pref) * r)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::vec2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_sequences_have_no_roughness() {
        for n in [2, 5, 8, 33] {
            let seq = vec![vec2(0.4, -0.7); n];
            assert!(smoothness(&seq, 4.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn alternation_scores_its_amplitude_and_dominates() {
        let alt: Vec<Vec2> = (0..8).map(|t| vec2(0.7 * (-1f64).powi(t), 0.0)).collect();
        assert!((smoothness(&alt, 4.0) - 0.7).abs() < 1e-12);

        // No sequence bounded by the unit box beats full-amplitude alternation.
        let unit_alt: Vec<Vec2> = (0..8).map(|t| vec2((-1f64).powi(t), 0.0)).collect();
        let top = smoothness(&unit_alt, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let seq: Vec<Vec2> =
                (0..8).map(|_| vec2(rng.gen_range(-1.0..=1.0), 0.0)).collect();
            assert!(smoothness(&seq, 4.0) <= top + 1e-12);
        }
        let ramp: Vec<Vec2> = (0..8).map(|t| vec2(t as f64 / 7.0 * 2.0 - 1.0, 0.0)).collect();
        let step: Vec<Vec2> =
            (0..8).map(|t| vec2(if t < 4 { -1.0 } else { 1.0 }, 0.0)).collect();
        assert!(smoothness(&ramp, 4.0) <= top + 1e-12);
        assert!(smoothness(&step, 4.0) <= top + 1e-12);
    }

    #[test]
    fn eight_step_sequence_matches_the_spectral_arithmetic() {
        let x = [0.5, -0.25, 0.8, 0.1, -0.6, 0.3, 0.0, -0.9];
        let y = [0.2, 0.2, -0.4, 0.7, -0.1, 0.05, 0.33, -0.5];
        let seq: Vec<Vec2> = x.iter().zip(&y).map(|(&a, &b)| vec2(a, b)).collect();
        // Worked independently from the one-sided DFT sums of each channel.
        let expected = 0.7691438360377392;
        assert!((smoothness(&seq, 4.0) - expected).abs() < 1e-9);
    }

    #[test]
    fn sampling_rate_cancels_out() {
        let seq: Vec<Vec2> = (0..12).map(|t| vec2((t as f64 * 0.9).sin(), 0.1 * t as f64)).collect();
        let a = smoothness(&seq, 4.0);
        let b = smoothness(&seq, 10.0);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "at least 2 actions")]
    fn single_action_is_rejected() {
        smoothness(&[vec2(1.0, 0.0)], 4.0);
    }

    #[test]
    fn discounting_scales_by_elapsed_scaled_time() {
        let rewards = [0.0, 0.0, 1.0];
        let got = discounted_return(&rewards, 0.9, 0.25, 1.0);
        assert!((got - 0.9f64.powf(0.5)).abs() < 1e-15);
        // Zero elapsed time on the first reward leaves it undiscounted.
        assert_eq!(discounted_return(&[1.0], 0.5, 0.25, 2.0), 1.0);
        // gamma = 1 reduces to the plain sum.
        let r = [0.25, -0.1, 0.5];
        assert!((discounted_return(&r, 1.0, 0.25, 1.0) - 0.65).abs() < 1e-15);
    }
}
