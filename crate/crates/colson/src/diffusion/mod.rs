//! Denoising action samplers: schedule, reverse process, obstacle steering.

mod guidance;
mod sampler;
mod schedule;

pub use guidance::{guidance_vector, sample_obstacle_aware, GuidanceConfig};
pub use sampler::{denoise_step, Sampler, SamplerConfig, ScoreSign};
pub use schedule::{
    forward_noise, forward_noise_rows, DiffusionSchedule, GaussianSource, NoiseSource, ZeroSource,
};
