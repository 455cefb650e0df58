//! Networks: graph attention encoders over the agent graph, a score head for
//! action denoising, and twin critics with frozen target copies.

mod encoder;
mod graph;
mod mlp;
mod model;
mod params;

pub use encoder::{encode_plain, encode_tape, register_encoder, EncIdx};
pub use graph::{BatchedGraphs, GraphBatch};
pub use mlp::{mlp_plain, mlp_tape, register_mlp, MlpIdx};
pub use model::{tau_embedding, Nets};
pub use params::{xavier, ParamSet};

use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    /// Width of the attention layer output; must divide evenly by heads.
    pub gat_hidden: usize,
    pub gat_heads: usize,
    /// Hidden width of the score and critic heads.
    pub mlp_hidden: usize,
    /// Sinusoidal embedding width for the denoising step index.
    pub tau_embed_dim: usize,
    pub leaky_slope: f64,
    /// Read out a per-graph max over node features instead of the robot node.
    pub pooled_readout: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            gat_hidden: 64,
            gat_heads: 4,
            mlp_hidden: 256,
            tau_embed_dim: 16,
            leaky_slope: 0.2,
            pooled_readout: false,
        }
    }
}

impl NetConfig {
    pub fn head_dim(&self) -> usize {
        assert!(
            self.gat_heads > 0 && self.gat_hidden % self.gat_heads == 0,
            "hidden {} not divisible by heads {}",
            self.gat_hidden,
            self.gat_heads
        );
        self.gat_hidden / self.gat_heads
    }
}
