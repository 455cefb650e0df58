//! Plain fully-connected heads: linear layers with relu between them and a
//! bare linear output.

use rand_chacha::ChaCha8Rng;

use ndgrad::{NdError, Tape, Tensor, Var};

use super::params::{xavier, ParamSet};

#[derive(Clone, Debug)]
pub struct MlpIdx {
    pub layers: Vec<(usize, usize)>,
}

/// Registers layers sized `widths[0] -> widths[1] -> ... -> widths.last()`.
/// `zero_output` starts the final layer at exactly zero so the head's first
/// output is the zero function.
pub fn register_mlp(
    params: &mut ParamSet,
    ns: &str,
    widths: &[usize],
    zero_output: bool,
    rng: &mut ChaCha8Rng,
) -> MlpIdx {
    assert!(widths.len() >= 2, "an mlp needs at least one layer");
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for l in 0..widths.len() - 1 {
        let (din, dout) = (widths[l], widths[l + 1]);
        let last = l == widths.len() - 2;
        let w = if last && zero_output { Tensor::zeros(din, dout) } else { xavier(din, dout, rng) };
        layers.push((
            params.add(&format!("{ns}l{l}.w"), w),
            params.add(&format!("{ns}l{l}.b"), Tensor::zeros(1, dout)),
        ));
    }
    MlpIdx { layers }
}

pub fn mlp_tape(
    tape: &mut Tape,
    leaves: &[Var],
    idx: &MlpIdx,
    input: Var,
) -> Result<Var, NdError> {
    let mut x = input;
    for (l, (w, b)) in idx.layers.iter().enumerate() {
        let lin = tape.matmul(x, leaves[*w])?;
        x = tape.add_row(lin, leaves[*b])?;
        if l + 1 < idx.layers.len() {
            x = tape.relu(x);
        }
    }
    Ok(x)
}

pub fn mlp_plain(params: &ParamSet, idx: &MlpIdx, input: &Tensor) -> Result<Tensor, NdError> {
    let mut x = input.clone();
    for (l, (w, b)) in idx.layers.iter().enumerate() {
        let mut y = x.matmul(params.get(*w))?;
        let bias = params.get(*b);
        let last = l + 1 == idx.layers.len();
        for r in 0..y.rows() {
            for c in 0..y.cols() {
                let mut v = y.get(r, c) + bias.get(0, c);
                if !last && v < 0.0 {
                    v = 0.0;
                }
                y.set(r, c, v);
            }
        }
        x = y;
    }
    Ok(x)
}
