//! Graph attention encoder. Per-type linear embeddings lift robot and
//! pedestrian features to a shared width; one attention layer mixes them over
//! the directed edge list and the robot node's output is the scene feature.
//!
//! Attention per head: logit(dst, src) = a . leaky_relu(L h_dst + R h_src),
//! softmax over each destination's in-edges, message = R h_src. Heads are
//! column blocks of the shared L and R so the whole layer runs as a handful
//! of matrix products and gather/scatter passes regardless of batch shape.

use rand_chacha::ChaCha8Rng;
use std::rc::Rc;

use ndgrad::{NdError, Tape, Tensor, Var};

use super::graph::BatchedGraphs;
use super::params::{xavier, ParamSet};
use super::NetConfig;

#[derive(Clone, Debug)]
pub struct EncIdx {
    pub robot_w: usize,
    pub robot_b: usize,
    pub ped_w: usize,
    pub ped_b: usize,
    pub left: usize,
    pub right: usize,
    pub attn: usize,
}

pub fn register_encoder(
    params: &mut ParamSet,
    ns: &str,
    cfg: &NetConfig,
    rng: &mut ChaCha8Rng,
) -> EncIdx {
    let h = cfg.gat_hidden;
    let hd = cfg.head_dim();
    EncIdx {
        robot_w: params.add(&format!("{ns}embed_robot.w"), xavier(5, h, rng)),
        robot_b: params.add(&format!("{ns}embed_robot.b"), Tensor::zeros(1, h)),
        ped_w: params.add(&format!("{ns}embed_ped.w"), xavier(4, h, rng)),
        ped_b: params.add(&format!("{ns}embed_ped.b"), Tensor::zeros(1, h)),
        left: params.add(&format!("{ns}gat.left"), xavier(h, h, rng)),
        right: params.add(&format!("{ns}gat.right"), xavier(h, h, rng)),
        attn: params.add(&format!("{ns}gat.attn"), xavier(hd, cfg.gat_heads, rng)),
    }
}

/// Differentiable forward pass. Returns one feature row per graph.
pub fn encode_tape(
    tape: &mut Tape,
    leaves: &[Var],
    idx: &EncIdx,
    cfg: &NetConfig,
    g: &BatchedGraphs,
) -> Result<Var, NdError> {
    let hd = cfg.head_dim();
    let rfeat = tape.leaf(g.robot_feats.clone());
    let hr_lin = tape.matmul(rfeat, leaves[idx.robot_w])?;
    let hr = tape.add_row(hr_lin, leaves[idx.robot_b])?;
    let mut nodes = tape.scatter_add_rows(hr, Rc::clone(&g.robot_rows), g.n_nodes)?;
    if g.ped_feats.rows() > 0 {
        let pfeat = tape.leaf(g.ped_feats.clone());
        let hp_lin = tape.matmul(pfeat, leaves[idx.ped_w])?;
        let hp = tape.add_row(hp_lin, leaves[idx.ped_b])?;
        let scattered = tape.scatter_add_rows(hp, Rc::clone(&g.ped_rows), g.n_nodes)?;
        nodes = tape.add(nodes, scattered)?;
    }

    let ld = tape.matmul(nodes, leaves[idx.left])?;
    let rs = tape.matmul(nodes, leaves[idx.right])?;
    let ed = tape.gather_rows(ld, Rc::clone(&g.edge_dst))?;
    let es = tape.gather_rows(rs, Rc::clone(&g.edge_src))?;
    let pre = tape.add(ed, es)?;
    let act = tape.leaky_relu(pre, cfg.leaky_slope);

    let mut heads = Vec::with_capacity(cfg.gat_heads);
    for head in 0..cfg.gat_heads {
        let act_h = tape.slice_cols(act, head * hd, (head + 1) * hd)?;
        let a_h = tape.slice_cols(leaves[idx.attn], head, head + 1)?;
        let logit = tape.matmul(act_h, a_h)?;
        // Shift by the per-destination max so exp stays in range.
        let seg_max = tape.segment_max_rows(logit, Rc::clone(&g.edge_dst), g.n_nodes)?;
        let shift = tape.gather_rows(seg_max, Rc::clone(&g.edge_dst))?;
        let centered = tape.sub(logit, shift)?;
        let ex = tape.exp(centered);
        let denom = tape.scatter_add_rows(ex, Rc::clone(&g.edge_dst), g.n_nodes)?;
        let denom_e = tape.gather_rows(denom, Rc::clone(&g.edge_dst))?;
        let weight = tape.div(ex, denom_e)?;
        let value_h = tape.slice_cols(es, head * hd, (head + 1) * hd)?;
        let msg = tape.mul_col(value_h, weight)?;
        heads.push(tape.scatter_add_rows(msg, Rc::clone(&g.edge_dst), g.n_nodes)?);
    }
    let out = tape.concat_cols(&heads)?;

    if cfg.pooled_readout {
        tape.segment_max_rows(out, Rc::clone(&g.graph_of_node), g.n_graphs)
    } else {
        tape.gather_rows(out, Rc::clone(&g.robot_rows))
    }
}

fn plain_add_row(x: &Tensor, bias: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        for c in 0..out.cols() {
            let v = out.get(r, c) + bias.get(0, c);
            out.set(r, c, v);
        }
    }
    out
}

fn plain_gather(x: &Tensor, idx: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(idx.len(), x.cols());
    for (r, &i) in idx.iter().enumerate() {
        let d = x.row_slice(i).to_vec();
        out.data_mut()[r * d.len()..(r + 1) * d.len()].copy_from_slice(&d);
    }
    out
}

fn plain_scatter_add(x: &Tensor, idx: &[usize], rows: usize) -> Tensor {
    let cols = x.cols();
    let mut out = Tensor::zeros(rows, cols);
    for (r, &i) in idx.iter().enumerate() {
        for c in 0..cols {
            let v = out.get(i, c) + x.get(r, c);
            out.set(i, c, v);
        }
    }
    out
}

fn plain_segment_max(x: &Tensor, seg: &[usize], rows: usize) -> Tensor {
    let cols = x.cols();
    let mut out = Tensor::zeros(rows, cols);
    let mut seen = vec![false; rows];
    for (r, &s) in seg.iter().enumerate() {
        for c in 0..cols {
            let v = x.get(r, c);
            if !seen[s] || v > out.get(s, c) {
                out.set(s, c, v);
            }
        }
        seen[s] = true;
    }
    out
}

/// Untracked forward pass; same math as `encode_tape`, byte for byte up to
/// float rounding, without the autograd bookkeeping.
pub fn encode_plain(
    params: &ParamSet,
    idx: &EncIdx,
    cfg: &NetConfig,
    g: &BatchedGraphs,
) -> Result<Tensor, NdError> {
    let hd = cfg.head_dim();
    let hr = plain_add_row(&g.robot_feats.matmul(params.get(idx.robot_w))?, params.get(idx.robot_b));
    let mut nodes = plain_scatter_add(&hr, &g.robot_rows, g.n_nodes);
    if g.ped_feats.rows() > 0 {
        let hp = plain_add_row(&g.ped_feats.matmul(params.get(idx.ped_w))?, params.get(idx.ped_b));
        let scattered = plain_scatter_add(&hp, &g.ped_rows, g.n_nodes);
        for (o, v) in nodes.data_mut().iter_mut().zip(scattered.data()) {
            *o += *v;
        }
    }

    let ld = nodes.matmul(params.get(idx.left))?;
    let rs = nodes.matmul(params.get(idx.right))?;
    let ed = plain_gather(&ld, &g.edge_dst);
    let es = plain_gather(&rs, &g.edge_src);
    let slope = cfg.leaky_slope;
    let mut act = Tensor::zeros(ed.rows(), ed.cols());
    for r in 0..act.rows() {
        for c in 0..act.cols() {
            let v = ed.get(r, c) + es.get(r, c);
            act.set(r, c, if v > 0.0 { v } else { slope * v });
        }
    }

    let attn = params.get(idx.attn);
    let mut out = Tensor::zeros(g.n_nodes, cfg.gat_hidden);
    for head in 0..cfg.gat_heads {
        let n_edges = act.rows();
        let mut logit = Tensor::zeros(n_edges, 1);
        for r in 0..n_edges {
            let mut s = 0.0;
            for k in 0..hd {
                s += act.get(r, head * hd + k) * attn.get(k, head);
            }
            logit.set(r, 0, s);
        }
        let seg_max = plain_segment_max(&logit, &g.edge_dst, g.n_nodes);
        let mut ex = Tensor::zeros(n_edges, 1);
        for r in 0..n_edges {
            ex.set(r, 0, (logit.get(r, 0) - seg_max.get(g.edge_dst[r], 0)).exp());
        }
        let denom = plain_scatter_add(&ex, &g.edge_dst, g.n_nodes);
        for r in 0..n_edges {
            let w = ex.get(r, 0) / denom.get(g.edge_dst[r], 0);
            let dst = g.edge_dst[r];
            for k in 0..hd {
                let v = out.get(dst, head * hd + k) + w * es.get(r, head * hd + k);
                out.set(dst, head * hd + k, v);
            }
        }
    }

    if cfg.pooled_readout {
        Ok(plain_segment_max(&out, &g.graph_of_node, g.n_graphs))
    } else {
        Ok(plain_gather(&out, &g.robot_rows))
    }
}
