use colson::nets::{BatchedGraphs, NetConfig, Nets};
use colson::sim::{make_circle_crossing, SimConfig};
use ndgrad::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn probe() {
    let cfg = NetConfig { gat_hidden: 8, gat_heads: 2, mlp_hidden: 8, tau_embed_dim: 4, ..NetConfig::default() };
    let sim = SimConfig::default();
    let seed = 0u64;
    let nets = Nets::new(&cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let obs: Vec<_> = (0..3)
        .map(|p| make_circle_crossing(p, seed * 31 + p as u64, true, &sim).unwrap().observation())
        .collect();
    println!("robot feats g0: {:?}", obs[0].robot);
    let g = BatchedGraphs::from_observations(&obs);
    println!("robot_feats {:?} ped_feats {:?} edges {}", g.robot_feats.shape(), g.ped_feats.shape(), g.edge_src.len());
    let x = Tensor::from_fn(3, 2, |_, _| rng.gen_range(-1.0..=1.0));
    let taus: Vec<usize> = (0..3).map(|_| rng.gen_range(1..=10)).collect();

    let mut tape = Tape::new();
    let leaves = nets.params.leaves(&mut tape);
    let xv = tape.leaf(x.clone());
    let s = nets.score_tape(&mut tape, &leaves, &g, xv, &taus, 10).unwrap();
    let q1 = nets.q_tape(&mut tape, &leaves, &g, xv, 1).unwrap();
    let q2 = nets.q_tape(&mut tape, &leaves, &g, xv, 2).unwrap();
    let ssum = tape.sum(s);
    let q1sum = tape.sum(q1);
    let q2sum = tape.sum(q2);
    let partial = tape.add(ssum, q1sum).unwrap();
    let total = tape.add(partial, q2sum).unwrap();
    tape.backward(total).unwrap();
    let grads = nets.params.gradients(&tape, &leaves);
    for idx in 0..nets.params.len() {
        let name = nets.params.name(idx);
        if name.starts_with("target") { continue; }
        let m = match &grads[idx] {
            Some(t) => t.data().iter().fold(0.0f64, |a, v| a.max(v.abs())),
            None => -1.0,
        };
        println!("{name}: max|g| = {m:.3e}");
    }
}
