//! Central-difference checks for every differentiable op, plus a composite
//! network. The numeric side never touches `backward`, so the two gradient
//! routes are independent.

use std::rc::Rc;

use ndgrad::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

struct Case {
    name: &'static str,
    /// Shapes of the leaf inputs.
    shapes: Vec<(usize, usize)>,
    /// Builds a scalar output from the leaves.
    build: fn(&mut Tape, &[Var]) -> Var,
    /// Keeps inputs away from kinks/poles where finite differences lie.
    sample: fn(&mut ChaCha8Rng, usize, usize, usize) -> f64,
}

fn unit(rng: &mut ChaCha8Rng, _i: usize, _r: usize, _c: usize) -> f64 {
    rng.gen_range(-1.0..1.0)
}

fn away_from_zero(rng: &mut ChaCha8Rng, _i: usize, _r: usize, _c: usize) -> f64 {
    let v: f64 = rng.gen_range(0.2..1.0);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

fn spread(rng: &mut ChaCha8Rng, _i: usize, r: usize, c: usize) -> f64 {
    // Distinct magnitudes so minimum/segment-max have clear winners.
    rng.gen_range(-1.0..1.0) + 0.37 * (r as f64) + 0.11 * (c as f64)
}

fn eval(case: &Case, inputs: &[Tensor]) -> (f64, Vec<Tensor>) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = (case.build)(&mut tape, &vars);
    let val = tape.value(out).item();
    tape.backward(out).unwrap();
    let grads = vars
        .iter()
        .map(|v| tape.grad(*v).cloned().unwrap_or_else(|| {
            let (r, c) = tape.value(*v).shape();
            Tensor::zeros(r, c)
        }))
        .collect();
    (val, grads)
}

fn eval_value_only(case: &Case, inputs: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = (case.build)(&mut tape, &vars);
    tape.value(out).item()
}

fn check_case(case: &Case, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Tensor> = case
        .shapes
        .iter()
        .enumerate()
        .map(|(i, (r, c))| Tensor::from_fn(*r, *c, |rr, cc| (case.sample)(&mut rng, i, rr, cc)))
        .collect();
    let (_, grads) = eval(case, &inputs);
    for (i, input) in inputs.iter().enumerate() {
        for k in 0..input.numel() {
            let mut plus = inputs.clone();
            plus[i].data_mut()[k] += H;
            let mut minus = inputs.clone();
            minus[i].data_mut()[k] -= H;
            let fd = (eval_value_only(case, &plus) - eval_value_only(case, &minus)) / (2.0 * H);
            let ad = grads[i].data()[k];
            let denom = ad.abs().max(fd.abs()).max(1.0);
            assert!(
                (ad - fd).abs() / denom < TOL,
                "{} seed {} input {} elem {}: ad {} vs fd {}",
                case.name,
                seed,
                i,
                k,
                ad,
                fd
            );
        }
    }
}

fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "matmul",
            shapes: vec![(3, 4), (4, 2)],
            build: |t, v| {
                let m = t.matmul(v[0], v[1]).unwrap();
                t.sum(m)
            },
            sample: unit,
        },
        Case {
            name: "add",
            shapes: vec![(2, 3), (2, 3)],
            build: |t, v| {
                let a = t.add(v[0], v[1]).unwrap();
                let sq = t.square(a);
                t.sum(sq)
            },
            sample: unit,
        },
        Case {
            name: "add_row",
            shapes: vec![(3, 2), (1, 2)],
            build: |t, v| {
                let a = t.add_row(v[0], v[1]).unwrap();
                let sq = t.square(a);
                t.sum(sq)
            },
            sample: unit,
        },
        Case {
            name: "sub_mul",
            shapes: vec![(2, 2), (2, 2)],
            build: |t, v| {
                let d = t.sub(v[0], v[1]).unwrap();
                let p = t.mul(d, v[0]).unwrap();
                t.sum(p)
            },
            sample: unit,
        },
        Case {
            name: "div",
            shapes: vec![(2, 3), (2, 3)],
            build: |t, v| {
                let q = t.div(v[0], v[1]).unwrap();
                t.sum(q)
            },
            sample: away_from_zero,
        },
        Case {
            name: "minimum",
            shapes: vec![(3, 3), (3, 3)],
            build: |t, v| {
                let m = t.minimum(v[0], v[1]).unwrap();
                let sq = t.square(m);
                t.sum(sq)
            },
            sample: spread,
        },
        Case {
            name: "scale_add_scalar_neg",
            shapes: vec![(2, 2)],
            build: |t, v| {
                let a = t.scale(v[0], 2.5);
                let b = t.add_scalar(a, -0.3);
                let c = t.neg(b);
                let sq = t.square(c);
                t.sum(sq)
            },
            sample: unit,
        },
        Case {
            name: "relu",
            shapes: vec![(3, 3)],
            build: |t, v| {
                let r = t.relu(v[0]);
                let sq = t.square(r);
                t.sum(sq)
            },
            sample: away_from_zero,
        },
        Case {
            name: "leaky_relu",
            shapes: vec![(3, 3)],
            build: |t, v| {
                let r = t.leaky_relu(v[0], 0.2);
                let sq = t.square(r);
                t.sum(sq)
            },
            sample: away_from_zero,
        },
        Case {
            name: "tanh",
            shapes: vec![(2, 4)],
            build: |t, v| {
                let r = t.tanh(v[0]);
                t.sum(r)
            },
            sample: unit,
        },
        Case {
            name: "exp",
            shapes: vec![(2, 2)],
            build: |t, v| {
                let r = t.exp(v[0]);
                t.sum(r)
            },
            sample: unit,
        },
        Case {
            name: "softmax_rows",
            shapes: vec![(3, 4), (3, 4)],
            build: |t, v| {
                let s = t.softmax_rows(v[0]);
                let w = t.mul(s, v[1]).unwrap();
                t.sum(w)
            },
            sample: unit,
        },
        Case {
            name: "mean",
            shapes: vec![(3, 5)],
            build: |t, v| {
                let sq = t.square(v[0]);
                t.mean(sq)
            },
            sample: unit,
        },
        Case {
            name: "concat_slice",
            shapes: vec![(2, 3), (2, 2)],
            build: |t, v| {
                let c = t.concat_cols(&[v[0], v[1]]).unwrap();
                let s = t.slice_cols(c, 1, 4).unwrap();
                let sq = t.square(s);
                t.sum(sq)
            },
            sample: unit,
        },
        Case {
            name: "gather_rows",
            shapes: vec![(4, 3)],
            build: |t, v| {
                let idx = Rc::new(vec![3usize, 0, 3, 1]);
                let g = t.gather_rows(v[0], idx).unwrap();
                let sq = t.square(g);
                t.sum(sq)
            },
            sample: unit,
        },
        Case {
            name: "scatter_add_rows",
            shapes: vec![(5, 2)],
            build: |t, v| {
                let idx = Rc::new(vec![1usize, 0, 1, 2, 0]);
                let s = t.scatter_add_rows(v[0], idx, 3).unwrap();
                let sq = t.square(s);
                t.sum(sq)
            },
            sample: unit,
        },
        Case {
            name: "segment_max_rows",
            shapes: vec![(6, 2)],
            build: |t, v| {
                let seg = Rc::new(vec![0usize, 0, 1, 1, 2, 2]);
                let m = t.segment_max_rows(v[0], seg, 3).unwrap();
                let sq = t.square(m);
                t.sum(sq)
            },
            sample: spread,
        },
        Case {
            name: "mul_col",
            shapes: vec![(4, 3), (4, 1)],
            build: |t, v| {
                let m = t.mul_col(v[0], v[1]).unwrap();
                let sq = t.square(m);
                t.sum(sq)
            },
            sample: unit,
        },
        Case {
            name: "three_layer_net",
            shapes: vec![(2, 4), (4, 5), (1, 5), (5, 3), (1, 3), (3, 1)],
            build: |t, v| {
                let h1 = t.matmul(v[0], v[1]).unwrap();
                let h1 = t.add_row(h1, v[2]).unwrap();
                let h1 = t.tanh(h1);
                let h2 = t.matmul(h1, v[3]).unwrap();
                let h2 = t.add_row(h2, v[4]).unwrap();
                let h2 = t.leaky_relu(h2, 0.2);
                let out = t.matmul(h2, v[5]).unwrap();
                let sq = t.square(out);
                t.mean(sq)
            },
            sample: unit,
        },
    ]
}

#[test]
fn every_op_matches_central_differences() {
    for case in cases() {
        for seed in 0..20u64 {
            check_case(&case, seed * 7919 + 13);
        }
    }
}

#[test]
fn backward_is_deterministic_bitwise() {
    let case = &cases()[cases().len() - 1];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let inputs: Vec<Tensor> = case
        .shapes
        .iter()
        .map(|(r, c)| Tensor::from_fn(*r, *c, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let (v1, g1) = eval(case, &inputs);
    let (v2, g2) = eval(case, &inputs);
    assert_eq!(v1.to_bits(), v2.to_bits());
    for (a, b) in g1.iter().zip(&g2) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn gradient_of_untouched_leaf_is_zero() {
    let mut tape = Tape::new();
    let used = tape.leaf(Tensor::scalar(2.0));
    let unused = tape.leaf(Tensor::scalar(3.0));
    let sq = tape.square(used);
    tape.backward(sq).unwrap();
    assert!(tape.grad(unused).is_none());
}
