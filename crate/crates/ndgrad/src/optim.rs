//! Adam with per-parameter step counts, so disjoint parameter groups can be
//! stepped on different cadences without skewing bias correction.

use crate::tensor::Tensor;

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: Vec<u64>,
}

impl Adam {
    /// Moment buffers are shaped after `params`; index alignment with the
    /// parameter list is the caller's contract.
    pub fn new(lr: f64, params: &[Tensor]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect(),
            t: vec![0; params.len()],
        }
    }

    /// Applies one update per parameter with a present gradient. `None`
    /// entries are untouched: no moment decay, no step-count advance.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Option<Tensor>]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(params.len(), grads.len());
        for i in 0..params.len() {
            let g = match &grads[i] {
                Some(g) => g,
                None => continue,
            };
            self.t[i] += 1;
            let t = self.t[i];
            let b1 = self.beta1;
            let b2 = self.beta2;
            let bc1 = 1.0 - b1.powi(t as i32);
            let bc2 = 1.0 - b2.powi(t as i32);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params[i].data_mut();
            let gd = g.data();
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * gd[k];
                v[k] = b2 * v[k] + (1.0 - b2) * gd[k] * gd[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                p[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_hand_formula() {
        // m = 0.1*g, v = 0.001*g^2, mhat = g, vhat = g^2,
        // update = lr * g / (|g| + eps) = lr * sign(g) up to eps.
        let mut params = vec![Tensor::from_vec(1, 2, vec![1.0, -2.0])];
        let mut adam = Adam::new(0.01, &params);
        let g = Tensor::from_vec(1, 2, vec![3.0, -0.5]);
        adam.step(&mut params, &[Some(g)]);
        let expect0 = 1.0 - 0.01 * 3.0 / (3.0 + 1e-8);
        let expect1 = -2.0 + 0.01 * 0.5 / (0.5 + 1e-8);
        assert!((params[0].get(0, 0) - expect0).abs() < 1e-12);
        assert!((params[0].get(0, 1) - expect1).abs() < 1e-12);
    }

    #[test]
    fn absent_gradient_leaves_param_and_state_alone() {
        let mut params = vec![Tensor::scalar(5.0), Tensor::scalar(7.0)];
        let mut adam = Adam::new(0.1, &params);
        adam.step(&mut params, &[Some(Tensor::scalar(1.0)), None]);
        assert_eq!(params[1].item(), 7.0);
        assert_eq!(adam.t, vec![1, 0]);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut params = vec![Tensor::from_vec(1, 3, vec![0.5, -0.5, 2.0])];
        let before = params[0].clone();
        let mut adam = Adam::new(0.1, &params);
        for _ in 0..5 {
            adam.step(&mut params, &[Some(Tensor::zeros(1, 3))]);
        }
        assert_eq!(params[0], before);
    }
}
