//! Named, ordered parameter storage shared by every network. Order is
//! insertion order and stays fixed for the life of the set, so optimizer
//! state can be indexed positionally.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::Path;

use ndgrad::{load_tensors, save_tensors, NdError, Tape, Tensor, Var};

#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    by_name: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor under a unique name, returning its index.
    pub fn add(&mut self, name: &str, tensor: Tensor) -> usize {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name {name:?}"
        );
        let idx = self.tensors.len();
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        self.by_name.insert(name.to_string(), idx);
        idx
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, idx: usize) -> &Tensor {
        &self.tensors[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.tensors[idx]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Contiguous index range of every parameter whose name starts with one
    /// of `prefixes`. Optimizer moment buffers are sliced positionally, so a
    /// scattered group is a wiring bug and panics.
    pub fn prefix_range(&self, prefixes: &[&str]) -> std::ops::Range<usize> {
        let idx: Vec<usize> = self
            .names
            .iter()
            .enumerate()
            .filter(|(_, n)| prefixes.iter().any(|p| n.starts_with(p)))
            .map(|(i, _)| i)
            .collect();
        assert!(!idx.is_empty(), "no parameters match {prefixes:?}");
        let start = idx[0];
        for (k, i) in idx.iter().enumerate() {
            assert_eq!(*i, start + k, "parameter group {prefixes:?} is not contiguous");
        }
        start..start + idx.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|n| n.as_str()).zip(self.tensors.iter())
    }

    /// Total scalar count, for sizing reports.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    /// Puts every parameter on a tape as a leaf; index i of the result maps
    /// to parameter i.
    pub fn leaves(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
    }

    /// Copies values from `leaves[i]`'s gradients into a positional gradient
    /// list suitable for the optimizer.
    pub fn gradients(&self, tape: &Tape, leaves: &[Var]) -> Vec<Option<Tensor>> {
        leaves.iter().map(|v| tape.grad(*v).cloned()).collect()
    }

    /// Copies every `src` parameter whose name starts with `src_ns` onto the
    /// parameter of the same name with `dst_ns` substituted.
    pub fn copy_namespace(&mut self, src_ns: &str, dst_ns: &str) {
        for i in 0..self.names.len() {
            if let Some(rest) = self.names[i].strip_prefix(src_ns) {
                let dst = format!("{dst_ns}{rest}");
                let j = self.by_name[&dst];
                let v = self.tensors[i].clone();
                self.tensors[j] = v;
            }
        }
    }

    /// target <- rho * target + (1 - rho) * main, pairing names across the
    /// two namespaces. Panics on a shape mismatch; that is a wiring bug.
    pub fn polyak(&mut self, main_ns: &str, target_ns: &str, rho: f64) {
        for i in 0..self.names.len() {
            if let Some(rest) = self.names[i].strip_prefix(main_ns) {
                let dst = format!("{target_ns}{rest}");
                let j = self.by_name[&dst];
                assert_eq!(
                    self.tensors[i].shape(),
                    self.tensors[j].shape(),
                    "polyak shape mismatch {} vs {}",
                    self.names[i],
                    dst
                );
                let main = self.tensors[i].clone();
                let t = &mut self.tensors[j];
                for (o, m) in t.data_mut().iter_mut().zip(main.data()) {
                    *o = rho * *o + (1.0 - rho) * *m;
                }
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), NdError> {
        let entries: Vec<(&str, &Tensor)> = self.iter().collect();
        save_tensors(path, &entries)
    }

    /// Loads a checkpoint written by `save`; every stored name must exist
    /// here with a matching shape, and every parameter must be covered.
    pub fn load(&mut self, path: &Path) -> Result<(), NdError> {
        let stored = load_tensors(path)?;
        let mut seen = vec![false; self.tensors.len()];
        for (name, tensor) in stored {
            let idx = self.by_name.get(&name).copied().ok_or_else(|| {
                NdError::Checkpoint(format!("unknown parameter {name:?} in checkpoint"))
            })?;
            if self.tensors[idx].shape() != tensor.shape() {
                return Err(NdError::Checkpoint(format!(
                    "shape mismatch for {name:?}: {:?} vs {:?}",
                    self.tensors[idx].shape(),
                    tensor.shape()
                )));
            }
            self.tensors[idx] = tensor;
            seen[idx] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(NdError::Checkpoint(format!(
                "checkpoint is missing parameter {:?}",
                self.names[missing]
            )));
        }
        Ok(())
    }
}

/// Uniform Xavier/Glorot initialization sized by fan-in and fan-out.
pub fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-limit..limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sample_set() -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = ParamSet::new();
        p.add("a.w", xavier(3, 4, &mut rng));
        p.add("a.b", Tensor::zeros(1, 4));
        p.add("t.w", xavier(3, 4, &mut rng));
        p.add("t.b", Tensor::full(1, 4, 0.5));
        p
    }

    #[test]
    fn polyak_endpoints_and_midpoint() {
        let mut p = sample_set();
        let main_w = p.get(0).clone();
        let mut q = p.clone();
        q.polyak("a.", "t.", 1.0);
        assert_eq!(q.get(2), p.get(2), "rho 1 leaves target alone");
        q.polyak("a.", "t.", 0.0);
        assert_eq!(q.get(2), &main_w, "rho 0 copies main");

        let mut r = ParamSet::new();
        r.add("m.x", Tensor::scalar(4.0));
        r.add("tg.x", Tensor::scalar(2.0));
        r.polyak("m.", "tg.", 0.5);
        assert_eq!(r.get(1).item(), 3.0);
        p.polyak("a.", "t.", 0.9);
    }

    #[test]
    fn save_load_roundtrip_and_mismatch_detection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.ndgt");
        let p = sample_set();
        p.save(&path).unwrap();
        let mut q = sample_set();
        q.get_mut(0).data_mut()[0] += 7.0;
        q.load(&path).unwrap();
        for i in 0..p.len() {
            assert_eq!(p.get(i), q.get(i));
        }

        let mut extra = sample_set();
        extra.add("z.q", Tensor::zeros(1, 1));
        assert!(extra.load(&path).is_err(), "missing parameter must fail");
    }

    #[test]
    fn leaves_map_positionally() {
        let p = sample_set();
        let mut tape = Tape::new();
        let leaves = p.leaves(&mut tape);
        assert_eq!(leaves.len(), p.len());
        for (i, v) in leaves.iter().enumerate() {
            assert_eq!(tape.value(*v), p.get(i));
        }
    }

    #[test]
    fn prefix_ranges_are_contiguous_slices() {
        let p = sample_set();
        assert_eq!(p.prefix_range(&["a."]), 0..2);
        assert_eq!(p.prefix_range(&["t."]), 2..4);
        assert_eq!(p.prefix_range(&["a.", "t."]), 0..4);
    }

    #[test]
    #[should_panic(expected = "not contiguous")]
    fn scattered_prefix_groups_are_rejected() {
        let mut p = ParamSet::new();
        p.add("a.w", Tensor::zeros(1, 1));
        p.add("b.w", Tensor::zeros(1, 1));
        p.add("a.b", Tensor::zeros(1, 1));
        p.prefix_range(&["a."]);
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_are_rejected() {
        let mut p = ParamSet::new();
        p.add("x", Tensor::zeros(1, 1));
        p.add("x", Tensor::zeros(1, 1));
    }
}
