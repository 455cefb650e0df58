//! Expression tape with reverse-mode differentiation.
//!
//! A `Tape` records every operation as a node; `backward` walks the nodes in
//! reverse creation order and accumulates gradients. Creation order is a
//! topological order by construction, so one reverse sweep suffices.
//! Forward values are never mutated by `backward`.

use std::rc::Rc;

use crate::error::NdError;
use crate::tensor::Tensor;

/// Handle to a node on a tape. Only valid for the tape that produced it.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Matmul(Var, Var),
    Add(Var, Var),
    /// Adds a 1xD row vector to every row of an NxD matrix.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// Elementwise minimum; gradient routes to the smaller input, ties to the left.
    Minimum(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Exp(Var),
    Square(Var),
    SoftmaxRows(Var),
    Sum(Var),
    Mean(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    /// out[k] = in[idx[k]].
    GatherRows(Var, Rc<Vec<usize>>),
    /// out[idx[k]] += in[k]; rows of `out` not hit by any index stay zero.
    ScatterAddRows(Var, Rc<Vec<usize>>),
    /// out[s][c] = max over rows r with seg[r] == s; empty segments stay zero.
    /// Gradient routes to the first row attaining the max in each column.
    SegmentMaxRows(Var, Rc<Vec<usize>>),
    /// Scales row r of an NxD matrix by the Nx1 column c[r].
    MulCol(Var, Var),
}

pub struct Tape {
    ops: Vec<Op>,
    values: Vec<Tensor>,
    grads: Vec<Option<Tensor>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn matmul_into(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    let (m, k) = a.shape();
    let n = b.cols();
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data().as_ptr(),
            k as isize,
            1,
            b.data().as_ptr(),
            n as isize,
            1,
            0.0,
            out.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { ops: Vec::new(), values: Vec::new(), grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.ops.push(op);
        self.values.push(value);
        self.grads.push(None);
        Var(self.ops.len() - 1)
    }

    /// Records an input node. Leaves have no parents; their gradients are
    /// retrievable after `backward`.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    /// Gradient of the last `backward` loss wrt `v`, if `v` participated.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        let (m, ka) = self.values[a.0].shape();
        let (kb, n) = self.values[b.0].shape();
        if ka != kb {
            return Err(NdError::shape("matmul", (m, ka), (kb, n)));
        }
        let mut out = Tensor::zeros(m, n);
        matmul_into(&self.values[a.0], &self.values[b.0], &mut out);
        Ok(self.push(Op::Matmul(a, b), out))
    }

    fn binary_same_shape(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var, NdError> {
        let sa = self.values[a.0].shape();
        let sb = self.values[b.0].shape();
        if sa != sb {
            return Err(NdError::shape(name, sa, sb));
        }
        let va = self.values[a.0].data();
        let vb = self.values[b.0].data();
        let data: Vec<f64> = va.iter().zip(vb).map(|(x, y)| f(*x, *y)).collect();
        let out = Tensor::from_vec(sa.0, sa.1, data);
        Ok(self.push(op, out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        self.binary_same_shape("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        self.binary_same_shape("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        self.binary_same_shape("minimum", a, b, f64::min, Op::Minimum(a, b))
    }

    /// Broadcasts a 1xD bias over the rows of an NxD matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, NdError> {
        let (n, d) = self.values[a.0].shape();
        let sb = self.values[bias.0].shape();
        if sb != (1, d) {
            return Err(NdError::shape("add_row", (n, d), sb));
        }
        let mut out = self.values[a.0].clone();
        {
            let b = self.values[bias.0].data().to_vec();
            let data = out.data_mut();
            for r in 0..n {
                for c in 0..d {
                    data[r * d + c] += b[c];
                }
            }
        }
        Ok(self.push(Op::AddRow(a, bias), out))
    }

    /// Scales row r of `a` (NxD) by column entry c[r] (Nx1).
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var, NdError> {
        let (n, d) = self.values[a.0].shape();
        let sc = self.values[col.0].shape();
        if sc != (n, 1) {
            return Err(NdError::shape("mul_col", (n, d), sc));
        }
        let mut out = self.values[a.0].clone();
        {
            let c = self.values[col.0].data().to_vec();
            let data = out.data_mut();
            for r in 0..n {
                for j in 0..d {
                    data[r * d + j] *= c[r];
                }
            }
        }
        Ok(self.push(Op::MulCol(a, col), out))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (r, c) = self.values[a.0].shape();
        let data: Vec<f64> = self.values[a.0].data().iter().map(|x| f(*x)).collect();
        self.push(op, Tensor::from_vec(r, c, data))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, |x| k * x, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, |x| x + k, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { slope * x }, Op::LeakyRelu(a, slope))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    /// Row-wise softmax with the usual max-shift for stability.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (n, d) = self.values[a.0].shape();
        let mut out = Tensor::zeros(n, d);
        for r in 0..n {
            let row = self.values[a.0].row_slice(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for c in 0..d {
                let e = (row[c] - m).exp();
                out.set(r, c, e);
                s += e;
            }
            for c in 0..d {
                out.set(r, c, out.get(r, c) / s);
            }
        }
        self.push(Op::SoftmaxRows(a), out)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.values[a.0].data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.values[a.0].numel() as f64;
        let s: f64 = self.values[a.0].data().iter().sum();
        self.push(Op::Mean(a), Tensor::scalar(s / n))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NdError> {
        let n = self.values[parts[0].0].rows();
        let mut total = 0;
        for p in parts {
            let (r, c) = self.values[p.0].shape();
            if r != n {
                return Err(NdError::shape("concat_cols", (n, 0), (r, c)));
            }
            total += c;
        }
        let mut out = Tensor::zeros(n, total);
        let mut off = 0;
        for p in parts {
            let t = &self.values[p.0];
            for r in 0..n {
                let src = t.row_slice(r);
                let dst = r * total + off;
                out.data_mut()[dst..dst + src.len()].copy_from_slice(src);
            }
            off += t.cols();
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), out))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NdError> {
        let (n, d) = self.values[a.0].shape();
        if start >= end || end > d {
            return Err(NdError::shape("slice_cols", (n, d), (start, end)));
        }
        let w = end - start;
        let mut out = Tensor::zeros(n, w);
        for r in 0..n {
            let src = &self.values[a.0].row_slice(r)[start..end];
            out.data_mut()[r * w..(r + 1) * w].copy_from_slice(src);
        }
        Ok(self.push(Op::SliceCols(a, start, end), out))
    }

    /// out[k] = a[idx[k]]. Indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: Rc<Vec<usize>>) -> Result<Var, NdError> {
        let (n, d) = self.values[a.0].shape();
        if let Some(bad) = idx.iter().find(|i| **i >= n) {
            return Err(NdError::Index { index: *bad, rows: n });
        }
        let mut out = Tensor::zeros(idx.len(), d);
        for (k, i) in idx.iter().enumerate() {
            let src = self.values[a.0].row_slice(*i).to_vec();
            out.data_mut()[k * d..(k + 1) * d].copy_from_slice(&src);
        }
        Ok(self.push(Op::GatherRows(a, idx), out))
    }

    /// out has `out_rows` rows; row idx[k] accumulates a's row k.
    pub fn scatter_add_rows(&mut self, a: Var, idx: Rc<Vec<usize>>, out_rows: usize) -> Result<Var, NdError> {
        let (n, d) = self.values[a.0].shape();
        if n != idx.len() {
            return Err(NdError::shape("scatter_add_rows", (n, d), (idx.len(), 0)));
        }
        if let Some(bad) = idx.iter().find(|i| **i >= out_rows) {
            return Err(NdError::Index { index: *bad, rows: out_rows });
        }
        let mut out = Tensor::zeros(out_rows, d);
        for (k, i) in idx.iter().enumerate() {
            let src = self.values[a.0].row_slice(k).to_vec();
            let dst = &mut out.data_mut()[i * d..(i + 1) * d];
            for (o, s) in dst.iter_mut().zip(&src) {
                *o += s;
            }
        }
        Ok(self.push(Op::ScatterAddRows(a, idx), out))
    }

    /// Column-wise max over row groups; seg[r] names the output row of input
    /// row r. Rows of the output whose segment is empty stay zero.
    pub fn segment_max_rows(&mut self, a: Var, seg: Rc<Vec<usize>>, out_rows: usize) -> Result<Var, NdError> {
        let (n, d) = self.values[a.0].shape();
        if n != seg.len() {
            return Err(NdError::shape("segment_max_rows", (n, d), (seg.len(), 0)));
        }
        if let Some(bad) = seg.iter().find(|i| **i >= out_rows) {
            return Err(NdError::Index { index: *bad, rows: out_rows });
        }
        let mut out = Tensor::zeros(out_rows, d);
        let mut seen = vec![false; out_rows];
        for (k, s) in seg.iter().enumerate() {
            let src = self.values[a.0].row_slice(k).to_vec();
            let dst = &mut out.data_mut()[s * d..(s + 1) * d];
            if !seen[*s] {
                dst.copy_from_slice(&src);
                seen[*s] = true;
            } else {
                for (o, v) in dst.iter_mut().zip(&src) {
                    if *v > *o {
                        *o = *v;
                    }
                }
            }
        }
        Ok(self.push(Op::SegmentMaxRows(a, seg), out))
    }

    fn grad_buf(&mut self, idx: usize) -> &mut Tensor {
        if self.grads[idx].is_none() {
            let (r, c) = self.values[idx].shape();
            self.grads[idx] = Some(Tensor::zeros(r, c));
        }
        self.grads[idx].as_mut().unwrap()
    }

    /// Accumulates d(loss)/d(node) for every node reachable from `loss`.
    /// `loss` must be 1x1. Values are left untouched; repeated calls reset
    /// gradients first.
    pub fn backward(&mut self, loss: Var) -> Result<(), NdError> {
        if self.values[loss.0].numel() != 1 {
            let s = self.values[loss.0].shape();
            return Err(NdError::NonScalarLoss { rows: s.0, cols: s.1 });
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let g = match self.grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let op = self.ops[i].clone();
            match op {
                Op::Leaf => {}
                Op::Matmul(a, b) => {
                    let (m, k) = self.values[a.0].shape();
                    let n = self.values[b.0].cols();
                    // dA += G * B^T
                    {
                        let bt = self.values[b.0].data().as_ptr();
                        let gp = g.data().as_ptr();
                        let da = self.grad_buf(a.0).data_mut().as_mut_ptr();
                        unsafe {
                            matrixmultiply::dgemm(
                                m, n, k, 1.0, gp, n as isize, 1, bt, 1, n as isize, 1.0, da, k as isize, 1,
                            );
                        }
                    }
                    // dB += A^T * G
                    {
                        let at = self.values[a.0].data().as_ptr();
                        let gp = g.data().as_ptr();
                        let db = self.grad_buf(b.0).data_mut().as_mut_ptr();
                        unsafe {
                            matrixmultiply::dgemm(
                                k, m, n, 1.0, at, 1, k as isize, gp, n as isize, 1, 1.0, db, n as isize, 1,
                            );
                        }
                    }
                }
                Op::Add(a, b) => {
                    for (o, v) in self.grad_buf(a.0).data_mut().iter_mut().zip(g.data()) {
                        *o += v;
                    }
                    for (o, v) in self.grad_buf(b.0).data_mut().iter_mut().zip(g.data()) {
                        *o += v;
                    }
                }
                Op::AddRow(a, bias) => {
                    for (o, v) in self.grad_buf(a.0).data_mut().iter_mut().zip(g.data()) {
                        *o += v;
                    }
                    let (n, d) = g.shape();
                    let gb = self.grad_buf(bias.0).data_mut();
                    for r in 0..n {
                        for c in 0..d {
                            gb[c] += g.data()[r * d + c];
                        }
                    }
                }
                Op::Sub(a, b) => {
                    for (o, v) in self.grad_buf(a.0).data_mut().iter_mut().zip(g.data()) {
                        *o += v;
                    }
                    for (o, v) in self.grad_buf(b.0).data_mut().iter_mut().zip(g.data()) {
                        *o -= v;
                    }
                }
                Op::Mul(a, b) => {
                    let vb = self.values[b.0].data().to_vec();
                    for ((o, v), y) in self.grad_buf(a.0).data_mut().iter_mut().zip(g.data()).zip(&vb) {
                        *o += v * y;
                    }
                    let va = self.values[a.0].data().to_vec();
                    for ((o, v), x) in self.grad_buf(b.0).data_mut().iter_mut().zip(g.data()).zip(&va) {
                        *o += v * x;
                    }
                }
                Op::Div(a, b) => {
                    let va = self.values[a.0].data().to_vec();
                    let vb = self.values[b.0].data().to_vec();
                    for ((o, v), y) in self.grad_buf(a.0).data_mut().iter_mut().zip(g.data()).zip(&vb) {
                        *o += v / y;
                    }
                    for (((o, v), x), y) in
                        self.grad_buf(b.0).data_mut().iter_mut().zip(g.data()).zip(&va).zip(&vb)
                    {
                        *o -= v * x / (y * y);
                    }
                }
                Op::Minimum(a, b) => {
                    let va = self.values[a.0].data().to_vec();
                    let vb = self.values[b.0].data().to_vec();
                    {
                        let ga = self.grad_buf(a.0).data_mut();
                        for k in 0..va.len() {
                            if va[k] <= vb[k] {
                                ga[k] += g.data()[k];
                            }
                        }
                    }
                    let gb = self.grad_buf(b.0).data_mut();
                    for k in 0..va.len() {
                        if va[k] > vb[k] {
                            gb[k] += g.data()[k];
                        }
                    }
                }
                Op::Neg(a) => {
                    for (o, v) in self.grad_buf(a.0).data_mut().iter_mut().zip(g.data()) {
                        *o -= v;
                    }
                }
                Op::Scale(a, k) => {
                    for (o, v) in self.grad_buf(a.0).data_mut().iter_mut().zip(g.data()) {
                        *o += k * v;
                    }
                }
                Op::AddScalar(a) => {
                    for (o, v) in self.grad_buf(a.0).data_mut().iter_mut().zip(g.data()) {
                        *o += v;
                    }
                }
                Op::Relu(a) => {
                    let va = self.values[a.0].data().to_vec();
                    let ga = self.grad_buf(a.0).data_mut();
                    for k in 0..va.len() {
                        if va[k] > 0.0 {
                            ga[k] += g.data()[k];
                        }
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    let va = self.values[a.0].data().to_vec();
                    let ga = self.grad_buf(a.0).data_mut();
                    for k in 0..va.len() {
                        ga[k] += g.data()[k] * if va[k] > 0.0 { 1.0 } else { slope };
                    }
                }
                Op::Tanh(a) => {
                    let out = self.values[i].data().to_vec();
                    let ga = self.grad_buf(a.0).data_mut();
                    for k in 0..out.len() {
                        ga[k] += g.data()[k] * (1.0 - out[k] * out[k]);
                    }
                }
                Op::Exp(a) => {
                    let out = self.values[i].data().to_vec();
                    let ga = self.grad_buf(a.0).data_mut();
                    for k in 0..out.len() {
                        ga[k] += g.data()[k] * out[k];
                    }
                }
                Op::Square(a) => {
                    let va = self.values[a.0].data().to_vec();
                    let ga = self.grad_buf(a.0).data_mut();
                    for k in 0..va.len() {
                        ga[k] += g.data()[k] * 2.0 * va[k];
                    }
                }
                Op::SoftmaxRows(a) => {
                    let (n, d) = g.shape();
                    let y = self.values[i].data().to_vec();
                    let ga = self.grad_buf(a.0).data_mut();
                    for r in 0..n {
                        let mut dot = 0.0;
                        for c in 0..d {
                            dot += g.data()[r * d + c] * y[r * d + c];
                        }
                        for c in 0..d {
                            let k = r * d + c;
                            ga[k] += y[k] * (g.data()[k] - dot);
                        }
                    }
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    for o in self.grad_buf(a.0).data_mut().iter_mut() {
                        *o += gv;
                    }
                }
                Op::Mean(a) => {
                    let n = self.values[a.0].numel() as f64;
                    let gv = g.item() / n;
                    for o in self.grad_buf(a.0).data_mut().iter_mut() {
                        *o += gv;
                    }
                }
                Op::ConcatCols(parts) => {
                    let n = g.rows();
                    let total = g.cols();
                    let mut off = 0;
                    for p in parts {
                        let w = self.values[p.0].cols();
                        let gp = self.grad_buf(p.0).data_mut();
                        for r in 0..n {
                            for c in 0..w {
                                gp[r * w + c] += g.data()[r * total + off + c];
                            }
                        }
                        off += w;
                    }
                }
                Op::SliceCols(a, start, _end) => {
                    let d = self.values[a.0].cols();
                    let (n, w) = g.shape();
                    let ga = self.grad_buf(a.0).data_mut();
                    for r in 0..n {
                        for c in 0..w {
                            ga[r * d + start + c] += g.data()[r * w + c];
                        }
                    }
                }
                Op::GatherRows(a, idx) => {
                    let d = g.cols();
                    let ga = self.grad_buf(a.0).data_mut();
                    for (k, i2) in idx.iter().enumerate() {
                        for c in 0..d {
                            ga[i2 * d + c] += g.data()[k * d + c];
                        }
                    }
                }
                Op::ScatterAddRows(a, idx) => {
                    let d = g.cols();
                    let ga = self.grad_buf(a.0).data_mut();
                    for (k, i2) in idx.iter().enumerate() {
                        for c in 0..d {
                            ga[k * d + c] += g.data()[i2 * d + c];
                        }
                    }
                }
                Op::SegmentMaxRows(a, seg) => {
                    // Recompute argmax per (segment, column); first attaining row wins.
                    let d = g.cols();
                    let out_rows = g.rows();
                    let va = self.values[a.0].data().to_vec();
                    let n = seg.len();
                    let mut arg = vec![usize::MAX; out_rows * d];
                    let mut best = vec![f64::NEG_INFINITY; out_rows * d];
                    for k in 0..n {
                        let s = seg[k];
                        for c in 0..d {
                            let v = va[k * d + c];
                            if v > best[s * d + c] {
                                best[s * d + c] = v;
                                arg[s * d + c] = k;
                            }
                        }
                    }
                    let ga = self.grad_buf(a.0).data_mut();
                    for s in 0..out_rows {
                        for c in 0..d {
                            let k = arg[s * d + c];
                            if k != usize::MAX {
                                ga[k * d + c] += g.data()[s * d + c];
                            }
                        }
                    }
                }
                Op::MulCol(a, col) => {
                    let (n, d) = g.shape();
                    let va = self.values[a.0].data().to_vec();
                    let vc = self.values[col.0].data().to_vec();
                    {
                        let ga = self.grad_buf(a.0).data_mut();
                        for r in 0..n {
                            for c in 0..d {
                                ga[r * d + c] += g.data()[r * d + c] * vc[r];
                            }
                        }
                    }
                    let gc = self.grad_buf(col.0).data_mut();
                    for r in 0..n {
                        let mut acc = 0.0;
                        for c in 0..d {
                            acc += g.data()[r * d + c] * va[r * d + c];
                        }
                        gc[r] += acc;
                    }
                }
            }
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Convenience: backward from `output` and return a copy of d(output)/d(input).
    /// Gradients of other nodes are computed on this tape as a side effect but
    /// nothing outside the tape is touched.
    pub fn input_gradient(&mut self, output: Var, input: Var) -> Result<Tensor, NdError> {
        self.backward(output)?;
        let (r, c) = self.values[input.0].shape();
        Ok(self.grads[input.0].clone().unwrap_or_else(|| Tensor::zeros(r, c)))
    }
}
