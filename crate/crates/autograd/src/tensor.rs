//! Dense row-major tensors and the primitive operation set.
//!
//! Every operation validates shapes up front and panics with a message naming
//! the primitive and the offending shapes; domain-level fallibility lives in
//! the crates built on top. If any operand participates in a tape, the result
//! is recorded so the tape can replay the op backward.

use std::rc::Rc;

use crate::scalar::Scalar;
use crate::tape::{BackOp, TapeBase};

pub struct TensorBase<T: Scalar> {
    data: Rc<Vec<T>>,
    shape: Vec<usize>,
    node: Option<(TapeBase<T>, usize)>,
}

impl<T: Scalar> Clone for TensorBase<T> {
    fn clone(&self) -> Self {
        Self {
            data: Rc::clone(&self.data),
            shape: self.shape.clone(),
            node: self.node.as_ref().map(|(t, id)| (t.clone(), *id)),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for TensorBase<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?}", self.shape)
    }
}

fn fmt_shape(s: &[usize]) -> String {
    format!("{s:?}")
}

impl<T: Scalar> TensorBase<T> {
    pub fn constant(data: Vec<T>, shape: &[usize]) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "constant: data length {} does not match shape {}",
            data.len(),
            fmt_shape(shape)
        );
        Self { data: Rc::new(data), shape: shape.to_vec(), node: None }
    }

    pub fn from_rc(data: Rc<Vec<T>>, shape: &[usize]) -> Self {
        assert_eq!(data.len(), shape.iter().product::<usize>(), "from_rc: length/shape mismatch");
        Self { data, shape: shape.to_vec(), node: None }
    }

    pub fn scalar(v: T) -> Self {
        Self::constant(vec![v], &[1])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::constant(vec![T::zero(); shape.iter().product()], shape)
    }

    pub(crate) fn with_node(data: Rc<Vec<T>>, shape: Vec<usize>, tape: TapeBase<T>, id: usize) -> Self {
        Self { data, shape, node: Some((tape, id)) }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn rc_data(&self) -> Rc<Vec<T>> {
        Rc::clone(&self.data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.len(), 1, "item: tensor has shape {}", fmt_shape(&self.shape));
        self.data[0]
    }

    pub fn node_id(&self) -> Option<usize> {
        self.node.as_ref().map(|(_, id)| *id)
    }

    pub(crate) fn node_on(&self, tape: &TapeBase<T>) -> Option<usize> {
        match &self.node {
            Some((t, id)) if t.same_tape(tape) => Some(*id),
            _ => None,
        }
    }

    /// Stop-gradient: same values, detached from any tape.
    pub fn detach(&self) -> Self {
        Self { data: Rc::clone(&self.data), shape: self.shape.clone(), node: None }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn tape_of(&self) -> Option<TapeBase<T>> {
        self.node.as_ref().map(|(t, _)| t.clone())
    }

    fn ctx2(a: &Self, b: &Self, op: &str) -> Option<TapeBase<T>> {
        match (&a.node, &b.node) {
            (Some((ta, _)), Some((tb, _))) => {
                assert!(ta.same_tape(tb), "{op}: operands recorded on different tapes");
                Some(ta.clone())
            }
            (Some((t, _)), None) | (None, Some((t, _))) => Some(t.clone()),
            (None, None) => None,
        }
    }

    fn emit(
        tape: Option<TapeBase<T>>,
        parents: Vec<Option<usize>>,
        data: Vec<T>,
        shape: Vec<usize>,
        back: impl FnOnce(&Rc<Vec<T>>) -> BackOp<T>,
    ) -> Self {
        let rc = Rc::new(data);
        match tape {
            Some(t) => {
                let back = back(&rc);
                let id = t.push(parents, back);
                Self { data: rc, shape, node: Some((t, id)) }
            }
            None => Self { data: rc, shape, node: None },
        }
    }

    /// Checks the broadcast rule: equal shapes, rhs scalar, or rhs shape a
    /// suffix of lhs shape (tiled over the leading axes).
    fn check_broadcast(a: &Self, b: &Self, op: &str) {
        if a.shape == b.shape || b.len() == 1 {
            return;
        }
        let ok = b.shape.len() <= a.shape.len()
            && a.shape[a.shape.len() - b.shape.len()..] == b.shape[..];
        assert!(
            ok,
            "{op}: shapes {} and {} are not broadcast-compatible",
            fmt_shape(&a.shape),
            fmt_shape(&b.shape)
        );
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self::check_broadcast(self, rhs, "add");
        let tape = Self::ctx2(self, rhs, "add");
        let b = &rhs.data;
        let data: Vec<T> =
            self.data.iter().enumerate().map(|(i, &v)| v + b[i % b.len()]).collect();
        Self::emit(
            tape,
            vec![self.node_id(), rhs.node_id()],
            data,
            self.shape.clone(),
            |_| BackOp::Add { lhs_len: self.len(), rhs_len: rhs.len() },
        )
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self::check_broadcast(self, rhs, "sub");
        let tape = Self::ctx2(self, rhs, "sub");
        let b = &rhs.data;
        let data: Vec<T> =
            self.data.iter().enumerate().map(|(i, &v)| v - b[i % b.len()]).collect();
        Self::emit(
            tape,
            vec![self.node_id(), rhs.node_id()],
            data,
            self.shape.clone(),
            |_| BackOp::Sub { lhs_len: self.len(), rhs_len: rhs.len() },
        )
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self::check_broadcast(self, rhs, "mul");
        let tape = Self::ctx2(self, rhs, "mul");
        let b = &rhs.data;
        let data: Vec<T> =
            self.data.iter().enumerate().map(|(i, &v)| v * b[i % b.len()]).collect();
        Self::emit(
            tape,
            vec![self.node_id(), rhs.node_id()],
            data,
            self.shape.clone(),
            |_| BackOp::Mul { a: Rc::clone(&self.data), b: Rc::clone(&rhs.data) },
        )
    }

    pub fn scale(&self, c: T) -> Self {
        let data: Vec<T> = self.data.iter().map(|&v| v * c).collect();
        Self::emit(self.tape_of(), vec![self.node_id()], data, self.shape.clone(), |_| {
            BackOp::Scale(c)
        })
    }

    pub fn neg(&self) -> Self {
        self.scale(-T::one())
    }

    pub fn add_scalar(&self, c: T) -> Self {
        let data: Vec<T> = self.data.iter().map(|&v| v + c).collect();
        Self::emit(self.tape_of(), vec![self.node_id()], data, self.shape.clone(), |_| {
            BackOp::AddScalar
        })
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert!(
            self.shape.len() == 2 && rhs.shape.len() == 2 && self.shape[1] == rhs.shape[0],
            "matmul: lhs {} incompatible with rhs {}",
            fmt_shape(&self.shape),
            fmt_shape(&rhs.shape)
        );
        let (m, k, n) = (self.shape[0], self.shape[1], rhs.shape[1]);
        let tape = Self::ctx2(self, rhs, "matmul");
        let data = matmul_raw(&self.data, &rhs.data, m, k, n);
        Self::emit(tape, vec![self.node_id(), rhs.node_id()], data, vec![m, n], |_| {
            BackOp::Matmul { a: Rc::clone(&self.data), b: Rc::clone(&rhs.data), m, k, n }
        })
    }

    pub fn reshape(&self, shape: &[usize]) -> Self {
        assert_eq!(
            self.len(),
            shape.iter().product::<usize>(),
            "reshape: {} cannot take shape {}",
            fmt_shape(&self.shape),
            fmt_shape(shape)
        );
        let rc = Rc::clone(&self.data);
        match self.tape_of() {
            Some(t) => {
                let id = t.push(vec![self.node_id()], BackOp::Reshape);
                Self { data: rc, shape: shape.to_vec(), node: Some((t, id)) }
            }
            None => Self { data: rc, shape: shape.to_vec(), node: None },
        }
    }

    pub fn permute(&self, perm: &[usize]) -> Self {
        let nd = self.shape.len();
        let mut seen = vec![false; nd];
        assert_eq!(perm.len(), nd, "permute: perm {perm:?} does not match rank {nd}");
        for &p in perm {
            assert!(p < nd && !seen[p], "permute: invalid permutation {perm:?}");
            seen[p] = true;
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let data = permute_raw(&self.data, &self.shape, perm);
        Self::emit(self.tape_of(), vec![self.node_id()], data, out_shape.clone(), |_| {
            BackOp::Permute { perm: perm.to_vec(), out_shape }
        })
    }

    /// Swaps two axes.
    pub fn transpose(&self, a: usize, b: usize) -> Self {
        let mut perm: Vec<usize> = (0..self.shape.len()).collect();
        perm.swap(a, b);
        self.permute(&perm)
    }

    pub fn slice(&self, axis: usize, start: usize, end: usize) -> Self {
        assert!(
            axis < self.shape.len() && start < end && end <= self.shape[axis],
            "slice: range {start}..{end} on axis {axis} invalid for shape {}",
            fmt_shape(&self.shape)
        );
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let extent = self.shape[axis];
        let out_extent = end - start;
        let mut data = Vec::with_capacity(outer * out_extent * inner);
        for o in 0..outer {
            let base = (o * extent + start) * inner;
            data.extend_from_slice(&self.data[base..base + out_extent * inner]);
        }
        let mut out_shape = self.shape.clone();
        out_shape[axis] = out_extent;
        Self::emit(self.tape_of(), vec![self.node_id()], data, out_shape, |_| BackOp::Slice {
            axis,
            start,
            in_shape: self.shape.clone(),
        })
    }

    pub fn concat(axis: usize, parts: &[&Self]) -> Self {
        assert!(!parts.is_empty(), "concat: no parts");
        let first = parts[0];
        assert!(axis < first.shape.len(), "concat: axis {axis} out of range");
        for p in parts {
            assert!(
                p.shape.len() == first.shape.len()
                    && p.shape
                        .iter()
                        .zip(&first.shape)
                        .enumerate()
                        .all(|(d, (a, b))| d == axis || a == b),
                "concat: shape {} incompatible with {} on axis {axis}",
                fmt_shape(&p.shape),
                fmt_shape(&first.shape)
            );
        }
        let mut tape: Option<TapeBase<T>> = None;
        for p in parts {
            if let Some((t, _)) = &p.node {
                match &tape {
                    Some(t0) => assert!(t0.same_tape(t), "concat: operands on different tapes"),
                    None => tape = Some(t.clone()),
                }
            }
        }
        let outer: usize = first.shape[..axis].iter().product();
        let inner: usize = first.shape[axis + 1..].iter().product();
        let total_extent: usize = parts.iter().map(|p| p.shape[axis]).sum();
        let mut data = Vec::with_capacity(outer * total_extent * inner);
        for o in 0..outer {
            for p in parts {
                let extent = p.shape[axis];
                let base = o * extent * inner;
                data.extend_from_slice(&p.data[base..base + extent * inner]);
            }
        }
        let mut out_shape = first.shape.clone();
        out_shape[axis] = total_extent;
        let parents: Vec<Option<usize>> = parts.iter().map(|p| p.node_id()).collect();
        let part_shapes: Vec<Vec<usize>> = parts.iter().map(|p| p.shape.clone()).collect();
        Self::emit(tape, parents, data, out_shape, |_| BackOp::Concat { axis, part_shapes })
    }

    /// Softmax over the last axis. Rows sum to one; -inf-like logits (e.g.
    /// -1e30 masks) come out as exactly zero probability.
    pub fn softmax_last(&self) -> Self {
        let row = *self.shape.last().expect("softmax_last: empty shape");
        let mut data = vec![T::zero(); self.len()];
        for r in 0..self.len() / row {
            let o = r * row;
            let x = &self.data[o..o + row];
            let mut m = x[0];
            for &v in x {
                if v > m {
                    m = v;
                }
            }
            let mut s = T::zero();
            for c in 0..row {
                let e = (x[c] - m).exp();
                data[o + c] = e;
                s += e;
            }
            for c in 0..row {
                data[o + c] /= s;
            }
        }
        Self::emit(self.tape_of(), vec![self.node_id()], data, self.shape.clone(), |rc| {
            BackOp::SoftmaxLast { y: Rc::clone(rc), row }
        })
    }

    /// Layer norm over the last axis with learned scale and shift.
    pub fn layer_norm(&self, gamma: &Self, beta: &Self, eps: T) -> Self {
        let row = *self.shape.last().expect("layer_norm: empty shape");
        assert!(
            gamma.shape() == [row] && beta.shape() == [row],
            "layer_norm: scale {} / shift {} do not match feature dim [{row}]",
            fmt_shape(&gamma.shape),
            fmt_shape(&beta.shape)
        );
        let tape = match (Self::ctx2(self, gamma, "layer_norm"), &beta.node) {
            (Some(t), _) => Some(t),
            (None, Some((t, _))) => Some(t.clone()),
            (None, None) => None,
        };
        let rows = self.len() / row;
        let mut xhat = vec![T::zero(); self.len()];
        let mut inv_std = vec![T::zero(); rows];
        let mut data = vec![T::zero(); self.len()];
        let row_t = T::lit(row as f64);
        for r in 0..rows {
            let o = r * row;
            let x = &self.data[o..o + row];
            let mut mean = T::zero();
            for &v in x {
                mean += v;
            }
            mean /= row_t;
            let mut var = T::zero();
            for &v in x {
                var += (v - mean) * (v - mean);
            }
            var /= row_t;
            let istd = T::one() / (var + eps).sqrt();
            inv_std[r] = istd;
            for c in 0..row {
                let xh = (x[c] - mean) * istd;
                xhat[o + c] = xh;
                data[o + c] = gamma.data[c] * xh + beta.data[c];
            }
        }
        let xhat = Rc::new(xhat);
        Self::emit(
            tape,
            vec![self.node_id(), gamma.node_id(), beta.node_id()],
            data,
            self.shape.clone(),
            |_| BackOp::LayerNorm {
                xhat: Rc::clone(&xhat),
                inv_std,
                gamma: Rc::clone(&gamma.data),
                row,
            },
        )
    }

    /// GELU activation (tanh form).
    pub fn gelu(&self) -> Self {
        let data: Vec<T> = self.data.iter().map(|&v| gelu_val(v)).collect();
        Self::emit(self.tape_of(), vec![self.node_id()], data, self.shape.clone(), |_| {
            BackOp::Gelu { x: Rc::clone(&self.data) }
        })
    }

    /// L2-normalizes each last-axis row; the denominator is max(norm, eps) so
    /// zero rows stay finite.
    pub fn l2_normalize_last(&self, eps: T) -> Self {
        let row = *self.shape.last().expect("l2_normalize_last: empty shape");
        let rows = self.len() / row;
        let mut norms = vec![T::zero(); rows];
        let mut data = vec![T::zero(); self.len()];
        for r in 0..rows {
            let o = r * row;
            let mut s = T::zero();
            for c in 0..row {
                s += self.data[o + c] * self.data[o + c];
            }
            let norm = s.sqrt();
            norms[r] = norm;
            let denom = if norm > eps { norm } else { eps };
            for c in 0..row {
                data[o + c] = self.data[o + c] / denom;
            }
        }
        Self::emit(self.tape_of(), vec![self.node_id()], data, self.shape.clone(), |rc| {
            BackOp::L2NormLast { y: Rc::clone(rc), norms, eps, row }
        })
    }

    pub fn sum(&self) -> Self {
        let mut s = T::zero();
        for &v in self.data.iter() {
            s += v;
        }
        Self::emit(self.tape_of(), vec![self.node_id()], vec![s], vec![1], |_| BackOp::Sum {
            in_len: self.len(),
        })
    }

    pub fn mean(&self) -> Self {
        assert!(!self.is_empty(), "mean: empty tensor");
        let mut s = T::zero();
        for &v in self.data.iter() {
            s += v;
        }
        s /= T::lit(self.len() as f64);
        Self::emit(self.tape_of(), vec![self.node_id()], vec![s], vec![1], |_| BackOp::Mean {
            in_len: self.len(),
        })
    }

    pub fn log(&self) -> Self {
        let data: Vec<T> = self.data.iter().map(|&v| v.ln()).collect();
        Self::emit(self.tape_of(), vec![self.node_id()], data, self.shape.clone(), |_| {
            BackOp::Log { x: Rc::clone(&self.data) }
        })
    }

    pub fn abs(&self) -> Self {
        let data: Vec<T> = self.data.iter().map(|&v| v.abs()).collect();
        Self::emit(self.tape_of(), vec![self.node_id()], data, self.shape.clone(), |_| {
            BackOp::Abs { x: Rc::clone(&self.data) }
        })
    }

    pub fn square(&self) -> Self {
        let data: Vec<T> = self.data.iter().map(|&v| v * v).collect();
        Self::emit(self.tape_of(), vec![self.node_id()], data, self.shape.clone(), |_| {
            BackOp::Square { x: Rc::clone(&self.data) }
        })
    }

    /// Flat-index gather: out[i] = self[idx[i]]. The adjoint scatter-adds, so
    /// repeated indices are fine (reflect padding, window framing).
    pub fn gather(&self, idx: Rc<Vec<usize>>, out_shape: &[usize]) -> Self {
        assert_eq!(
            idx.len(),
            out_shape.iter().product::<usize>(),
            "gather: {} indices cannot fill shape {}",
            idx.len(),
            fmt_shape(out_shape)
        );
        let mut data = Vec::with_capacity(idx.len());
        for &src in idx.iter() {
            assert!(
                src < self.len(),
                "gather: index {src} out of bounds for {} elements",
                self.len()
            );
            data.push(self.data[src]);
        }
        Self::emit(self.tape_of(), vec![self.node_id()], data, out_shape.to_vec(), |_| {
            BackOp::Gather { idx: Rc::clone(&idx), in_len: self.len() }
        })
    }

    /// Flat-index scatter-add: out[idx[i]] += self[i] into a zeroed buffer of
    /// `out_shape` (overlap-add synthesis, gather's exact adjoint).
    pub fn scatter_add(&self, idx: Rc<Vec<usize>>, out_shape: &[usize]) -> Self {
        assert_eq!(
            idx.len(),
            self.len(),
            "scatter_add: {} indices for {} elements",
            idx.len(),
            self.len()
        );
        let out_len: usize = out_shape.iter().product();
        let mut data = vec![T::zero(); out_len];
        for (i, &dst) in idx.iter().enumerate() {
            assert!(dst < out_len, "scatter_add: index {dst} out of bounds for {out_len} elements");
            data[dst] += self.data[i];
        }
        Self::emit(self.tape_of(), vec![self.node_id()], data, out_shape.to_vec(), |_| {
            BackOp::ScatterAdd { idx: Rc::clone(&idx) }
        })
    }
}

/// Straight-through estimator: forwards `z_q`'s values; backward routes the
/// incoming gradient unchanged to `z_e` (identity) and to `z_q`'s producer.
/// Codebooks stay frozen on this path when the lookup is detached upstream.
pub fn straight_through<T: Scalar>(z_e: &TensorBase<T>, z_q: &TensorBase<T>) -> TensorBase<T> {
    assert_eq!(
        z_e.shape(),
        z_q.shape(),
        "straight_through: shapes {} and {} differ",
        fmt_shape(z_e.shape()),
        fmt_shape(z_q.shape())
    );
    let tape = TensorBase::ctx2(z_e, z_q, "straight_through");
    let data = z_q.data().to_vec();
    TensorBase::emit(
        tape,
        vec![z_e.node_id(), z_q.node_id()],
        data,
        z_e.shape().to_vec(),
        |_| BackOp::StraightThrough,
    )
}

/// C[m,n] = A[m,k] B[k,n], fixed ikj loop order (deterministic accumulation).
pub(crate) fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (kk, &aik) in arow.iter().enumerate() {
            let brow = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                crow[j] += aik * brow[j];
            }
        }
    }
    c
}

/// C[m,k] = A[m,n] B[k,n]^T.
pub(crate) fn matmul_nt<T: Scalar>(a: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for kk in 0..k {
            let brow = &b[kk * n..(kk + 1) * n];
            let mut s = T::zero();
            for j in 0..n {
                s += arow[j] * brow[j];
            }
            c[i * k + kk] = s;
        }
    }
    c
}

/// C[k,n] = A[m,k]^T B[m,n].
pub(crate) fn matmul_tn<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); k * n];
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for kk in 0..k {
            let v = a[i * k + kk];
            let crow = &mut c[kk * n..(kk + 1) * n];
            for j in 0..n {
                crow[j] += v * brow[j];
            }
        }
    }
    c
}

pub(crate) fn permute_raw<T: Copy>(data: &[T], in_shape: &[usize], perm: &[usize]) -> Vec<T> {
    let nd = in_shape.len();
    let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
    let mut in_strides = vec![1usize; nd];
    for d in (0..nd.saturating_sub(1)).rev() {
        in_strides[d] = in_strides[d + 1] * in_shape[d + 1];
    }
    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; nd];
    for _ in 0..data.len() {
        let mut src = 0;
        for d in 0..nd {
            src += idx[d] * in_strides[perm[d]];
        }
        out.push(data[src]);
        for d in (0..nd).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

pub(crate) fn gelu_val<T: Scalar>(x: T) -> T {
    let c = T::lit(0.7978845608028654);
    let a = T::lit(0.044715);
    let u = c * (x + a * x * x * x);
    T::lit(0.5) * x * (T::one() + u.tanh())
}

pub(crate) fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::lit(0.7978845608028654);
    let a = T::lit(0.044715);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    T::lit(0.5) * (T::one() + t)
        + T::lit(0.5) * x * (T::one() - t * t) * c * (T::one() + T::lit(3.0) * a * x * x)
}
