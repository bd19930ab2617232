//! Gradient tape: an ordered record of executed primitives plus the reverse
//! sweep that turns it into per-leaf gradients.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::scalar::Scalar;
use crate::tensor::{self, TensorBase};

/// Errors surfaced by the backward pass.
#[derive(Debug, thiserror::Error)]
pub enum TapeError {
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("backward already ran on this tape")]
    Consumed,
    #[error("loss tensor is not recorded on this tape")]
    NotOnTape,
}

/// Saved state needed to run one primitive backward.
pub(crate) enum BackOp<T: Scalar> {
    Leaf,
    Matmul { a: Rc<Vec<T>>, b: Rc<Vec<T>>, m: usize, k: usize, n: usize },
    Add { lhs_len: usize, rhs_len: usize },
    Sub { lhs_len: usize, rhs_len: usize },
    Mul { a: Rc<Vec<T>>, b: Rc<Vec<T>> },
    Scale(T),
    AddScalar,
    Reshape,
    Permute { perm: Vec<usize>, out_shape: Vec<usize> },
    Slice { axis: usize, start: usize, in_shape: Vec<usize> },
    Concat { axis: usize, part_shapes: Vec<Vec<usize>> },
    SoftmaxLast { y: Rc<Vec<T>>, row: usize },
    LayerNorm { xhat: Rc<Vec<T>>, inv_std: Vec<T>, gamma: Rc<Vec<T>>, row: usize },
    Gelu { x: Rc<Vec<T>> },
    L2NormLast { y: Rc<Vec<T>>, norms: Vec<T>, eps: T, row: usize },
    Sum { in_len: usize },
    Mean { in_len: usize },
    Log { x: Rc<Vec<T>> },
    Abs { x: Rc<Vec<T>> },
    Square { x: Rc<Vec<T>> },
    Gather { idx: Rc<Vec<usize>>, in_len: usize },
    ScatterAdd { idx: Rc<Vec<usize>> },
    StraightThrough,
}

pub(crate) struct Node<T: Scalar> {
    pub parents: Vec<Option<usize>>,
    pub back: BackOp<T>,
}

pub(crate) struct TapeInner<T: Scalar> {
    pub nodes: Vec<Node<T>>,
    pub leaf_of_key: HashMap<u64, usize>,
    pub spent: bool,
}

/// Reverse-mode tape. Cheap to clone (shared interior).
pub struct TapeBase<T: Scalar> {
    pub(crate) inner: Rc<RefCell<TapeInner<T>>>,
}

impl<T: Scalar> Clone for TapeBase<T> {
    fn clone(&self) -> Self {
        Self { inner: Rc::clone(&self.inner) }
    }
}

impl<T: Scalar> Default for TapeBase<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> TapeBase<T> {
    pub fn new() -> Self {
        Self {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                leaf_of_key: HashMap::new(),
                spent: false,
            })),
        }
    }

    pub(crate) fn same_tape(&self, other: &Self) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub(crate) fn push(&self, parents: Vec<Option<usize>>, back: BackOp<T>) -> usize {
        let mut inner = self.inner.borrow_mut();
        assert!(!inner.spent, "tape already consumed by backward; start a new tape");
        inner.nodes.push(Node { parents, back });
        inner.nodes.len() - 1
    }

    /// Number of recorded nodes (diagnostics).
    pub fn num_nodes(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    /// Registers a leaf for a keyed parameter, reusing the node if the same
    /// key was already registered (so one parameter accumulates one gradient).
    pub fn leaf(&self, key: u64, data: Rc<Vec<T>>, shape: Vec<usize>) -> TensorBase<T> {
        let id = {
            let existing = self.inner.borrow().leaf_of_key.get(&key).copied();
            match existing {
                Some(id) => id,
                None => {
                    let id = self.push(Vec::new(), BackOp::Leaf);
                    self.inner.borrow_mut().leaf_of_key.insert(key, id);
                    id
                }
            }
        };
        TensorBase::with_node(data, shape, self.clone(), id)
    }

    /// Anonymous differentiable leaf (for tests and probes).
    pub fn var(&self, data: Vec<T>, shape: Vec<usize>) -> TensorBase<T> {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "var: data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        let id = self.push(Vec::new(), BackOp::Leaf);
        TensorBase::with_node(Rc::new(data), shape, self.clone(), id)
    }

    /// Reverse sweep from a scalar loss. Consumes the tape: a second call (or
    /// recording further ops) is an error.
    pub fn backward(&self, loss: &TensorBase<T>) -> Result<Grads<T>, TapeError> {
        let loss_id = match loss.node_on(self) {
            Some(id) => id,
            None => return Err(TapeError::NotOnTape),
        };
        if loss.len() != 1 {
            return Err(TapeError::NonScalarLoss(loss.shape().to_vec()));
        }
        {
            let mut inner = self.inner.borrow_mut();
            if inner.spent {
                return Err(TapeError::Consumed);
            }
            inner.spent = true;
        }

        let inner = self.inner.borrow();
        let nodes = &inner.nodes;
        let mut grads: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss_id] = Some(vec![T::one()]);

        let mut leaf_grads: HashMap<usize, Vec<T>> = HashMap::new();
        for id in (0..=loss_id).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &nodes[id];
            if let BackOp::Leaf = node.back {
                leaf_grads.insert(id, g);
                continue;
            }
            propagate(&node.back, &node.parents, &g, &mut grads);
        }

        Ok(Grads { node_grads: leaf_grads, key_of: inner.leaf_of_key.clone() })
    }
}

/// Gradients of the leaves, queryable by parameter key or by leaf tensor.
pub struct Grads<T: Scalar> {
    node_grads: HashMap<usize, Vec<T>>,
    key_of: HashMap<u64, usize>,
}

impl<T: Scalar> Grads<T> {
    pub fn by_key(&self, key: u64) -> Option<&[T]> {
        self.key_of.get(&key).and_then(|id| self.node_grads.get(id)).map(|v| v.as_slice())
    }

    /// Gradient of a leaf tensor (parameters or `var`s). Non-leaf tensors and
    /// leaves the loss never touched return None.
    pub fn of(&self, t: &TensorBase<T>) -> Option<&[T]> {
        t.node_id().and_then(|id| self.node_grads.get(&id)).map(|v| v.as_slice())
    }
}

fn acc<T: Scalar>(grads: &mut [Option<Vec<T>>], parent: Option<usize>, da: Vec<T>) {
    let Some(p) = parent else { return };
    match &mut grads[p] {
        Some(buf) => add_assign(buf, &da),
        slot @ None => *slot = Some(da),
    }
}

/// Adds `src` into `dst` elementwise.
fn add_assign<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

fn propagate<T: Scalar>(
    back: &BackOp<T>,
    parents: &[Option<usize>],
    g: &[T],
    grads: &mut [Option<Vec<T>>],
) {
    match back {
        BackOp::Leaf => unreachable!("leaf handled by caller"),
        BackOp::Matmul { a, b, m, k, n } => {
            if parents[0].is_some() {
                let da = tensor::matmul_nt(g, b, *m, *n, *k);
                acc(grads, parents[0], da);
            }
            if parents[1].is_some() {
                let db = tensor::matmul_tn(a, g, *m, *k, *n);
                acc(grads, parents[1], db);
            }
        }
        BackOp::Add { lhs_len, rhs_len } => {
            acc(grads, parents[0], g.to_vec());
            if parents[1].is_some() {
                let db = reduce_broadcast(g, *lhs_len, *rhs_len, false);
                acc(grads, parents[1], db);
            }
        }
        BackOp::Sub { lhs_len, rhs_len } => {
            acc(grads, parents[0], g.to_vec());
            if parents[1].is_some() {
                let db = reduce_broadcast(g, *lhs_len, *rhs_len, true);
                acc(grads, parents[1], db);
            }
        }
        BackOp::Mul { a, b } => {
            if parents[0].is_some() {
                let mut da = vec![T::zero(); a.len()];
                for i in 0..a.len() {
                    da[i] = g[i] * b[i % b.len()];
                }
                acc(grads, parents[0], da);
            }
            if parents[1].is_some() {
                let mut db = vec![T::zero(); b.len()];
                for i in 0..a.len() {
                    db[i % b.len()] += g[i] * a[i];
                }
                acc(grads, parents[1], db);
            }
        }
        BackOp::Scale(c) => {
            let da: Vec<T> = g.iter().map(|&v| v * *c).collect();
            acc(grads, parents[0], da);
        }
        BackOp::AddScalar | BackOp::Reshape => {
            acc(grads, parents[0], g.to_vec());
        }
        BackOp::Permute { perm, out_shape } => {
            let inv = invert_perm(perm);
            let da = tensor::permute_raw(g, out_shape, &inv);
            acc(grads, parents[0], da);
        }
        BackOp::Slice { axis, start, in_shape } => {
            let out_extent = g.len()
                / in_shape[..*axis].iter().product::<usize>().max(1)
                / in_shape[*axis + 1..].iter().product::<usize>().max(1);
            let mut da = vec![T::zero(); in_shape.iter().product()];
            let outer: usize = in_shape[..*axis].iter().product();
            let inner: usize = in_shape[*axis + 1..].iter().product();
            let extent = in_shape[*axis];
            for o in 0..outer {
                for e in 0..out_extent {
                    let src = (o * out_extent + e) * inner;
                    let dst = (o * extent + start + e) * inner;
                    da[dst..dst + inner].copy_from_slice(&g[src..src + inner]);
                }
            }
            acc(grads, parents[0], da);
        }
        BackOp::Concat { axis, part_shapes } => {
            let outer: usize = part_shapes[0][..*axis].iter().product();
            let inner: usize = part_shapes[0][*axis + 1..].iter().product();
            let total_extent: usize = part_shapes.iter().map(|s| s[*axis]).sum();
            let mut offset = 0usize;
            for (pi, shape) in part_shapes.iter().enumerate() {
                if parents[pi].is_none() {
                    offset += shape[*axis];
                    continue;
                }
                let extent = shape[*axis];
                let mut dp = vec![T::zero(); shape.iter().product()];
                for o in 0..outer {
                    for e in 0..extent {
                        let src = (o * total_extent + offset + e) * inner;
                        let dst = (o * extent + e) * inner;
                        dp[dst..dst + inner].copy_from_slice(&g[src..src + inner]);
                    }
                }
                acc(grads, parents[pi], dp);
                offset += extent;
            }
        }
        BackOp::SoftmaxLast { y, row } => {
            let mut da = vec![T::zero(); y.len()];
            for r in 0..y.len() / row {
                let o = r * row;
                let mut s = T::zero();
                for c in 0..*row {
                    s += g[o + c] * y[o + c];
                }
                for c in 0..*row {
                    da[o + c] = y[o + c] * (g[o + c] - s);
                }
            }
            acc(grads, parents[0], da);
        }
        BackOp::LayerNorm { xhat, inv_std, gamma, row } => {
            let rows = xhat.len() / row;
            let c_t = T::lit(*row as f64);
            if parents[0].is_some() {
                let mut dx = vec![T::zero(); xhat.len()];
                for r in 0..rows {
                    let o = r * row;
                    let mut mean_dxhat = T::zero();
                    let mut mean_dxhat_xhat = T::zero();
                    for c in 0..*row {
                        let dxh = g[o + c] * gamma[c];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat[o + c];
                    }
                    mean_dxhat /= c_t;
                    mean_dxhat_xhat /= c_t;
                    for c in 0..*row {
                        let dxh = g[o + c] * gamma[c];
                        dx[o + c] = inv_std[r] * (dxh - mean_dxhat - xhat[o + c] * mean_dxhat_xhat);
                    }
                }
                acc(grads, parents[0], dx);
            }
            if parents[1].is_some() {
                let mut dgamma = vec![T::zero(); *row];
                for r in 0..rows {
                    for c in 0..*row {
                        dgamma[c] += g[r * row + c] * xhat[r * row + c];
                    }
                }
                acc(grads, parents[1], dgamma);
            }
            if parents[2].is_some() {
                let mut dbeta = vec![T::zero(); *row];
                for r in 0..rows {
                    for c in 0..*row {
                        dbeta[c] += g[r * row + c];
                    }
                }
                acc(grads, parents[2], dbeta);
            }
        }
        BackOp::Gelu { x } => {
            let da: Vec<T> = x.iter().zip(g).map(|(&v, &gv)| gv * tensor::gelu_grad(v)).collect();
            acc(grads, parents[0], da);
        }
        BackOp::L2NormLast { y, norms, eps, row } => {
            let mut da = vec![T::zero(); y.len()];
            for r in 0..y.len() / row {
                let o = r * row;
                let denom = if norms[r] > *eps { norms[r] } else { *eps };
                if norms[r] > *eps {
                    let mut dot = T::zero();
                    for c in 0..*row {
                        dot += g[o + c] * y[o + c];
                    }
                    for c in 0..*row {
                        da[o + c] = (g[o + c] - y[o + c] * dot) / denom;
                    }
                } else {
                    for c in 0..*row {
                        da[o + c] = g[o + c] / denom;
                    }
                }
            }
            acc(grads, parents[0], da);
        }
        BackOp::Sum { in_len } => {
            let da = vec![g[0]; *in_len];
            acc(grads, parents[0], da);
        }
        BackOp::Mean { in_len } => {
            let v = g[0] / T::lit(*in_len as f64);
            let da = vec![v; *in_len];
            acc(grads, parents[0], da);
        }
        BackOp::Log { x } => {
            let da: Vec<T> = x.iter().zip(g).map(|(&v, &gv)| gv / v).collect();
            acc(grads, parents[0], da);
        }
        BackOp::Abs { x } => {
            let da: Vec<T> = x
                .iter()
                .zip(g)
                .map(|(&v, &gv)| {
                    if v > T::zero() {
                        gv
                    } else if v < T::zero() {
                        -gv
                    } else {
                        T::zero()
                    }
                })
                .collect();
            acc(grads, parents[0], da);
        }
        BackOp::Square { x } => {
            let two = T::lit(2.0);
            let da: Vec<T> = x.iter().zip(g).map(|(&v, &gv)| gv * two * v).collect();
            acc(grads, parents[0], da);
        }
        BackOp::Gather { idx, in_len } => {
            let mut da = vec![T::zero(); *in_len];
            for (i, &src) in idx.iter().enumerate() {
                da[src] += g[i];
            }
            acc(grads, parents[0], da);
        }
        BackOp::ScatterAdd { idx } => {
            let mut da = vec![T::zero(); idx.len()];
            for (i, &dst) in idx.iter().enumerate() {
                da[i] = g[dst];
            }
            acc(grads, parents[0], da);
        }
        BackOp::StraightThrough => {
            acc(grads, parents[0], g.to_vec());
            acc(grads, parents[1], g.to_vec());
        }
    }
}

/// Sums `g` (length `lhs_len`) down to a broadcast rhs of length `rhs_len`,
/// cycling over the trailing block; optionally negated (for sub).
fn reduce_broadcast<T: Scalar>(g: &[T], lhs_len: usize, rhs_len: usize, negate: bool) -> Vec<T> {
    let mut out = vec![T::zero(); rhs_len];
    for i in 0..lhs_len {
        out[i % rhs_len] += g[i];
    }
    if negate {
        for v in &mut out {
            *v = -*v;
        }
    }
    out
}

fn invert_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}
