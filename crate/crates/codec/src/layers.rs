//! Parameter bookkeeping shared by every module: the evaluation context
//! (tape-attached for training, constant for inference), seeded
//! initialization, and the linear layer.

use autograd::{Param, Tape, Tensor};
use autograd::rng::{normal_vec, SeededRng};
use rand::SeedableRng;
use std::collections::HashMap;
use std::rc::Rc;

/// Shared handle to one parameter tensor.
pub type P = Rc<Param<f64>>;

/// Resolves parameters to tensors: recorded on a tape during training,
/// plain constants during inference. Both paths share the same buffers,
/// so forward values are bit-identical.
#[derive(Clone, Copy)]
pub struct Ctx<'a> {
    pub tape: Option<&'a Tape>,
}

impl<'a> Ctx<'a> {
    pub fn train(tape: &'a Tape) -> Self {
        Self { tape: Some(tape) }
    }

    pub fn infer() -> Ctx<'static> {
        Ctx { tape: None }
    }

    pub fn param(&self, p: &P) -> Tensor {
        match self.tape {
            Some(t) => p.tensor(t),
            None => p.constant(),
        }
    }
}

/// Creates named parameters with a deterministic rng and records them in
/// construction order for optimizers, checkpoints, and counting.
pub struct Builder {
    rng: SeededRng,
    pub params: Vec<P>,
}

impl Builder {
    pub fn new(seed: u64) -> Self {
        Self { rng: SeededRng::seed_from_u64(seed), params: Vec::new() }
    }

    fn push(&mut self, p: Param<f64>) -> P {
        let rc = Rc::new(p);
        self.params.push(rc.clone());
        rc
    }

    pub fn normal(&mut self, name: impl Into<String>, shape: &[usize], std: f64) -> P {
        let n = shape.iter().product();
        let data = normal_vec::<f64>(&mut self.rng, n, 0.0, std);
        self.push(Param::new(name, shape, data))
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> P {
        self.push(Param::zeros(name, shape))
    }

    pub fn ones(&mut self, name: impl Into<String>, shape: &[usize]) -> P {
        let n = shape.iter().product();
        self.push(Param::new(name, shape, vec![1.0; n]))
    }

    pub fn linear(&mut self, name: &str, d_in: usize, d_out: usize, bias: bool) -> Linear {
        let w = self.normal(format!("{name}.w"), &[d_in, d_out], 0.02);
        let b = bias.then(|| self.zeros(format!("{name}.b"), &[d_out]));
        Linear { w, b }
    }
}

/// `y = x W (+ b)` over the last axis.
pub struct Linear {
    pub w: P,
    pub b: Option<P>,
}

impl Linear {
    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Tensor {
        let y = x.matmul(&ctx.param(&self.w));
        match &self.b {
            Some(b) => y.add(&ctx.param(b)),
            None => y,
        }
    }
}

/// Name-indexed view over a parameter list.
pub struct Registry {
    pub params: Vec<P>,
    index: HashMap<String, usize>,
}

impl Registry {
    pub fn new(params: Vec<P>) -> Self {
        let index = params.iter().enumerate().map(|(i, p)| (p.name().to_string(), i)).collect();
        Self { params, index }
    }

    pub fn by_name(&self, name: &str) -> Option<&P> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn total_len(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    /// Total parameter count under a dotted name prefix.
    pub fn len_under(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|p| p.name() == prefix || p.name().starts_with(&format!("{prefix}.")))
            .map(|p| p.len())
            .sum()
    }
}

/// Gathers whole rows of a `[rows, cols]` matrix in the given order.
pub fn select_rows(x: &Tensor, rows: &[usize]) -> Tensor {
    let cols = *x.shape().last().expect("select_rows: scalar input");
    let mut idx = Vec::with_capacity(rows.len() * cols);
    for &r in rows {
        let base = r * cols;
        idx.extend(base..base + cols);
    }
    x.gather(Rc::new(idx), &[rows.len(), cols])
}
