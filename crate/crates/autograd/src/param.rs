//! Named trainable buffers that outlive any single tape.
//!
//! A parameter owns its values behind an `Rc` so tapes can hold cheap
//! snapshots; the optimizer mutates through `update`, which copies on write
//! only if a tape still shares the buffer. Each parameter gets a
//! process-unique key used to dedup tape leaves and address gradients.

use std::cell::RefCell;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::scalar::Scalar;
use crate::tape::TapeBase;
use crate::tensor::TensorBase;

pub type ParamKey = u64;

static NEXT_KEY: AtomicU64 = AtomicU64::new(1);

pub struct Param<T: Scalar> {
    key: ParamKey,
    name: String,
    shape: Vec<usize>,
    data: RefCell<Rc<Vec<T>>>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, shape: &[usize], data: Vec<T>) -> Self {
        let name = name.into();
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "param {name}: data length {} does not match shape {shape:?}",
            data.len()
        );
        Self {
            key: NEXT_KEY.fetch_add(1, Ordering::Relaxed),
            name,
            shape: shape.to_vec(),
            data: RefCell::new(Rc::new(data)),
        }
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        Self::new(name, shape, vec![T::zero(); shape.iter().product()])
    }

    pub fn key(&self) -> ParamKey {
        self.key
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Snapshot of the current values (shares the buffer).
    pub fn value(&self) -> Rc<Vec<T>> {
        Rc::clone(&self.data.borrow())
    }

    /// Leaf tensor on `tape`; repeated calls with the same tape return the
    /// same node so gradients accumulate correctly.
    pub fn tensor(&self, tape: &TapeBase<T>) -> TensorBase<T> {
        tape.leaf(self.key, self.value(), self.shape.clone())
    }

    /// Untracked constant view for inference paths.
    pub fn constant(&self) -> TensorBase<T> {
        TensorBase::from_rc(self.value(), &self.shape)
    }

    /// Replaces the values wholesale.
    pub fn set(&self, data: Vec<T>) {
        assert_eq!(data.len(), self.len(), "param {}: set with wrong length", self.name);
        *self.data.borrow_mut() = Rc::new(data);
    }

    /// Mutates the values in place, copying first if a tape still shares them.
    pub fn update(&self, f: impl FnOnce(&mut [T])) {
        let mut rc = self.data.borrow_mut();
        f(Rc::make_mut(&mut rc).as_mut_slice());
    }
}

impl<T: Scalar> std::fmt::Debug for Param<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Param({} {:?})", self.name, self.shape)
    }
}
