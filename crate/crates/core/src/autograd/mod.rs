//! A small reverse-mode autodiff engine over `ndarray`.
//!
//! Tensors are cheap handles (`Rc` to the value array plus an optional tape
//! node). Ops executed while a [`Tape`] is attached record a backward closure
//! capturing exactly the values they need; inference without a tape allocates
//! nothing extra and frees intermediates as soon as the last handle drops.
//! Everything is generic over [`Scalar`] so the same model code runs in f32
//! for training and f64 for finite-difference gradient checks.

mod conv;
mod linalg;
mod ops;

#[cfg(test)]
mod grad_tests;

pub use conv::{avg_pool2d_arr, upsample2x_arr};

use ndarray::{ArrayD, IxDyn};
use std::cell::RefCell;
use std::rc::Rc;

/// Element types the engine supports.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssign
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn dtype_name() -> &'static str;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn dtype_name() -> &'static str {
        "f32"
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn dtype_name() -> &'static str {
        "f64"
    }
}

type BackFn<F> = Box<dyn Fn(&ArrayD<F>) -> Vec<(usize, ArrayD<F>)>>;

struct Entry<F: Scalar> {
    back: Option<BackFn<F>>,
}

/// Records the computation graph for one forward pass.
pub struct Tape<F: Scalar> {
    inner: Rc<RefCell<Vec<Entry<F>>>>,
}

impl<F: Scalar> Clone for Tape<F> {
    fn clone(&self) -> Self {
        Tape { inner: Rc::clone(&self.inner) }
    }
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape { inner: Rc::new(RefCell::new(Vec::new())) }
    }

    fn push(&self, back: Option<BackFn<F>>) -> usize {
        let mut inner = self.inner.borrow_mut();
        inner.push(Entry { back });
        inner.len() - 1
    }

    fn same_tape(&self, other: &Tape<F>) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reverse sweep from a scalar root. Returns per-node gradients for leaf
    /// nodes; intermediate gradients are dropped as soon as they have been
    /// propagated.
    pub fn backward(&self, root: &Tensor<F>) -> Grads<F> {
        let root_id = root.node.expect("backward root is not on the tape");
        assert!(
            root.data.len() == 1,
            "backward expects a scalar root, got shape {:?}",
            root.shape()
        );
        let inner = self.inner.borrow();
        let mut grads: Vec<Option<ArrayD<F>>> = (0..inner.len()).map(|_| None).collect();
        grads[root_id] = Some(ArrayD::from_elem(root.data.shape(), F::one()));
        for id in (0..=root_id).rev() {
            let Some(gout) = grads[id].take() else { continue };
            match &inner[id].back {
                Some(back) => {
                    for (src, contrib) in back(&gout) {
                        match &mut grads[src] {
                            Some(acc) => *acc += &contrib,
                            slot => *slot = Some(contrib),
                        }
                    }
                }
                None => grads[id] = Some(gout), // leaf: keep
            }
        }
        Grads { grads }
    }
}

/// Gradients returned by [`Tape::backward`], indexed by tape node.
pub struct Grads<F: Scalar> {
    grads: Vec<Option<ArrayD<F>>>,
}

impl<F: Scalar> Grads<F> {
    pub fn get(&self, t: &Tensor<F>) -> Option<&ArrayD<F>> {
        t.node.and_then(|id| self.grads.get(id).and_then(|g| g.as_ref()))
    }

    pub fn take(&mut self, t: &Tensor<F>) -> Option<ArrayD<F>> {
        t.node.and_then(|id| self.grads.get_mut(id).and_then(|g| g.take()))
    }
}

/// A value in the computation graph.
pub struct Tensor<F: Scalar> {
    data: Rc<ArrayD<F>>,
    node: Option<usize>,
    tape: Option<Tape<F>>,
}

impl<F: Scalar> Clone for Tensor<F> {
    fn clone(&self) -> Self {
        Tensor { data: Rc::clone(&self.data), node: self.node, tape: self.tape.clone() }
    }
}

impl<F: Scalar> std::fmt::Debug for Tensor<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?}(tracked={})", self.shape(), self.node.is_some())
    }
}

impl<F: Scalar> Tensor<F> {
    /// A tensor outside any tape; nothing flows back through it.
    pub fn constant(data: ArrayD<F>) -> Self {
        Tensor { data: Rc::new(data), node: None, tape: None }
    }

    /// A differentiable leaf registered on `tape`.
    pub fn leaf(tape: &Tape<F>, data: ArrayD<F>) -> Self {
        let id = tape.push(None);
        Tensor { data: Rc::new(data), node: Some(id), tape: Some(tape.clone()) }
    }

    pub fn from_vec(shape: &[usize], v: Vec<F>) -> Self {
        Self::constant(ArrayD::from_shape_vec(IxDyn(shape), v).expect("shape/data mismatch"))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::constant(ArrayD::zeros(IxDyn(shape)))
    }

    pub fn scalar(v: F) -> Self {
        Self::constant(ArrayD::from_elem(IxDyn(&[]), v))
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.len() == 0
    }

    pub fn array(&self) -> &ArrayD<F> {
        &self.data
    }

    /// Extracts the value of a scalar (single-element) tensor.
    pub fn item(&self) -> F {
        assert!(self.data.len() == 1, "item() on non-scalar shape {:?}", self.shape());
        *self.data.iter().next().unwrap()
    }

    /// Same values, detached from the tape.
    pub fn detach(&self) -> Tensor<F> {
        Tensor { data: Rc::clone(&self.data), node: None, tape: None }
    }

    pub fn is_tracked(&self) -> bool {
        self.node.is_some()
    }

    fn node_ref(&self) -> Option<(usize, &Tape<F>)> {
        match (&self.node, &self.tape) {
            (Some(id), Some(tape)) => Some((*id, tape)),
            _ => None,
        }
    }

    /// Resolves the tape shared by the given inputs (asserting consistency)
    /// and registers a backward closure if any input is tracked.
    fn make(inputs: &[&Tensor<F>], data: ArrayD<F>, back: impl FnOnce() -> BackFn<F>) -> Tensor<F> {
        Self::make_rc(inputs, Rc::new(data), back)
    }

    /// Like [`Tensor::make`] for outputs that the backward closure also needs
    /// to capture (activations saved for the backward pass).
    fn make_rc(
        inputs: &[&Tensor<F>],
        data: Rc<ArrayD<F>>,
        back: impl FnOnce() -> BackFn<F>,
    ) -> Tensor<F> {
        let mut tape: Option<&Tape<F>> = None;
        for t in inputs {
            if let Some((_, tp)) = t.node_ref() {
                match tape {
                    None => tape = Some(tp),
                    Some(existing) => {
                        assert!(existing.same_tape(tp), "inputs belong to different tapes")
                    }
                }
            }
        }
        match tape {
            Some(tp) => {
                let id = tp.push(Some(back()));
                Tensor { data, node: Some(id), tape: Some(tp.clone()) }
            }
            None => Tensor { data, node: None, tape: None },
        }
    }
}
