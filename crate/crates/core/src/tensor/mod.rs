//! Dense NCHW tensors with a reverse-mode tape.
//!
//! Every value is a rank-4 array. Operations on tensors that require gradients
//! record a backward rule on the output node; [`Tensor::backward`] walks the
//! resulting graph in reverse topological order exactly once.

mod autograd;
mod element;
pub mod gradcheck;
pub mod macs;
pub mod ops;
mod shape;

use std::cell::{Ref, RefCell};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

pub use autograd::Tape;
pub use element::Element;
pub use shape::Shape;

use crate::error::{Error, Result};

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

/// Gradient of the op output and the forward output itself, handed to backward rules.
pub struct BackwardCtx<'a, T> {
    pub grad: &'a [T],
    pub output: &'a [T],
}

/// Backward rule: one optional gradient buffer per recorded input.
pub type BackwardFn<T> = Box<dyn Fn(&BackwardCtx<'_, T>) -> Vec<Option<Vec<T>>>>;

pub(crate) struct OpRecord<T: Element> {
    pub(crate) name: &'static str,
    pub(crate) inputs: Vec<Tensor<T>>,
    pub(crate) backward: BackwardFn<T>,
}

struct Node<T: Element> {
    id: usize,
    shape: Shape,
    data: Vec<T>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<T>>>,
    op: Option<OpRecord<T>>,
}

/// Rank-4 tensor handle. Cloning is cheap and shares the underlying node.
pub struct Tensor<T: Element> {
    node: Rc<Node<T>>,
}

impl<T: Element> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            node: Rc::clone(&self.node),
        }
    }
}

impl<T: Element> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("dtype", &T::NAME)
            .field("shape", &self.node.shape)
            .field("requires_grad", &self.node.requires_grad)
            .field("op", &self.node.op.as_ref().map(|o| o.name))
            .finish()
    }
}

impl<T: Element> Tensor<T> {
    fn build(shape: Shape, data: Vec<T>, requires_grad: bool, op: Option<OpRecord<T>>) -> Self {
        debug_assert_eq!(data.len(), shape.numel());
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data,
                requires_grad,
                grad: RefCell::new(None),
                op,
            }),
        }
    }

    /// Constant leaf (no gradient).
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        Self::leaf(shape, data, false)
    }

    /// Leaf tensor, optionally tracked for gradients.
    pub fn leaf(shape: Shape, data: Vec<T>, requires_grad: bool) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::Usage(format!(
                "buffer of {} elements does not fit shape {shape}",
                data.len()
            )));
        }
        Ok(Self::build(shape, data, requires_grad, None))
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Self::build(shape, vec![value; shape.numel()], false, None)
    }

    pub fn scalar(value: T) -> Self {
        Self::full(Shape::scalar(), value)
    }

    pub fn from_f64s(shape: Shape, values: &[f64]) -> Result<Self> {
        Self::from_vec(shape, values.iter().map(|&v| T::from_f64(v)).collect())
    }

    /// Result of an operation. The backward rule is kept only when some input
    /// requires gradients; otherwise the output is a plain constant.
    pub fn from_op(
        name: &'static str,
        shape: Shape,
        data: Vec<T>,
        inputs: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Self {
        let requires_grad = inputs.iter().any(|t| t.requires_grad());
        let op = requires_grad.then(|| OpRecord {
            name,
            inputs,
            backward,
        });
        Self::build(shape, data, requires_grad, op)
    }

    pub fn shape(&self) -> Shape {
        self.node.shape
    }

    pub fn numel(&self) -> usize {
        self.node.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.node.data
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.node.data.clone()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.node.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.node.op.is_none()
    }

    pub(crate) fn id(&self) -> usize {
        self.node.id
    }

    pub(crate) fn op(&self) -> Option<&OpRecord<T>> {
        self.node.op.as_ref()
    }

    /// Name of the operation that produced this tensor, if it is on a tape.
    pub fn op_name(&self) -> Option<&'static str> {
        self.node.op.as_ref().map(|o| o.name)
    }

    /// Accumulated gradient of a leaf.
    pub fn grad(&self) -> Option<Ref<'_, Vec<T>>> {
        Ref::filter_map(self.node.grad.borrow(), |g| g.as_ref()).ok()
    }

    pub fn zero_grad(&self) {
        self.node.grad.borrow_mut().take();
    }

    pub(crate) fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.node.grad.borrow_mut();
        match slot.as_mut() {
            Some(buf) => buf.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> T {
        self.node.data[0]
    }

    /// Copy of the data as a fresh leaf with no history.
    pub fn detach(&self) -> Self {
        Self::build(self.shape(), self.to_vec(), false, None)
    }

    /// Fresh leaf with the same data and the requested gradient tracking.
    pub fn to_leaf(&self, requires_grad: bool) -> Self {
        Self::build(self.shape(), self.to_vec(), requires_grad, None)
    }

    /// Element-type conversion; the result is a leaf.
    pub fn cast<U: Element>(&self, requires_grad: bool) -> Tensor<U> {
        let data = self.node.data.iter().map(|v| U::from_f64(v.as_f64())).collect();
        Tensor::build(self.shape(), data, requires_grad, None)
    }

    pub fn all_finite(&self) -> bool {
        self.node.data.iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.node.data[self.node.shape.index(n, c, h, w)]
    }
}
