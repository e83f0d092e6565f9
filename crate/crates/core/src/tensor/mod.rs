//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! Every operation that participates in training records its inputs and a
//! backward closure on the output node. Node ids increase monotonically, so
//! the backward graph is acyclic by construction and visiting reachable nodes
//! in descending id order is a valid reverse topological order.

mod gradcheck;
pub mod ops;
mod optim;
#[cfg(test)]
mod tests;

pub use gradcheck::check_gradients;
pub use ops::*;
pub use optim::Adam;

use std::cell::{Cell, RefCell};
use std::collections::HashSet;
use std::rc::Rc;

use crate::error::{Error, Result};

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn fresh_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Backward closure: receives the output node, reads its gradient and data,
/// and accumulates gradients into the captured input tensors.
type BackwardFn = Box<dyn Fn(&Tensor)>;

pub(crate) struct TensorData {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    /// True for leaves explicitly marked trainable and for any node with a
    /// trainable ancestor.
    needs_grad: bool,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
}

#[derive(Clone)]
pub struct Tensor {
    inner: Rc<TensorData>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("needs_grad", &self.inner.needs_grad)
            .finish()
    }
}

impl Tensor {
    fn leaf(shape: Vec<usize>, data: Vec<f64>, needs_grad: bool) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        Tensor {
            inner: Rc::new(TensorData {
                id: fresh_id(),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                needs_grad,
                parents: Vec::new(),
                backward: None,
            }),
        }
    }

    /// Constant tensor (no gradient tracking).
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::leaf(shape.to_vec(), data, false)
    }

    /// Trainable leaf tensor.
    pub fn variable(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::leaf(shape.to_vec(), data, true)
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::from_vec(shape, vec![0.0; shape.iter().product()])
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(&[1], vec![v])
    }

    /// Interior node produced by an operation. If no parent needs gradients
    /// the graph edges are dropped and the result is a plain constant.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        let needs_grad = parents.iter().any(|p| p.inner.needs_grad);
        if !needs_grad {
            return Tensor::leaf(shape, data, false);
        }
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(TensorData {
                id: fresh_id(),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                needs_grad: true,
                parents,
                backward: Some(backward),
            }),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn len(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rows(&self) -> usize {
        self.inner.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.inner.shape[1]
    }

    pub fn needs_grad(&self) -> bool {
        self.inner.needs_grad
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    pub fn item(&self) -> f64 {
        let d = self.inner.data.borrow();
        assert_eq!(d.len(), 1, "item() on non-scalar tensor");
        d[0]
    }

    pub fn with_data<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        f(&self.inner.data.borrow())
    }

    /// Overwrite the stored values in place (optimizer updates, gradient
    /// checking perturbations). Only meaningful on leaves.
    pub fn set_data(&self, data: &[f64]) {
        let mut d = self.inner.data.borrow_mut();
        assert_eq!(d.len(), data.len());
        d.copy_from_slice(data);
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[f64]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(existing) => {
                for (e, v) in existing.iter_mut().zip(g) {
                    *e += v;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Cut the graph: same values, no gradient history.
    pub fn detach(&self) -> Tensor {
        Tensor::from_vec(&self.inner.shape, self.to_vec())
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "backward",
                lhs: self.inner.shape.clone(),
                rhs: vec![1],
            });
        }
        if self.item().is_nan() {
            return Err(Error::NonFinite("backward root".into()));
        }
        self.accumulate_grad(&[1.0]);

        let mut nodes: Vec<Tensor> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !t.inner.needs_grad || !seen.insert(t.inner.id) {
                continue;
            }
            for p in &t.inner.parents {
                stack.push(p.clone());
            }
            nodes.push(t);
        }
        nodes.sort_by(|a, b| b.inner.id.cmp(&a.inner.id));

        for node in &nodes {
            if let Some(back) = &node.inner.backward {
                if node.inner.grad.borrow().is_some() {
                    back(node);
                }
            }
        }
        Ok(())
    }

    pub(crate) fn grad_ref(&self) -> std::cell::Ref<'_, Option<Vec<f64>>> {
        self.inner.grad.borrow()
    }
}

/// Named trainable tensor.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub tensor: Tensor,
    pub name: String,
    pub trainable: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, shape: &[usize], data: Vec<f64>) -> Parameter {
        Parameter {
            tensor: Tensor::variable(shape, data),
            name: name.into(),
            trainable: true,
        }
    }

    pub fn frozen(name: impl Into<String>, shape: &[usize], data: Vec<f64>) -> Parameter {
        Parameter {
            tensor: Tensor::from_vec(shape, data),
            name: name.into(),
            trainable: false,
        }
    }
}
