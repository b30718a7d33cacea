use std::collections::{HashMap, HashSet};

use super::{BackwardCtx, Element, Tensor};
use crate::error::{Error, Result};

/// Recorded operations reachable from a root, in topological order
/// (producers before consumers).
pub struct Tape<T: Element> {
    order: Vec<Tensor<T>>,
}

impl<T: Element> Tape<T> {
    pub fn record(root: &Tensor<T>) -> Self {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        // iterative post-order DFS; the bool marks "children already pushed"
        let mut stack = vec![(root.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if t.op().is_none() {
                continue;
            }
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            for input in t.op().map(|o| o.inputs.as_slice()).unwrap_or_default().iter().rev() {
                if input.op().is_some() && !seen.contains(&input.id()) {
                    stack.push((input.clone(), false));
                }
            }
        }
        Tape { order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn op_names(&self) -> Vec<&'static str> {
        self.order.iter().filter_map(|t| t.op_name()).collect()
    }

    /// True when every operation appears after all operations producing its inputs.
    pub fn is_topological(&self) -> bool {
        let mut pos = HashMap::new();
        for (i, t) in self.order.iter().enumerate() {
            pos.insert(t.id(), i);
        }
        self.order.iter().enumerate().all(|(i, t)| {
            t.op().unwrap().inputs.iter().all(|inp| match pos.get(&inp.id()) {
                Some(&j) => j < i,
                None => inp.op().is_none(),
            })
        })
    }
}

impl<T: Element> Tensor<T> {
    /// Reverse-mode sweep from a `1×1×1×1` loss. Leaf gradients accumulate
    /// across calls; callers reset them with [`Tensor::zero_grad`].
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 || self.shape() != super::Shape::scalar() {
            return Err(Error::Usage(format!(
                "backward needs a 1x1x1x1 loss, got {}",
                self.shape()
            )));
        }
        if self.op().is_none() {
            return Err(Error::Usage(
                "backward called on a tensor that is not on a tape".into(),
            ));
        }
        let tape = Tape::record(self);
        let mut pending: HashMap<usize, Vec<T>> = HashMap::new();
        pending.insert(self.id(), vec![T::one()]);
        for t in tape.order.iter().rev() {
            let Some(grad) = pending.remove(&t.id()) else {
                continue;
            };
            let op = t.op().unwrap();
            let grads = (op.backward)(&BackwardCtx {
                grad: &grad,
                output: t.data(),
            });
            debug_assert_eq!(grads.len(), op.inputs.len(), "backward arity of {}", op.name);
            for (input, g) in op.inputs.iter().zip(grads) {
                let Some(g) = g else { continue };
                if !input.requires_grad() {
                    continue;
                }
                debug_assert_eq!(g.len(), input.numel(), "gradient length from {}", op.name);
                if input.op().is_none() {
                    input.accumulate_grad(&g);
                } else {
                    match pending.get_mut(&input.id()) {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b),
                        None => {
                            pending.insert(input.id(), g);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
