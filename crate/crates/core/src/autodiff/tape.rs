use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::tensor::{dims_str, Scalar, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Maps the output gradient, parent values and own value to one optional
/// gradient per parent (`None` for parents that receive nothing).
pub(crate) type BackwardFn<T> = Box<dyn Fn(&Tensor<T>, &[&Tensor<T>], &Tensor<T>) -> Result<Vec<Option<Tensor<T>>>>>;

struct Node<T> {
    value: Tensor<T>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<T>>,
}

/// Define-by-run record of tensor operations.
///
/// Nodes are appended in evaluation order, so every parent id is smaller than
/// its consumer's id and the reverse sweep is a single pass over the node list.
pub struct Tape<T = f64> {
    nodes: RefCell<Vec<Node<T>>>,
    params: RefCell<Vec<(String, Var)>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: RefCell::new(Vec::new()), params: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a leaf value.
    pub fn leaf(&self, value: Tensor<T>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, parents: Vec::new(), backward: None });
        Var(nodes.len() - 1)
    }

    /// Records a named parameter leaf; see [`Tape::params`].
    pub fn named_leaf(&self, name: &str, value: Tensor<T>) -> Var {
        let v = self.leaf(value);
        self.params.borrow_mut().push((name.to_string(), v));
        v
    }

    /// Named leaves in registration order.
    pub fn params(&self) -> Vec<(String, Var)> {
        self.params.borrow().clone()
    }

    pub fn value(&self, v: Var) -> Tensor<T> {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn with_value<R>(&self, v: Var, f: impl FnOnce(&Tensor<T>) -> R) -> R {
        f(&self.nodes.borrow()[v.0].value)
    }

    pub(crate) fn record(
        &self,
        parents: &[Var],
        forward: impl FnOnce(&[&Tensor<T>]) -> Result<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let inputs: Vec<&Tensor<T>> = parents.iter().map(|p| &nodes[p.0].value).collect();
            forward(&inputs)?
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, parents: parents.iter().map(|p| p.0).collect(), backward: Some(backward) });
        Ok(Var(nodes.len() - 1))
    }

    /// Reverse sweep from `output` seeded with `seed`.
    ///
    /// Each node is visited once, in reverse recording order; gradients from
    /// multiple consumers are summed.
    pub fn backward(&self, output: Var, seed: &Tensor<T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let out_dims = nodes[output.0].value.dims();
        if seed.dims() != out_dims {
            return Err(Error::shape(
                "backward",
                format!("seed {} vs output {}", dims_str(seed.dims()), dims_str(out_dims)),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed.clone());
        for id in (0..=output.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Some(bw) = &node.backward {
                let inputs: Vec<&Tensor<T>> = node.parents.iter().map(|&p| &nodes[p].value).collect();
                let pgrads = bw(&g, &inputs, &node.value)?;
                debug_assert_eq!(pgrads.len(), node.parents.len());
                for (&p, pg) in node.parents.iter().zip(pgrads) {
                    let Some(pg) = pg else { continue };
                    match &mut grads[p] {
                        Some(acc) => acc.add_assign(&pg)?,
                        slot @ None => *slot = Some(pg),
                    }
                }
            }
            grads[id] = Some(g);
        }
        let dims = nodes.iter().map(|n| n.value.dims().to_vec()).collect();
        Ok(Gradients { grads, dims })
    }
}

/// Result of [`Tape::backward`]: one gradient per recorded node.
pub struct Gradients<T = f64> {
    grads: Vec<Option<Tensor<T>>>,
    dims: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of `v`; zeros when `v` did not influence the output.
    pub fn get(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.dims[v.0]),
        }
    }

    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Tensor<T> {
        self.grads[v.0].take().unwrap_or_else(|| Tensor::zeros(&self.dims[v.0]))
    }
}
