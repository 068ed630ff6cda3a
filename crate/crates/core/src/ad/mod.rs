//! Dense matrices, a reverse-mode tape over them, and the RMSprop update.

pub mod matrix;
mod optim;
mod sparse;
mod tape;

pub use matrix::Matrix;
pub use optim::{OptimizerConfig, RmsProp};
pub use sparse::SparseRows;
pub use tape::{sigmoid, softmax_rows, softplus, Gradients, Tape, Var};

/// Flat store of trainable tensors addressed by [`ParamId`].
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    values: Vec<Matrix>,
    names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.values.push(value);
        self.names.push(name.into());
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    /// Pushes every parameter onto `tape` as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bindings {
        Bindings(self.values.iter().map(|v| tape.leaf(v.clone())).collect())
    }
}

/// Tape variables for each parameter of a [`ParamStore`], in store order.
#[derive(Debug, Clone)]
pub struct Bindings(Vec<Var>);

impl Bindings {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    /// Gradient buffers in store order.
    pub fn collect(&self, grads: &mut Gradients) -> Vec<Matrix> {
        self.0
            .iter()
            .map(|&v| grads.take(v).expect("bound parameter has a gradient"))
            .collect()
    }
}
