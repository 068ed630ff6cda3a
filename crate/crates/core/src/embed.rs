//! Per-view encoders and average fusion.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ad::{Bindings, Matrix, ParamId, ParamStore, Tape, Var};
use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Softmax,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => tape.relu(x),
            Activation::Softmax => tape.softmax_rows(x),
        }
    }
}

/// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..=bound))
}

/// One weight matrix with an optional bias row.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

/// Fully connected stack: hidden layers use one activation, the last layer another.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Dense>,
    widths: Vec<usize>,
    hidden: Activation,
    output: Activation,
}

impl Mlp {
    /// Registers the layer parameters for `widths = [in, h1, ..., out]` in `store`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        with_bias: bool,
        hidden: Activation,
        output: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| Dense {
                weight: store.add(format!("{name}.w{l}"), glorot_uniform(w[0], w[1], rng)),
                bias: with_bias.then(|| store.add(format!("{name}.b{l}"), Matrix::zeros(1, w[1]))),
            })
            .collect();
        Self {
            layers,
            widths: widths.to_vec(),
            hidden,
            output,
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn in_width(&self) -> usize {
        self.widths[0]
    }

    pub fn out_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn forward(&self, tape: &mut Tape, params: &Bindings, x: Var) -> Result<Var> {
        let width = tape.value(x).cols();
        if width != self.in_width() {
            return shape_err(
                "mlp",
                format!("input has {width} columns, layer expects {}", self.in_width()),
            );
        }
        let mut h = x;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            h = tape.matmul(h, params.var(layer.weight))?;
            if let Some(b) = layer.bias {
                h = tape.add_row(h, params.var(b))?;
            }
            let act = if l == last { self.output } else { self.hidden };
            h = act.apply(tape, h);
        }
        Ok(h)
    }
}

/// Encoder architecture shared by all views; only the input width differs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSpec {
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub activation: Activation,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            hidden: vec![256, 64],
            embed_dim: 32,
            activation: Activation::Relu,
        }
    }
}

impl EncoderSpec {
    pub fn widths(&self, input: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(input);
        w.extend_from_slice(&self.hidden);
        w.push(self.embed_dim);
        w
    }

    /// One unshared encoder per view.
    pub fn build(
        &self,
        store: &mut ParamStore,
        view_dims: &[usize],
        rng: &mut impl Rng,
    ) -> Vec<Mlp> {
        view_dims
            .iter()
            .enumerate()
            .map(|(a, &d)| {
                Mlp::new(
                    store,
                    &format!("encoder{a}"),
                    &self.widths(d),
                    true,
                    self.activation,
                    Activation::Identity,
                    rng,
                )
            })
            .collect()
    }
}

/// View-specific embedding `Z_a = encoder_a(X_a)`.
pub fn encode_view(tape: &mut Tape, x: Var, encoder: &Mlp, params: &Bindings) -> Result<Var> {
    encoder.forward(tape, params, x)
}

/// Fusion embedding `Z = (1/v) Σ_a Z_a`.
pub fn fuse(tape: &mut Tape, views: &[Var]) -> Result<Var> {
    match views {
        [] => shape_err("fuse", "no views to fuse"),
        [only] => Ok(*only),
        _ => tape.mean(views),
    }
}
