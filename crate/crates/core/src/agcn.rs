//! Anchor graph convolution.
//!
//! Each view owns an unshared network that propagates the anchors over the
//! view's m×m operator `Â`: `F⁽⁰⁾ = U`, `F⁽ˡ⁺¹⁾ = φ(Â F⁽ˡ⁾ W⁽ˡ⁾)` with ReLU on
//! hidden layers and a row softmax on the last, so every row of `F` is a
//! distribution over the `c` clusters.

use rand::Rng;

use crate::ad::{Bindings, Matrix, ParamStore, Tape, Var};
use crate::embed::{Activation, Mlp};
use crate::error::{shape_err, Result};

pub const DEFAULT_HIDDEN: usize = 32;

/// Weights of one view's convolution stack `[d_z → hidden… → c]`, no biases.
#[derive(Debug, Clone)]
pub struct AgcnParams {
    net: Mlp,
}

impl AgcnParams {
    pub fn new(
        store: &mut ParamStore,
        view: usize,
        in_dim: usize,
        hidden: &[usize],
        clusters: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut widths = vec![in_dim];
        widths.extend_from_slice(hidden);
        widths.push(clusters);
        Self {
            net: Mlp::new(
                store,
                &format!("agcn{view}"),
                &widths,
                false,
                Activation::Relu,
                Activation::Softmax,
                rng,
            ),
        }
    }

    /// One network per view.
    pub fn per_view(
        store: &mut ParamStore,
        views: usize,
        in_dim: usize,
        hidden: &[usize],
        clusters: usize,
        rng: &mut impl Rng,
    ) -> Vec<Self> {
        (0..views)
            .map(|a| Self::new(store, a, in_dim, hidden, clusters, rng))
            .collect()
    }

    pub fn widths(&self) -> &[usize] {
        self.net.widths()
    }

    pub fn clusters(&self) -> usize {
        self.net.out_width()
    }

    pub fn weights(&self) -> impl Iterator<Item = crate::ad::ParamId> + '_ {
        self.net.layers().iter().map(|l| l.weight)
    }
}

/// Cluster distributions `F` (m×c) of the anchors `u` under operator `a_hat`.
pub fn agcn_forward(
    tape: &mut Tape,
    a_hat: &Matrix,
    u: Var,
    net: &AgcnParams,
    params: &Bindings,
) -> Result<Var> {
    let (m, d) = tape.value(u).shape();
    if a_hat.shape() != (m, m) {
        return shape_err(
            "agcn",
            format!("operator is {}x{} for {m} anchors", a_hat.rows(), a_hat.cols()),
        );
    }
    if d != net.net.in_width() {
        return shape_err(
            "agcn",
            format!("anchors have width {d}, network expects {}", net.net.in_width()),
        );
    }
    let a = tape.constant(a_hat.clone());
    let layers = net.net.layers();
    let last = layers.len() - 1;
    let mut h = u;
    for (l, layer) in layers.iter().enumerate() {
        let spread = tape.matmul(a, h)?;
        h = tape.matmul(spread, params.var(layer.weight))?;
        h = if l == last {
            net.net.output_activation().apply(tape, h)
        } else {
            net.net.hidden_activation().apply(tape, h)
        };
    }
    Ok(h)
}
