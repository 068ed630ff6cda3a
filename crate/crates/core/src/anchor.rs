//! Learnable anchors.
//!
//! Initial anchors `Û` are k-means centroids of the detached fusion
//! embedding. Two small perceptrons map `Û` to a mean `μ` and a positive
//! deviation `σ`; with a fixed standard-normal draw `ϵ` the perturbation is
//! `ε = μ + σ ⊙ ϵ` and the anchors used downstream are `U = Û + ε`. Gradients
//! reach the perceptrons through `ε` only.
//!
//! The anchor learning loss is the mean row entropy of the Student-t
//! sample-to-anchor similarity `Q`, summed over views. Driving it down makes
//! every sample commit to one anchor; if all anchors coincide every row of
//! `Q` is uniform and the loss sits at its maximum `log m`, which is what
//! keeps the structure-preservation term from collapsing the embedding.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::ad::{Bindings, Matrix, ParamStore, Tape, Var};
use crate::embed::{Activation, Mlp};
use crate::error::{DmacError, Result};
use crate::eval::kmeans;

/// Floor applied to `q` inside the logarithm of the entropy.
pub const LOG_FLOOR: f64 = 1e-12;

/// k-means restarts used when (re)initializing anchors.
pub const INIT_RESTARTS: usize = 3;

/// `⌊√(n·c)⌋`, clamped to `[c, n]`.
pub fn anchor_count(n: usize, c: usize) -> usize {
    let prod = n * c;
    let mut r = (prod as f64).sqrt() as usize;
    // correct the float estimate to the exact integer square root
    while r * r > prod {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= prod {
        r += 1;
    }
    r.max(c).min(n)
}

/// k-means centroids of `z` used as the initial anchors `Û`.
pub fn init_anchors(z: &Matrix, m: usize, seed: u64) -> Result<Matrix> {
    if m == 0 || m > z.rows() {
        return Err(DmacError::Argument(format!(
            "anchor count must lie in [1, n], got m = {m} with n = {}",
            z.rows()
        )));
    }
    Ok(kmeans(z, m, seed, INIT_RESTARTS)?.centroids)
}

/// Anchor state that persists between re-initializations.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorState {
    /// Initial anchors `Û`; never differentiated.
    pub u_hat: Matrix,
    /// Standard-normal base draw `ϵ`, same shape as `Û`.
    pub epsilon_base: Matrix,
}

impl AnchorState {
    /// Pairs `u_hat` with a fresh `ϵ ~ N(0, I)`.
    pub fn draw(u_hat: Matrix, rng: &mut impl Rng) -> Self {
        let epsilon_base = Matrix::from_fn(u_hat.rows(), u_hat.cols(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        Self { u_hat, epsilon_base }
    }

    pub fn m(&self) -> usize {
        self.u_hat.rows()
    }
}

/// The two perceptrons producing `μ` and the pre-softplus `σ`.
#[derive(Debug, Clone)]
pub struct PerturbNet {
    pub mu: Mlp,
    pub sigma: Mlp,
}

impl PerturbNet {
    /// Both nets are `[d → d → d]` with a ReLU hidden layer and Glorot init.
    pub fn new(store: &mut ParamStore, dim: usize, rng: &mut impl Rng) -> Self {
        let widths = [dim, dim, dim];
        Self {
            mu: Mlp::new(
                store,
                "perturb.mu",
                &widths,
                true,
                Activation::Relu,
                Activation::Identity,
                rng,
            ),
            sigma: Mlp::new(
                store,
                "perturb.sigma",
                &widths,
                true,
                Activation::Relu,
                Activation::Identity,
                rng,
            ),
        }
    }
}

/// Tape handles for one evaluation of the perturbation generator.
#[derive(Debug, Clone, Copy)]
pub struct Perturbation {
    pub mu: Var,
    pub sigma: Var,
    pub epsilon: Var,
}

/// `μ = MLP_μ(Û)`, `σ = softplus(MLP_σ(Û))`, `ε = μ + σ ⊙ ϵ`.
pub fn generate_perturbation(
    tape: &mut Tape,
    u_hat: Var,
    net: &PerturbNet,
    params: &Bindings,
    epsilon_base: &Matrix,
) -> Result<Perturbation> {
    let mu = net.mu.forward(tape, params, u_hat)?;
    let raw = net.sigma.forward(tape, params, u_hat)?;
    let sigma = tape.softplus(raw);
    let base = tape.constant(epsilon_base.clone());
    let spread = tape.mul(sigma, base)?;
    let epsilon = tape.add(mu, spread)?;
    Ok(Perturbation { mu, sigma, epsilon })
}

/// `U = Û + ε`.
pub fn perturbed_anchors(tape: &mut Tape, u_hat: Var, epsilon: Var) -> Result<Var> {
    tape.add(u_hat, epsilon)
}

/// Student-t similarity `q_ij ∝ (1 + ‖z_i − u_j‖²)⁻¹`, rows normalized to sum to 1.
pub fn anchor_similarity(tape: &mut Tape, z: Var, u: Var) -> Result<Var> {
    let d = tape.sq_dist(z, u)?;
    let k = tape.recip_one_plus(d);
    Ok(tape.normalize_rows(k))
}

/// Mean row entropy `−(1/n) Σ_i Σ_j q_ij log q_ij` of one view's similarity.
pub fn view_anchor_loss(tape: &mut Tape, q: Var) -> Result<Var> {
    let n = tape.value(q).rows();
    let logs = tape.ln_clamped(q, LOG_FLOOR);
    let terms = tape.mul(q, logs)?;
    let total = tape.sum(terms);
    Ok(tape.scale(total, -1.0 / n as f64))
}

/// Anchor learning loss summed over views.
pub fn anchor_learning_loss(tape: &mut Tape, qs: &[Var]) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for &q in qs {
        let l = view_anchor_loss(tape, q)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, l)?,
            None => l,
        });
    }
    acc.ok_or_else(|| DmacError::Argument("anchor loss needs at least one view".into()))
}
