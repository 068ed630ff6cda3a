//! End-to-end training and grid search.
//!
//! One epoch: encode every view and fuse; on refresh epochs re-cluster the
//! detached fusion embedding into fresh anchors `Û` and redraw `ϵ`; perturb
//! the anchors; build each view's anchor graph from detached values; run the
//! anchor convolutions; evaluate the joint loss; backpropagate and take one
//! RMSprop step over every parameter. Labels come from k-means on the final
//! fusion embedding.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ad::{Bindings, Matrix, OptimizerConfig, ParamStore, RmsProp, Tape, Var};
use crate::agcn::{agcn_forward, AgcnParams, DEFAULT_HIDDEN};
use crate::anchor::{
    anchor_count, anchor_similarity, generate_perturbation, init_anchors, perturbed_anchors,
    view_anchor_loss, AnchorState, PerturbNet,
};
use crate::dataio::MultiViewDataset;
use crate::embed::{encode_view, fuse, EncoderSpec, Mlp};
use crate::error::{DmacError, Result};
use crate::eval::{accuracy, kmeans, nmi};
use crate::graph::{
    effective_neighbors, propagation_operator, solve_anchor_graph, AnchorGraph, DEFAULT_NEIGHBORS,
};
use crate::losses::{consistency_loss, joint_loss, structure_preservation_loss, LossWeights};

/// Trade-off values searched by default for both `α` and `β`.
pub const DEFAULT_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

/// Environment variable capping the worker threads of [`grid_search`].
pub const THREADS_ENV: &str = "DMAC_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    /// Anchor count; `None` uses `⌊√(n·c)⌋`.
    pub anchors: Option<usize>,
    pub k_neighbors: usize,
    pub encoder: EncoderSpec,
    pub agcn_hidden: Vec<usize>,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub anchor_refresh_period: usize,
    pub final_restarts: usize,
    pub seed: u64,
    pub disable_perturbation: bool,
    pub disable_consistency: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.0,
            alpha_grid: DEFAULT_GRID.to_vec(),
            beta_grid: DEFAULT_GRID.to_vec(),
            anchors: None,
            k_neighbors: DEFAULT_NEIGHBORS,
            encoder: EncoderSpec::default(),
            agcn_hidden: vec![DEFAULT_HIDDEN],
            optimizer: OptimizerConfig::default(),
            epochs: 100,
            anchor_refresh_period: 20,
            final_restarts: 10,
            seed: 0,
            disable_perturbation: false,
            disable_consistency: false,
        }
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> DmacError {
    DmacError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl TrainConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights().validate()?;
        self.optimizer.validate()?;
        if self.epochs == 0 {
            return Err(config_err("epochs", "must be at least 1"));
        }
        if self.anchor_refresh_period == 0 {
            return Err(config_err("anchor_refresh_period", "must be at least 1"));
        }
        if self.k_neighbors == 0 {
            return Err(config_err("k_neighbors", "must be at least 1"));
        }
        if self.final_restarts == 0 {
            return Err(config_err("final_restarts", "must be at least 1"));
        }
        if self.anchors == Some(0) {
            return Err(config_err("anchors", "must be at least 1"));
        }
        if self.encoder.embed_dim == 0 || self.encoder.hidden.contains(&0) {
            return Err(config_err("encoder", "layer widths must be positive"));
        }
        if self.agcn_hidden.contains(&0) {
            return Err(config_err("agcn_hidden", "layer widths must be positive"));
        }
        for (field, grid) in [("alpha_grid", &self.alpha_grid), ("beta_grid", &self.beta_grid)] {
            if grid.is_empty() {
                return Err(config_err(field, "grid must not be empty"));
            }
            if grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(config_err(field, "entries must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    /// Anchor count used for a dataset of `n` samples and `c` clusters.
    pub fn anchor_count_for(&self, n: usize, c: usize) -> Result<usize> {
        match self.anchors {
            None => Ok(anchor_count(n, c)),
            Some(m) if m <= n => Ok(m),
            Some(m) => Err(config_err(
                "anchors",
                format!("{m} anchors exceed the {n} samples"),
            )),
        }
    }
}

/// Loss components of one epoch, evaluated before that epoch's update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub total: f64,
    pub anchor: f64,
    pub consistency: f64,
    pub structure: f64,
    pub anchor_per_view: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub nmi: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub z_final: Matrix,
    pub labels: Vec<usize>,
    pub loss_history: Vec<EpochLoss>,
    pub metrics: Option<Metrics>,
    pub epoch_seconds: Vec<f64>,
    pub setup_seconds: f64,
    pub anchor_count: usize,
    pub neighbors: usize,
    /// `Û` and `ϵ` in effect during the last epoch.
    pub anchors: AnchorState,
    /// Perturbed anchors `U` of the last epoch.
    pub u_final: Matrix,
    /// Anchor graphs of the last epoch, one per view.
    pub graphs: Vec<AnchorGraph>,
}

impl TrainResult {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().map_or(f64::NAN, |l| l.total)
    }

    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.epoch_seconds.is_empty() {
            0.0
        } else {
            self.epoch_seconds.iter().sum::<f64>() / self.epoch_seconds.len() as f64
        }
    }
}

/// All trainable networks of one session.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ParamStore,
    encoders: Vec<Mlp>,
    perturb: PerturbNet,
    agcns: Vec<AgcnParams>,
}

/// What the forward pass holds fixed.
#[derive(Debug, Clone, Copy)]
pub struct ForwardContext<'a> {
    pub anchors: &'a AnchorState,
    /// Precomputed graphs; `None` solves them from the current values.
    pub graphs: Option<&'a [AnchorGraph]>,
    pub neighbors: usize,
    pub weights: LossWeights,
    pub perturb: bool,
    pub consistency: bool,
}

/// Tape handles of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub z_views: Vec<Var>,
    pub z: Var,
    pub u: Var,
    pub q: Vec<Var>,
    pub f: Vec<Var>,
    pub graphs: Vec<AnchorGraph>,
    pub anchor_per_view: Vec<Var>,
    pub anchor: Var,
    pub consistency: Var,
    pub structure: Var,
    pub total: Var,
}

impl Model {
    pub fn new(view_dims: &[usize], clusters: usize, cfg: &TrainConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let encoders = cfg.encoder.build(&mut params, view_dims, &mut rng);
        let d = cfg.encoder.embed_dim;
        let perturb = PerturbNet::new(&mut params, d, &mut rng);
        let agcns = AgcnParams::per_view(
            &mut params,
            view_dims.len(),
            d,
            &cfg.agcn_hidden,
            clusters,
            &mut rng,
        );
        Self {
            params,
            encoders,
            perturb,
            agcns,
        }
    }

    pub fn views(&self) -> usize {
        self.encoders.len()
    }

    /// Detached per-view embeddings and their fusion.
    pub fn embed(&self, views: &[Matrix]) -> Result<(Vec<Matrix>, Matrix)> {
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let xs: Vec<Var> = views.iter().map(|x| tape.constant(x.clone())).collect();
        let mut zs = Vec::with_capacity(xs.len());
        for (x, enc) in xs.into_iter().zip(&self.encoders) {
            zs.push(encode_view(&mut tape, x, enc, &b)?);
        }
        let z = fuse(&mut tape, &zs)?;
        let per_view = zs.iter().map(|&v| tape.value(v).clone()).collect();
        Ok((per_view, tape.value(z).clone()))
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bindings,
        views: &[Matrix],
        ctx: &ForwardContext<'_>,
    ) -> Result<ForwardPass> {
        if views.len() != self.views() {
            return Err(DmacError::Argument(format!(
                "model has {} encoders, got {} views",
                self.views(),
                views.len()
            )));
        }
        let mut z_views = Vec::with_capacity(views.len());
        for (x, enc) in views.iter().zip(&self.encoders) {
            let xv = tape.constant(x.clone());
            z_views.push(encode_view(tape, xv, enc, params)?);
        }
        let z = fuse(tape, &z_views)?;

        let u_hat = tape.constant(ctx.anchors.u_hat.clone());
        let u = if ctx.perturb {
            let p = generate_perturbation(tape, u_hat, &self.perturb, params, &ctx.anchors.epsilon_base)?;
            perturbed_anchors(tape, u_hat, p.epsilon)?
        } else {
            u_hat
        };

        let graphs: Vec<AnchorGraph> = match ctx.graphs {
            Some(g) => {
                if g.len() != views.len() {
                    return Err(DmacError::Argument(format!(
                        "{} graphs for {} views",
                        g.len(),
                        views.len()
                    )));
                }
                g.to_vec()
            }
            None => {
                let u_val = tape.value(u);
                z_views
                    .iter()
                    .map(|&za| solve_anchor_graph(tape.value(za), u_val, ctx.neighbors))
                    .collect::<Result<_>>()?
            }
        };

        let mut q = Vec::with_capacity(views.len());
        let mut anchor_per_view = Vec::with_capacity(views.len());
        for &za in &z_views {
            let qa = anchor_similarity(tape, za, u)?;
            anchor_per_view.push(view_anchor_loss(tape, qa)?);
            q.push(qa);
        }
        let anchor = sum_vars(tape, &anchor_per_view)?;

        let mut f = Vec::new();
        let consistency = if ctx.consistency {
            for (g, net) in graphs.iter().zip(&self.agcns) {
                let a_hat = propagation_operator(g);
                f.push(agcn_forward(tape, &a_hat, u, net, params)?);
            }
            consistency_loss(tape, &f)?
        } else {
            tape.constant(Matrix::zeros(1, 1))
        };

        let sp: Vec<Var> = graphs
            .iter()
            .map(|g| structure_preservation_loss(tape, z, g))
            .collect::<Result<_>>()?;
        let structure = sum_vars(tape, &sp)?;
        let total = joint_loss(tape, anchor, consistency, structure, ctx.weights)?;

        Ok(ForwardPass {
            z_views,
            z,
            u,
            q,
            f,
            graphs,
            anchor_per_view,
            anchor,
            consistency,
            structure,
            total,
        })
    }
}

fn sum_vars(tape: &mut Tape, xs: &[Var]) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for &x in xs {
        acc = Some(match acc {
            Some(s) => tape.add(s, x)?,
            None => x,
        });
    }
    acc.ok_or_else(|| DmacError::Argument("nothing to sum".into()))
}

/// Derived seed for an auxiliary random stream.
fn sub_seed(seed: u64, stream: u64, step: u64) -> u64 {
    let mut x = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ step.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 31;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 29)
}

const STREAM_PARAMS: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_ANCHORS: u64 = 3;
const STREAM_FINAL: u64 = 4;

fn check_finite(pass: &ForwardPass, tape: &Tape, epoch: usize) -> Result<EpochLoss> {
    let anchor_per_view: Vec<f64> = pass.anchor_per_view.iter().map(|&v| tape.scalar(v)).collect();
    let loss = EpochLoss {
        total: tape.scalar(pass.total),
        anchor: tape.scalar(pass.anchor),
        consistency: tape.scalar(pass.consistency),
        structure: tape.scalar(pass.structure),
        anchor_per_view,
    };
    for (component, x) in [
        ("anchor learning loss", loss.anchor),
        ("consistency loss", loss.consistency),
        ("structure preservation loss", loss.structure),
        ("joint loss", loss.total),
    ] {
        if !x.is_finite() {
            return Err(DmacError::NonFinite {
                component: component.into(),
                epoch,
            });
        }
    }
    Ok(loss)
}

/// Trains one session on `data` with `cfg`.
pub fn train(data: &MultiViewDataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let setup = Instant::now();
    let (n, c) = (data.n(), data.c());
    let m = cfg.anchor_count_for(n, c)?;
    let neighbors = effective_neighbors(cfg.k_neighbors, m);
    if neighbors != cfg.k_neighbors {
        log::info!("using {neighbors} neighbors per sample with {m} anchors");
    }
    let views = data.views();
    let mut model = Model::new(&data.dims(), c, cfg, sub_seed(cfg.seed, STREAM_PARAMS, 0));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_NOISE, 0));
    let mut optimizer = RmsProp::new(cfg.optimizer);
    let weights = cfg.weights();
    let setup_seconds = setup.elapsed().as_secs_f64();

    let mut anchors: Option<AnchorState> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut epoch_seconds = Vec::with_capacity(cfg.epochs);
    let mut last_graphs = Vec::new();
    let mut u_final = Matrix::zeros(0, 0);

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut tape = Tape::new();
        let bindings = model.params.bind(&mut tape);

        if epoch % cfg.anchor_refresh_period == 0 {
            let (_, z) = model.embed(views)?;
            let u_hat = init_anchors(&z, m, sub_seed(cfg.seed, STREAM_ANCHORS, epoch as u64))?;
            anchors = Some(AnchorState::draw(u_hat, &mut noise_rng));
        }
        let state = anchors.as_ref().expect("anchors initialized on epoch 0");
        let ctx = ForwardContext {
            anchors: state,
            graphs: None,
            neighbors,
            weights,
            perturb: !cfg.disable_perturbation,
            consistency: !cfg.disable_consistency,
        };
        let pass = model.forward(&mut tape, &bindings, views, &ctx)?;
        let loss = check_finite(&pass, &tape, epoch)?;
        log::debug!(
            "epoch {epoch}: L = {:.6} (AL {:.6}, CM {:.6}, SP {:.6})",
            loss.total,
            loss.anchor,
            loss.consistency,
            loss.structure
        );
        history.push(loss);
        if epoch + 1 == cfg.epochs {
            u_final = tape.value(pass.u).clone();
            last_graphs = pass.graphs.clone();
        }

        let mut grads = tape.backward(pass.total)?;
        let grads = bindings.collect(&mut grads);
        optimizer.step(model.params.values_mut(), &grads)?;
        epoch_seconds.push(start.elapsed().as_secs_f64());
    }

    let (_, z_final) = model.embed(views)?;
    let clustering = kmeans(
        &z_final,
        c,
        sub_seed(cfg.seed, STREAM_FINAL, 0),
        cfg.final_restarts,
    )?;
    let metrics = match data.labels() {
        Some(truth) => Some(Metrics {
            acc: accuracy(&clustering.labels, truth)?,
            nmi: nmi(&clustering.labels, truth)?,
        }),
        None => None,
    };
    if let Some(mx) = metrics {
        log::info!("ACC {:.4}, NMI {:.4}", mx.acc, mx.nmi);
    }

    Ok(TrainResult {
        z_final,
        labels: clustering.labels,
        loss_history: history,
        metrics,
        epoch_seconds,
        setup_seconds,
        anchor_count: m,
        neighbors,
        anchors: anchors.expect("at least one epoch"),
        u_final,
        graphs: last_graphs,
    })
}

/// One cell of a grid search.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub result: TrainResult,
}

/// Worker count from [`THREADS_ENV`], falling back to the available parallelism.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()))
}

/// Runs `f` on a pool sized by [`worker_threads`].
pub fn with_worker_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .map_err(|e| DmacError::Argument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Trains every `(α, β)` of the configured grids with the same seed.
///
/// Cells are sorted by accuracy (then NMI) when labels are known, otherwise
/// by final joint loss; ties keep grid order.
pub fn grid_search(data: &MultiViewDataset, cfg: &TrainConfig) -> Result<Vec<GridCell>> {
    cfg.validate()?;
    let cells: Vec<(f64, f64)> = cfg
        .alpha_grid
        .iter()
        .flat_map(|&a| cfg.beta_grid.iter().map(move |&b| (a, b)))
        .collect();
    let results: Vec<Result<GridCell>> = with_worker_pool(|| {
        cells
            .par_iter()
            .map(|&(alpha, beta)| {
                let cell_cfg = TrainConfig {
                    alpha,
                    beta,
                    ..cfg.clone()
                };
                train(data, &cell_cfg).map(|result| GridCell { alpha, beta, result })
            })
            .collect()
    })?;
    let mut out = results.into_iter().collect::<Result<Vec<_>>>()?;
    if data.labels().is_some() {
        out.sort_by(|x, y| {
            let (a, b) = (x.result.metrics.unwrap(), y.result.metrics.unwrap());
            b.acc.total_cmp(&a.acc).then(b.nmi.total_cmp(&a.nmi))
        });
    } else {
        out.sort_by(|x, y| x.result.final_loss().total_cmp(&y.result.final_loss()));
    }
    Ok(out)
}
