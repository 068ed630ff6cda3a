#![allow(dead_code)]
//! Helpers shared by the integration tests.

use dmac::ad::{Matrix, Tape};
use dmac::anchor::{init_anchors, AnchorState};
use dmac::dataio::{generate_synthetic, SyntheticSpec};
use dmac::embed::EncoderSpec;
use dmac::losses::LossWeights;
use dmac::trainer::{ForwardContext, Model, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Denominator floor of the relative error; central differences at `h = 1e-6`
/// carry about `1e-9` absolute roundoff on a loss of order 10.
pub const GRAD_FLOOR: f64 = 1e-3;

pub struct GradReport {
    pub worst: f64,
    pub checked: usize,
}

/// Largest relative error over every scalar parameter of a toy model.
pub fn joint_gradient_error(seed: u64) -> GradReport {
    let spec = SyntheticSpec {
        n: 12,
        c: 3,
        dims: vec![4, 6],
        spread: 3.0,
        noise: 0.5,
        seed,
    };
    let data = generate_synthetic(&spec).unwrap();
    let cfg = TrainConfig {
        encoder: EncoderSpec { hidden: vec![7], embed_dim: 5, ..EncoderSpec::default() },
        agcn_hidden: vec![4],
        ..TrainConfig::default()
    };
    let model = Model::new(&data.dims(), 3, &cfg, seed);
    let (_, z) = model.embed(data.views()).unwrap();
    let anchors = AnchorState::draw(init_anchors(&z, 4, seed).unwrap(), &mut ChaCha8Rng::seed_from_u64(seed));
    let weights = LossWeights::new(0.7, 0.3).unwrap();

    let loss = |params: &dmac::ad::ParamStore, graphs: Option<&[dmac::graph::AnchorGraph]>| {
        let ctx = ForwardContext { anchors: &anchors, graphs, neighbors: 2, weights, perturb: true, consistency: true };
        let mut m = model.clone();
        m.params = params.clone();
        let mut tape = Tape::new();
        let b = m.params.bind(&mut tape);
        let pass = m.forward(&mut tape, &b, data.views(), &ctx).unwrap();
        (tape, b, pass)
    };
    let (tape, b, pass) = loss(&model.params, None);
    let graphs = pass.graphs.clone();
    let mut grads = tape.backward(pass.total).unwrap();
    let analytic: Vec<Matrix> = b.collect(&mut grads);

    let h = 1e-6;
    let eval = |p: &dmac::ad::ParamStore| {
        let (t, _, pass) = loss(p, Some(&graphs));
        t.scalar(pass.total)
    };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (p, g) in analytic.iter().enumerate() {
        for e in 0..g.len() {
            let mut s = model.params.clone();
            s.values_mut()[p].as_mut_slice()[e] += h;
            let fp = eval(&s);
            s.values_mut()[p].as_mut_slice()[e] -= 2.0 * h;
            let fm = eval(&s);
            let fd = (fp - fm) / (2.0 * h);
            let a = g.as_slice()[e];
            let err = (a - fd).abs() / a.abs().max(fd.abs()).max(GRAD_FLOOR);
            worst = worst.max(err);
            checked += 1;
        }
    }
    GradReport { worst, checked }
}


/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (r, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (r + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// `Σ_j d_j s_j + γ s_j²`.
pub fn qp_objective(d: &[f64], gamma: f64, s: &[f64]) -> f64 {
    d.iter().zip(s).map(|(d, s)| d * s + gamma * s * s).sum()
}

/// Minimizes [`qp_objective`] over the simplex by projected gradient descent.
pub fn simplex_qp(d: &[f64], gamma: f64) -> Vec<f64> {
    let m = d.len();
    let step = 0.5 / (2.0 * gamma);
    let mut s = vec![1.0 / m as f64; m];
    for _ in 0..500 {
        let g: Vec<f64> = d.iter().zip(&s).map(|(d, s)| d + 2.0 * gamma * s).collect();
        let next = project_simplex(&s.iter().zip(&g).map(|(s, g)| s - step * g).collect::<Vec<_>>());
        let moved = next.iter().zip(&s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        s = next;
        if moved < 1e-16 {
            break;
        }
    }
    s
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Best accuracy over every relabeling of `pred`, by exhaustive search.
pub fn brute_force_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let k = pred.iter().chain(truth).max().map_or(0, |&x| x + 1);
    permutations(k)
        .iter()
        .map(|p| pred.iter().zip(truth).filter(|&(&a, &b)| p[a] == b).count())
        .max()
        .unwrap_or(0) as f64
        / pred.len() as f64
}

/// NMI with geometric-mean normalization from an explicit contingency table.
pub fn contingency_nmi(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let kp = pred.iter().max().unwrap() + 1;
    let kt = truth.iter().max().unwrap() + 1;
    let mut table = vec![vec![0.0; kt]; kp];
    for (&a, &b) in pred.iter().zip(truth) {
        table[a][b] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..kt).map(|b| table.iter().map(|r| r[b]).sum()).collect();
    let h = |t: &[f64]| -> f64 { -t.iter().filter(|&&x| x > 0.0).map(|&x| x / n * (x / n).ln()).sum::<f64>() };
    let (hp, ht) = (h(&rows), h(&cols));
    let mut mi = 0.0;
    for a in 0..kp {
        for b in 0..kt {
            let nab = table[a][b];
            if nab > 0.0 {
                mi += nab / n * (n * nab / (rows[a] * cols[b])).ln();
            }
        }
    }
    if hp == 0.0 && ht == 0.0 {
        1.0
    } else if hp == 0.0 || ht == 0.0 {
        0.0
    } else {
        mi / (hp * ht).sqrt()
    }
}

/// `G = S D⁻¹ Sᵀ` formed densely from `S`, zero-degree columns skipped.
pub fn dense_sample_graph(s: &Matrix) -> Matrix {
    let (n, m) = s.shape();
    let deg: Vec<f64> = (0..m).map(|j| (0..n).map(|i| s[(i, j)]).sum()).collect();
    Matrix::from_fn(n, n, |i, l| {
        (0..m)
            .filter(|&j| deg[j] > 0.0)
            .map(|j| s[(i, j)] * s[(l, j)] / deg[j])
            .sum()
    })
}

/// `Σ_i Σ_j ‖z_i − z_j‖² g_ij`.
pub fn dense_structure_sum(z: &Matrix, g: &Matrix) -> f64 {
    let n = z.rows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d: f64 = z.row(i).iter().zip(z.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            total += d * g[(i, j)];
        }
    }
    total
}

/// MI of the joint `(1/m) F_aᵀ F_b`, computed entry by entry.
pub fn mi_oracle(fa: &Matrix, fb: &Matrix) -> f64 {
    let (m, c) = fa.shape();
    let mut p = vec![vec![0.0; c]; c];
    for i in 0..m {
        for x in 0..c {
            for y in 0..c {
                p[x][y] += fa[(i, x)] * fb[(i, y)] / m as f64;
            }
        }
    }
    let px: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..c).map(|y| p.iter().map(|r| r[y]).sum()).collect();
    let lg = |x: f64| x.max(1e-12).ln();
    let mut mi = 0.0;
    for x in 0..c {
        for y in 0..c {
            mi += p[x][y] * lg(p[x][y]);
        }
    }
    mi - px.iter().map(|&v| v * lg(v)).sum::<f64>() - py.iter().map(|&v| v * lg(v)).sum::<f64>()
}
