//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! ```bash
//! cargo test --release --test acceptance
//! ```

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use dmac::ad::{Matrix, Tape};
use dmac::anchor::{anchor_similarity, init_anchors, view_anchor_loss};
use dmac::cli::{cmd_bench, cmd_synth, cmd_train, scaling_exponent, BenchArgs, FormatArg, SynthArgs, TrainArgs, TrainFlags};
use dmac::dataio::{generate_synthetic, MultiViewDataset, SyntheticSpec};
use dmac::eval::{accuracy, nmi};
use dmac::graph::{propagation_operator, solve_anchor_graph, AnchorGraph};
use dmac::losses::{mutual_information, structure_preservation_loss};
use dmac::trainer::{train, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_rows_softmax(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Matrix {
    dmac::ad::softmax_rows(&normal(rows, cols, rng).scale(scale))
}

fn blobs() -> MultiViewDataset {
    generate_synthetic(&SyntheticSpec::blobs(300, 2, 3, 0)).unwrap().normalized().0
}

fn mi(fa: &Matrix, fb: &Matrix) -> f64 {
    let mut tape = Tape::new();
    let a = tape.constant(fa.clone());
    let b = tape.constant(fb.clone());
    let v = mutual_information(&mut tape, a, b).unwrap();
    tape.scalar(v)
}

fn sp_loss(z: &Matrix, g: &AnchorGraph) -> f64 {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let v = structure_preservation_loss(&mut tape, zv, g).unwrap();
    tape.scalar(v)
}

fn al_loss(z: &Matrix, u: &Matrix) -> (Matrix, f64) {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let uv = tape.constant(u.clone());
    let q = anchor_similarity(&mut tape, zv, uv).unwrap();
    let l = view_anchor_loss(&mut tape, q).unwrap();
    (tape.value(q).clone(), tape.scalar(l))
}

fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let r = common::joint_gradient_error(0);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r.worst < 1e-5 && secs < 10.0,
        format!("{} entries, worst relative error {:.2e} (< 1e-5), {secs:.2}s (< 10s)", r.checked, r.worst),
    )
}

fn anchor_graph_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_entry, mut worst_excess, mut rows) = (0.0f64, f64::NEG_INFINITY, 0);
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let m = rng.random_range(2..=6);
        let k = rng.random_range(1..=4.min(m - 1));
        let d = rng.random_range(1..=4);
        let z = normal(n, d, &mut rng);
        let u = normal(m, d, &mut rng);
        let g = solve_anchor_graph(&z, &u, k).unwrap();
        let s = g.to_dense();
        for i in 0..n {
            let dist: Vec<f64> = (0..m)
                .map(|j| z.row(i).iter().zip(u.row(j)).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect();
            let gamma = g.gamma()[i];
            let oracle = common::simplex_qp(&dist, gamma);
            for j in 0..m {
                worst_entry = worst_entry.max((s[(i, j)] - oracle[j]).abs());
            }
            let excess = common::qp_objective(&dist, gamma, s.row(i)) - common::qp_objective(&dist, gamma, &oracle);
            worst_excess = worst_excess.max(excess);
            rows += 1;
        }
    }
    outcome(
        worst_entry <= 1e-6 && worst_excess <= 1e-9,
        format!("{rows} rows, max |s − oracle| {worst_entry:.2e} (≤ 1e-6), max objective excess {worst_excess:.2e} (≤ 1e-9)"),
    )
}

fn doubly_stochastic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut g_asym, mut g_sums, mut a_rows, mut a_cols) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..=40);
        let m = rng.random_range(2..=8);
        let k = rng.random_range(1..m);
        let d = rng.random_range(1..=5);
        let g = solve_anchor_graph(&normal(n, d, &mut rng), &normal(m, d, &mut rng), k).unwrap();
        let full = common::dense_sample_graph(&g.to_dense());
        for i in 0..n {
            for j in 0..n {
                g_asym = g_asym.max((full[(i, j)] - full[(j, i)]).abs());
            }
        }
        for s in full.row_sums().into_iter().chain(full.col_sums()) {
            g_sums = g_sums.max((s - 1.0).abs());
        }
        let a = propagation_operator(&g);
        let live: Vec<usize> = (0..m).filter(|&j| g.degrees()[j] > 0.0).collect();
        for &j in &live {
            a_rows = a_rows.max((a.row(j).iter().sum::<f64>() - 1.0).abs());
            a_cols = a_cols.max((live.iter().map(|&l| a[(l, j)]).sum::<f64>() - 1.0).abs());
        }
    }
    let pass = g_asym <= 1e-12 && g_sums <= 1e-9 && a_rows <= 1e-9 && a_cols <= 1e-9;
    outcome(
        pass,
        format!(
            "G asymmetry {g_asym:.1e} (≤ 1e-12), G sums dev {g_sums:.1e}, Â row dev {a_rows:.1e}, Â column dev {a_cols:.2e} (each ≤ 1e-9)"
        ),
    )
}

fn collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, m, d) = (20, 6, 4);
    let z = normal(n, d, &mut rng);
    let point = normal(1, d, &mut rng);
    let same_u = Matrix::from_fn(m, d, |_, j| point[(0, j)]);
    let (q, al) = al_loss(&z, &same_u);
    let q_dev = q.as_slice().iter().map(|x| (x - 1.0 / m as f64).abs()).fold(0.0, f64::max);
    let al_dev = (al - (m as f64).ln()).abs();

    let same_z = Matrix::from_fn(n, d, |_, j| point[(0, j)] + 0.5);
    let u = init_anchors(&same_z, m, 0).unwrap();
    let g = solve_anchor_graph(&same_z, &u, 3).unwrap();
    let sp = sp_loss(&same_z, &g).abs();
    let (_, al_collapsed) = al_loss(&same_z, &u);
    let al_max_dev = (al_collapsed - (m as f64).ln()).abs();
    outcome(
        q_dev <= 1e-12 && al_dev <= 1e-12 && sp <= 1e-9 && al_max_dev <= 1e-12,
        format!(
            "identical anchors: Q dev {q_dev:.1e}, |L_AL − log m| {al_dev:.1e}; identical Z: |L_SP| {sp:.1e}, |L_AL − log m| {al_max_dev:.1e}"
        ),
    )
}

fn trace_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=64);
        let m = rng.random_range(2..=10.min(n));
        let k = rng.random_range(1..m);
        let d = rng.random_range(1..=6);
        let z = normal(n, d, &mut rng);
        let u = normal(m, d, &mut rng);
        let g = solve_anchor_graph(&z, &u, k).unwrap();
        let dense = common::dense_structure_sum(&z, &common::dense_sample_graph(&g.to_dense()));
        worst = worst.max((sp_loss(&z, &g) - dense).abs());
    }
    outcome(worst <= 1e-8, format!("max |trace − double sum| {worst:.2e} (≤ 1e-8)"))
}

fn mi_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut asym, mut lowest, mut oracle_dev) = (0.0f64, f64::INFINITY, 0.0f64);
    let mut independent = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(1..=12);
        let c = rng.random_range(2..=5);
        let fa = random_rows_softmax(m, c, 3.0, &mut rng);
        let fb = random_rows_softmax(m, c, 3.0, &mut rng);
        let (ab, ba) = (mi(&fa, &fb), mi(&fb, &fa));
        asym = asym.max((ab - ba).abs());
        lowest = lowest.min(ab);
        oracle_dev = oracle_dev.max((ab - common::mi_oracle(&fa, &fb)).abs());
        let row = fb.row(0).to_vec();
        let flat = Matrix::from_fn(m, c, |_, j| row[j]);
        independent = independent.max(mi(&fa, &flat).abs());
    }
    let mut id_dev = 0.0f64;
    for c in 2..=8 {
        id_dev = id_dev.max((mi(&Matrix::identity(c), &Matrix::identity(c)) - (c as f64).ln()).abs());
    }
    outcome(
        asym <= 1e-12 && lowest >= -1e-12 && independent <= 1e-12 && id_dev <= 1e-9 && oracle_dev <= 1e-12,
        format!(
            "asymmetry {asym:.1e}, min MI {lowest:.1e}, identical-rows MI {independent:.1e}, |MI(I,I) − log c| {id_dev:.1e}, oracle dev {oracle_dev:.1e}"
        ),
    )
}

fn metric_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut perm_ok, mut hung_ok, mut nmi_dev) = (true, true, 0.0f64);
    for _ in 0..200 {
        let c = rng.random_range(1..=6);
        let n = rng.random_range(1..=40);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let acc = accuracy(&pred, &truth).unwrap();
        let mut relabel: Vec<usize> = (0..c).collect();
        relabel.shuffle(&mut rng);
        let permuted: Vec<usize> = pred.iter().map(|&p| relabel[p]).collect();
        perm_ok &= accuracy(&permuted, &truth).unwrap() == acc;
        hung_ok &= acc == common::brute_force_accuracy(&pred, &truth);
        nmi_dev = nmi_dev.max((nmi(&pred, &truth).unwrap() - common::contingency_nmi(&pred, &truth)).abs());
    }
    outcome(
        perm_ok && hung_ok && nmi_dev <= 1e-12,
        format!("permutation invariant: {perm_ok}, Hungarian = brute force: {hung_ok}, NMI dev {nmi_dev:.1e} (≤ 1e-12)"),
    )
}

fn end_to_end() -> Outcome {
    let data = blobs();
    let start = Instant::now();
    let r = train(&data, &TrainConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let m = r.metrics.unwrap();
    outcome(
        m.acc >= 0.95 && m.nmi >= 0.90 && secs < 60.0,
        format!("ACC {:.4} (≥ 0.95), NMI {:.4} (≥ 0.90), {secs:.1}s (< 60s)", m.acc, m.nmi),
    )
}

fn linear_time() -> Outcome {
    let out = tempfile::NamedTempFile::new().unwrap();
    let rows = cmd_bench(&BenchArgs {
        ns: vec![1000, 2000, 4000],
        flags: TrainFlags { anchors: Some(50), epochs: Some(6), ..TrainFlags::default() },
        views: 2,
        clusters: 3,
        repeats: 2,
        out: Some(out.path().to_path_buf()),
    })
    .unwrap();
    let pts: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.seconds_per_epoch.unwrap())).collect();
    let ratio = pts[1].1 / pts[0].1;
    let slope = scaling_exponent(&pts);
    let times: Vec<String> = pts.iter().map(|(n, t)| format!("n={n}: {:.1}ms", 1e3 * t)).collect();
    outcome(
        ratio <= 2.5 && slope <= 1.3,
        format!("{}; ratio 2000/1000 {ratio:.2} (≤ 2.5), exponent {slope:.2} (≤ 1.3)", times.join(", ")),
    )
}

fn ablation_direction() -> Outcome {
    let data = blobs();
    let mean_acc = |base: TrainConfig| -> f64 {
        (0..5)
            .map(|seed| train(&data, &TrainConfig { seed, ..base.clone() }).unwrap().metrics.unwrap().acc)
            .sum::<f64>()
            / 5.0
    };
    let full = mean_acc(TrainConfig::default());
    let wo_pd = mean_acc(TrainConfig { disable_perturbation: true, ..TrainConfig::default() });
    let wo_cm = mean_acc(TrainConfig { disable_consistency: true, ..TrainConfig::default() });
    outcome(
        full >= wo_pd && full >= wo_cm - 0.02,
        format!("mean ACC full {full:.4}, wo/PD {wo_pd:.4}, wo/CM {wo_cm:.4}"),
    )
}

fn determinism() -> Outcome {
    let data = generate_synthetic(&SyntheticSpec::blobs(120, 2, 3, 11)).unwrap();
    let cfg = TrainConfig { epochs: 25, seed: 9, ..TrainConfig::default() };
    let bits = |r: &dmac::TrainResult| -> Vec<u64> {
        r.loss_history
            .iter()
            .flat_map(|l| [l.total, l.anchor, l.consistency, l.structure])
            .map(f64::to_bits)
            .collect()
    };
    let lib_same = bits(&train(&data, &cfg).unwrap()) == bits(&train(&data, &cfg).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let synth = |name: &str| SynthArgs {
        out: dir.path().join(name),
        n: 90,
        views: 2,
        clusters: 3,
        seed: 5,
        spread: 10.0,
        noise: 1.0,
        format: FormatArg::Dmx,
        raw: false,
    };
    cmd_synth(&synth("d1")).unwrap();
    cmd_synth(&synth("d2")).unwrap();
    let synth_same = std::fs::read(dir.path().join("d1/view0.dmx")).unwrap()
        == std::fs::read(dir.path().join("d2/view0.dmx")).unwrap();
    let run = |name: &str| {
        let report = cmd_train(&TrainArgs {
            data: dir.path().join("d1"),
            out: dir.path().join(name),
            flags: TrainFlags { epochs: Some(25), seed: Some(3), ..TrainFlags::default() },
            repeats: 2,
            dump_graph: None,
        })
        .unwrap();
        (report.runs, std::fs::read(dir.path().join(name).join("run1/losses.csv")).unwrap())
    };
    let (runs_a, csv_a) = run("r1");
    let (runs_b, csv_b) = run("r2");
    let cli_same = csv_a == csv_b
        && runs_a.iter().zip(&runs_b).all(|(a, b)| a.losses == b.losses && a.metrics == b.metrics);
    outcome(
        lib_same && synth_same && cli_same,
        format!("train bitwise: {lib_same}, synth bytes: {synth_same}, CLI train repeats: {cli_same}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("gradient integrity", gradient_integrity),
        ("anchor-graph oracle equivalence", anchor_graph_oracle),
        ("doubly-stochastic invariants", doubly_stochastic),
        ("collapse penalization", collapse),
        ("trace-form equivalence", trace_form),
        ("mutual information contract", mi_contract),
        ("metric correctness", metric_correctness),
        ("end-to-end clustering", end_to_end),
        ("linear-time scaling", linear_time),
        ("ablation direction", ablation_direction),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
