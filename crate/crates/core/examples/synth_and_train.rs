//! Generate well-separated blobs with two views and cluster them.
//!
//! ```bash
//! cargo run --release --example synth_and_train
//! ```

use dmac::dataio::{generate_synthetic, SyntheticSpec};
use dmac::trainer::{train, Metrics, TrainConfig};

pub fn run_example() -> dmac::Result<Metrics> {
    let (data, _) = generate_synthetic(&SyntheticSpec::blobs(300, 2, 3, 0))?.normalized();
    let cfg = TrainConfig::default();
    let result = train(&data, &cfg)?;

    let first = &result.loss_history[0];
    let last = result.loss_history.last().unwrap();
    println!("{} anchors, {} neighbors per sample", result.anchor_count, result.neighbors);
    println!("epoch   0: L = {:10.4}  AL = {:.4}  CM = {:.4}  SP = {:.4}", first.total, first.anchor, first.consistency, first.structure);
    println!(
        "epoch {:3}: L = {:10.4}  AL = {:.4}  CM = {:.4}  SP = {:.4}",
        result.loss_history.len() - 1,
        last.total,
        last.anchor,
        last.consistency,
        last.structure
    );
    let metrics = result.metrics.expect("synthetic data carries labels");
    println!(
        "ACC {:.4}  NMI {:.4}  ({:.2} ms per epoch)",
        metrics.acc,
        metrics.nmi,
        1e3 * result.mean_epoch_seconds()
    );
    Ok(metrics)
}

#[allow(dead_code)]
fn main() -> dmac::Result<()> {
    run_example().map(|_| ())
}
