//! Sweep the trade-off weights on a small blobs dataset.
//!
//! ```bash
//! cargo run --release --example grid_search
//! ```

use dmac::dataio::{generate_synthetic, SyntheticSpec};
use dmac::trainer::{grid_search, GridCell, TrainConfig};

pub fn run_example() -> dmac::Result<Vec<GridCell>> {
    let (data, _) = generate_synthetic(&SyntheticSpec::blobs(150, 2, 3, 1))?.normalized();
    let cfg = TrainConfig {
        alpha_grid: vec![0.01, 0.1, 1.0],
        beta_grid: vec![0.0, 0.01],
        epochs: 30,
        ..TrainConfig::default()
    };
    let cells = grid_search(&data, &cfg)?;
    println!("{:>6} {:>6} {:>7} {:>7} {:>9}", "alpha", "beta", "ACC", "NMI", "loss");
    for cell in &cells {
        let m = cell.result.metrics.expect("labeled data");
        println!(
            "{:>6} {:>6} {:>7.4} {:>7.4} {:>9.4}",
            cell.alpha,
            cell.beta,
            m.acc,
            m.nmi,
            cell.result.final_loss()
        );
    }
    Ok(cells)
}

#[allow(dead_code)]
fn main() -> dmac::Result<()> {
    run_example().map(|_| ())
}
