//! Per-epoch time as the sample count doubles with the anchor count fixed.
//!
//! ```bash
//! cargo run --release --example scaling_bench
//! ```

use dmac::cli::{cmd_bench, scaling_exponent, BenchArgs, TrainFlags};

pub fn run_example() -> dmac::Result<f64> {
    let out = std::env::temp_dir().join("dmac_scaling_bench.csv");
    let rows = cmd_bench(&BenchArgs {
        ns: vec![250, 500, 1000],
        flags: TrainFlags { anchors: Some(30), epochs: Some(4), ..TrainFlags::default() },
        views: 2,
        clusters: 3,
        repeats: 1,
        out: Some(out.clone()),
    })?;
    for r in &rows {
        println!(
            "n = {:5}  m = {}  setup {:7.2} ms  epoch {:7.2} ms",
            r.n,
            r.m,
            1e3 * r.setup_seconds,
            1e3 * r.seconds_per_epoch.unwrap_or(0.0)
        );
    }
    let pts: Vec<(usize, f64)> = rows.iter().filter_map(|r| Some((r.n, r.seconds_per_epoch?))).collect();
    let slope = scaling_exponent(&pts);
    println!("log-log exponent {slope:.2}; table written to {}", out.display());
    Ok(slope)
}

#[allow(dead_code)]
fn main() -> dmac::Result<()> {
    run_example().map(|_| ())
}
