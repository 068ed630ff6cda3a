//! Write a dataset directory in both matrix formats and read it back.
//!
//! ```bash
//! cargo run --example dataset_io
//! ```

use dmac::dataio::{generate_synthetic, load_dataset, save_dataset, MatrixFormat, SyntheticSpec};

pub fn run_example() -> dmac::Result<f64> {
    let data = generate_synthetic(&SyntheticSpec::blobs(40, 3, 2, 5))?;
    let root = std::env::temp_dir().join(format!("dmac_dataset_io_{}", std::process::id()));
    let mut worst: f64 = 0.0;
    for (format, normalize) in [(MatrixFormat::Csv, false), (MatrixFormat::Dmx, false), (MatrixFormat::Dmx, true)] {
        let dir = root.join(format!("{}_{normalize}", format.extension()));
        let manifest = save_dataset(&data, &dir, format, normalize)?;
        let back = load_dataset(&dir)?;
        let expect = if normalize { data.normalized().0 } else { data.clone() };
        for (a, b) in back.views().iter().zip(expect.views()) {
            worst = worst.max(a.max_abs_diff(b)?);
        }
        println!("{}: views {:?}, normalize {}, labels {:?}", dir.display(), manifest.views, manifest.normalize, manifest.labels);
    }
    std::fs::remove_dir_all(&root)?;
    println!("largest round-trip difference {worst:e}");
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> dmac::Result<()> {
    run_example().map(|_| ())
}
