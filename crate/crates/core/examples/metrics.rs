//! k-means on a small embedding, scored with Hungarian-matched accuracy and NMI.
//!
//! ```bash
//! cargo run --example metrics
//! ```

use dmac::eval::{accuracy, kmeans, nmi, Contingency};
use dmac::trainer::Metrics;
use dmac::Matrix;

pub fn run_example() -> dmac::Result<Metrics> {
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2];
    let x = Matrix::from_fn(9, 2, |i, j| {
        let center = [[0.0, 0.0], [5.0, 5.0], [0.0, 5.0]][truth[i]];
        center[j] + 0.1 * ((i * 7 + j * 3) % 5) as f64
    });
    let fit = kmeans(&x, 3, 42, 10)?;
    println!("k-means labels {:?}, inertia {:.4}", fit.labels, fit.inertia);

    // cluster ids are arbitrary; accuracy matches them to classes first
    let swapped = [2, 2, 2, 0, 0, 0, 1, 1, 1];
    println!("relabeled prediction: ACC {}", accuracy(&swapped, &truth)?);

    let noisy = [0, 0, 1, 1, 1, 1, 2, 2, 0];
    let table = Contingency::new(&noisy, &truth)?;
    println!("contingency rows {:?}, cols {:?}", table.row_totals(), table.col_totals());
    println!("noisy prediction: ACC {:.4}, NMI {:.4}", accuracy(&noisy, &truth)?, nmi(&noisy, &truth)?);

    let m = Metrics { acc: accuracy(&fit.labels, &truth)?, nmi: nmi(&fit.labels, &truth)? };
    println!("k-means: ACC {:.4}, NMI {:.4}", m.acc, m.nmi);
    Ok(m)
}

#[allow(dead_code)]
fn main() -> dmac::Result<()> {
    run_example().map(|_| ())
}
