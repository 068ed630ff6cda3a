//! Closed-form anchor graph on a handful of points, with the operators built
//! from it.
//!
//! ```bash
//! cargo run --example anchor_graph
//! ```

use dmac::graph::{full_sample_graph, propagation_operator, solve_anchor_graph};
use dmac::Matrix;

fn show(name: &str, x: &Matrix) {
    println!("{name}:");
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:6.3}")).collect();
        println!("  [{}]", cells.join(" "));
    }
}

pub fn run_example() -> dmac::Result<Matrix> {
    let z = Matrix::from_rows(&[[0.0, 0.0], [0.2, 0.1], [2.0, 2.0], [2.1, 1.8], [4.0, 0.0]])?;
    let u = Matrix::from_rows(&[[0.1, 0.0], [2.0, 1.9], [3.5, 0.5]])?;
    let graph = solve_anchor_graph(&z, &u, 2)?;

    show("S (samples x anchors)", &graph.to_dense());
    println!("anchor degrees: {:?}", graph.degrees());
    println!("gamma per sample: {:?}", graph.gamma());

    let a_hat = propagation_operator(&graph);
    show("A_hat = D^-1 S^T S", &a_hat);
    let g = full_sample_graph(&graph)?;
    show("G = S D^-1 S^T", &g);
    println!("G row sums: {:?}", g.row_sums());
    Ok(g)
}

#[allow(dead_code)]
fn main() -> dmac::Result<()> {
    run_example().map(|_| ())
}
