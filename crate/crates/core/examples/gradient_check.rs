//! Reverse-mode gradients from the tape against central finite differences.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use dmac::{Matrix, Tape};

/// `sum(softmax(X W) ⊙ log(softmax(X W)))` for a fixed input `X`.
fn objective(tape: &mut Tape, x: &Matrix, w: &Matrix) -> dmac::Result<(dmac::Var, dmac::Var)> {
    let xv = tape.constant(x.clone());
    let wv = tape.leaf(w.clone());
    let logits = tape.matmul(xv, wv)?;
    let p = tape.softmax_rows(logits);
    let logs = tape.ln_clamped(p, 1e-12);
    let terms = tape.mul(p, logs)?;
    Ok((wv, tape.sum(terms)))
}

pub fn run_example() -> dmac::Result<f64> {
    let x = Matrix::from_fn(5, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin());
    let w = Matrix::from_fn(3, 4, |i, j| ((i + 2 * j) as f64 * 0.3).cos());

    let mut tape = Tape::new();
    let (wv, loss) = objective(&mut tape, &x, &w)?;
    println!("loss {:.6} on a tape of {} nodes", tape.scalar(loss), tape.len());
    let grads = tape.backward(loss)?;
    let analytic = grads.get(wv).expect("w is a leaf").clone();

    let h = 1e-6;
    let eval = |w: &Matrix| -> dmac::Result<f64> {
        let mut t = Tape::new();
        let (_, l) = objective(&mut t, &x, w)?;
        Ok(t.scalar(l))
    };
    let mut worst: f64 = 0.0;
    for e in 0..w.len() {
        let mut wp = w.clone();
        wp.as_mut_slice()[e] += h;
        let up = eval(&wp)?;
        wp.as_mut_slice()[e] -= 2.0 * h;
        let down = eval(&wp)?;
        let fd = (up - down) / (2.0 * h);
        let a = analytic.as_slice()[e];
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8));
    }
    println!("worst relative error over {} entries: {worst:.2e}", w.len());
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> dmac::Result<()> {
    run_example().map(|_| ())
}
