use std::collections::HashMap;

use crate::error::{DmacError, Result};
use crate::eval::hungarian::min_cost_assignment;

/// Dense contingency table between two labelings, with label ids compacted
/// to `0..k` by first appearance.
#[derive(Debug, Clone)]
pub struct Contingency {
    pub counts: Vec<Vec<usize>>,
    pub n: usize,
}

impl Contingency {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(DmacError::Argument(format!(
                "label vectors differ in length: {} vs {}",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(DmacError::Argument("empty labelings".into()));
        }
        let p = compact(pred);
        let t = compact(truth);
        let kp = p.iter().max().map_or(0, |m| m + 1);
        let kt = t.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0; kt]; kp];
        for (&a, &b) in p.iter().zip(&t) {
            counts[a][b] += 1;
        }
        Ok(Self {
            counts,
            n: pred.len(),
        })
    }

    pub fn row_totals(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<usize> {
        let k = self.counts.first().map_or(0, Vec::len);
        (0..k)
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }
}

/// Renumbers ids by first appearance, so any relabeling of the input yields
/// the same output and both metrics are exactly permutation invariant.
fn compact(labels: &[usize]) -> Vec<usize> {
    let mut ids = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect()
}

/// Clustering accuracy under the best one-to-one cluster-to-class matching.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = Contingency::new(pred, truth)?;
    let kp = table.counts.len();
    let kt = table.counts[0].len();
    let size = kp.max(kt);
    let max_count = table.n as f64;
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    let c = if i < kp && j < kt { table.counts[i][j] } else { 0 };
                    max_count - c as f64
                })
                .collect()
        })
        .collect();
    let matched: usize = min_cost_assignment(&cost)
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < kp && j < kt)
        .map(|(i, &j)| table.counts[i][j])
        .sum();
    Ok(matched as f64 / table.n as f64)
}

fn entropy(totals: &[usize], n: f64) -> f64 {
    totals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, `I(pred; truth) / sqrt(H(pred)·H(truth))`.
///
/// Two single-cluster partitions score 1; exactly one single-cluster
/// partition scores 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = Contingency::new(pred, truth)?;
    let n = table.n as f64;
    let rows = table.row_totals();
    let cols = table.col_totals();
    let (hp, ht) = (entropy(&rows, n), entropy(&cols, n));
    match (rows.len() == 1, cols.len() == 1) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mut mi = 0.0;
    for (i, r) in table.counts.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let pij = c as f64 / n;
            mi += pij * (pij * n * n / (rows[i] as f64 * cols[j] as f64)).ln();
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}
