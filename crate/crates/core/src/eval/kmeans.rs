use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ad::matrix::sq_dist;
use crate::ad::Matrix;
use crate::error::{DmacError, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

/// Output of [`kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations_used: usize,
}

/// Lloyd's algorithm from k-means++ seeding, best of `restarts` by inertia.
///
/// Each restart runs until the assignment stops changing or
/// [`MAX_LLOYD_ITERATIONS`] is hit. Clusters that end up empty are re-seeded
/// with the point currently farthest from its centroid.
pub fn kmeans(x: &Matrix, k: usize, seed: u64, restarts: usize) -> Result<ClusteringResult> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(DmacError::Argument(format!(
            "k-means needs 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusteringResult> = None;
    for _ in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let (run, _) = lloyd(x, plus_plus_seeds(x, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means++ seeding: each new center is drawn with probability proportional
/// to its squared distance from the nearest chosen center.
pub(crate) fn plus_plus_seeds(x: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = x.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();

    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // rounding can exhaust the loop; fall back to the last positive weight
            pick.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // every remaining point coincides with a center
            (0..n).find(|&i| !taken[i]).expect("k <= n")
        };
        chosen.push(next);
        taken[next] = true;
        for (i, w) in nearest.iter_mut().enumerate() {
            *w = w.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

fn assign(x: &Matrix, centroids: &Matrix, labels: &mut [usize], costs: &mut [f64]) {
    for i in 0..x.rows() {
        let row = x.row(i);
        let mut best = (0, f64::INFINITY);
        for j in 0..centroids.rows() {
            let d = sq_dist(row, centroids.row(j));
            if d < best.1 {
                best = (j, d);
            }
        }
        labels[i] = best.0;
        costs[i] = best.1;
    }
}

/// Runs Lloyd iterations from the given centroids; also returns the inertia
/// recorded after every assignment step.
pub(crate) fn lloyd(x: &Matrix, mut centroids: Matrix) -> (ClusteringResult, Vec<f64>) {
    let (n, d, k) = (x.rows(), x.cols(), centroids.rows());
    let mut labels = vec![usize::MAX; n];
    let mut next = vec![0; n];
    let mut costs = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        assign(x, &centroids, &mut next, &mut costs);
        iterations += 1;
        trace.push(costs.iter().sum());
        let changed = next != labels;
        labels.copy_from_slice(&next);
        if !changed || iterations >= MAX_LLOYD_ITERATIONS {
            break;
        }

        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums.row_mut(l).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let c = counts[j] as f64;
                for (dst, &s) in centroids.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *dst = s / c;
                }
            } else {
                let far = costs
                    .iter()
                    .enumerate()
                    .fold(0, |b, (i, &c)| if c > costs[b] { i } else { b });
                centroids.row_mut(j).copy_from_slice(x.row(far));
                costs[far] = 0.0;
            }
        }
    }

    let inertia = trace.last().copied().unwrap_or(0.0);
    (
        ClusteringResult {
            labels,
            centroids,
            inertia,
            iterations_used: iterations,
        },
        trace,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [5.0, -1.0], [7.0, 7.0]]).unwrap();
        let r = kmeans(&x, 4, 0, 3).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut l = r.labels.clone();
        l.sort_unstable();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_cluster_centroid_is_midpoint() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 6.0]]).unwrap();
        let r = kmeans(&x, 1, 4, 1).unwrap();
        assert_eq!(r.centroids.row(0), &[2.0, 4.0]);
    }

    /// Best inertia over all 2-partitions of a small 1-D set.
    fn brute_force_two_partition(v: &[f64]) -> f64 {
        let n = v.len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let pts: Vec<f64> = (0..n)
                    .filter(|&i| (mask >> i & 1 == 1) == side)
                    .map(|i| v[i])
                    .collect();
                let mean = pts.iter().sum::<f64>() / pts.len() as f64;
                cost += pts.iter().map(|p| (p - mean).powi(2)).sum::<f64>();
            }
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn one_dimensional_two_clusters() {
        let v = [0.0, 1.0, 10.0, 11.0];
        let oracle = brute_force_two_partition(&v);
        assert_eq!(oracle, 1.0);
        let r = kmeans(&col(&v), 2, 7, 5).unwrap();
        assert!((r.inertia - oracle).abs() < 1e-12);
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[2], r.labels[3]);
        assert_ne!(r.labels[0], r.labels[2]);
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        assert!(matches!(
            kmeans(&col(&[1.0, 2.0]), 3, 0, 1),
            Err(DmacError::Argument(_))
        ));
    }

    #[test]
    fn inertia_matches_returned_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Matrix::from_fn(60, 3, |_, _| rng.random_range(-1.0..1.0));
        let r = kmeans(&x, 5, 1, 4).unwrap();
        let direct: f64 = (0..60)
            .map(|i| sq_dist(x.row(i), r.centroids.row(r.labels[i])))
            .sum();
        assert_eq!(r.inertia, direct);
        assert!(r.labels.iter().all(|&l| l < 5));
    }

    #[test]
    fn inertia_nonincreasing_within_a_restart() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Matrix::from_fn(80, 2, |_, _| rng.random_range(-3.0..3.0));
            let init = plus_plus_seeds(&x, 6, &mut rng);
            let (_, trace) = lloyd(&x, init);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{trace:?}");
            }
        }
    }

    #[test]
    fn duplicate_points_still_seed_distinct_indices() {
        let x = Matrix::filled(5, 2, 1.0);
        let r = kmeans(&x, 3, 0, 2).unwrap();
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn same_seed_same_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Matrix::from_fn(40, 4, |_, _| rng.random_range(-1.0..1.0));
        assert_eq!(kmeans(&x, 4, 99, 3).unwrap(), kmeans(&x, 4, 99, 3).unwrap());
    }
}
