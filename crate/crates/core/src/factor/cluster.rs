//! Matched clustering of ensemble factor columns and cosine silhouettes.

use ndarray::{Array1, Array2, ArrayView1};

/// Minimum-cost perfect assignment on a square cost matrix.
/// Returns `assign[row] = col`.
pub fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    // Potentials formulation, 1-indexed with a sentinel column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

fn unit(v: ArrayView1<f64>) -> Array1<f64> {
    let norm = v.dot(&v).sqrt();
    if norm > 0.0 {
        &v / norm
    } else {
        v.to_owned()
    }
}

fn cosine_distance(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    (1.0 - a.dot(b)).max(0.0)
}

/// Clusters the columns of every ensemble member into `k` groups, each
/// member contributing exactly one column per group. Returns the unit
/// columns and their labels, member-major.
pub fn match_columns(members: &[Array2<f64>]) -> (Vec<Array1<f64>>, Vec<usize>) {
    let k = members[0].ncols();
    let points: Vec<Vec<Array1<f64>>> = members
        .iter()
        .map(|w| w.columns().into_iter().map(unit).collect())
        .collect();
    let mut centroids: Vec<Array1<f64>> = points[0].clone();
    let mut labels: Vec<Vec<usize>> = vec![(0..k).collect(); members.len()];

    for iter in 0..100 {
        let mut changed = false;
        for (e, cols) in points.iter().enumerate() {
            let cost = Array2::from_shape_fn((k, k), |(r, c)| -cols[r].dot(&centroids[c]));
            let assign = hungarian(&cost);
            if assign != labels[e] {
                labels[e] = assign;
                changed = true;
            }
        }
        if iter > 0 && !changed {
            break;
        }
        let dim = centroids[0].len();
        let mut sums = vec![Array1::<f64>::zeros(dim); k];
        for (e, cols) in points.iter().enumerate() {
            for (r, col) in cols.iter().enumerate() {
                sums[labels[e][r]] += col;
            }
        }
        centroids = sums.iter().map(|s| unit(s.view())).collect();
    }

    let flat_points = points.into_iter().flatten().collect();
    let flat_labels = labels.into_iter().flatten().collect();
    (flat_points, flat_labels)
}

/// Mean silhouette under cosine distance. Points alone in their cluster score 0.
pub fn mean_silhouette(points: &[Array1<f64>], labels: &[usize], k: usize) -> f64 {
    let n = points.len();
    if n == 0 || k < 2 {
        return 0.0;
    }
    let mut dist = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&points[i], &points[j]);
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist[[i, j]];
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if !b.is_finite() {
            continue;
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn brute_force(cost: &Array2<f64>) -> f64 {
        fn rec(cost: &Array2<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
            let n = cost.nrows();
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for c in 0..n {
                if !used[c] {
                    used[c] = true;
                    best = best.min(cost[[row, c]] + rec(cost, row + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost.nrows()])
    }

    #[test]
    fn hungarian_matches_permutation_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for n in 1..=6 {
            for _ in 0..20 {
                let cost = Array2::from_shape_simple_fn((n, n), || rng.random_range(-1.0..1.0));
                let assign = hungarian(&cost);
                let got: f64 = assign.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum();
                assert!((got - brute_force(&cost)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn separated_clusters_score_near_one() {
        let members = vec![
            array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
            array![[0.0, 1.0], [1.0, 0.0], [0.0, 0.01]],
            array![[0.98, 0.0], [0.0, 1.0], [0.01, 0.0]],
        ];
        let (points, labels) = match_columns(&members);
        // the second member's columns are swapped relative to the first
        assert_eq!(&labels[2..4], &[1, 0]);
        assert!(mean_silhouette(&points, &labels, 2) > 0.95);
    }
}
