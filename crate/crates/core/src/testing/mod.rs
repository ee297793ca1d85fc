//! Independent reference computations for tests, plus the randomized
//! property suites in [`props`].
//!
//! Nothing here is used by the library itself. The routines deliberately take
//! a different algorithmic route from the production code: transport costs
//! come from a min-cost-flow solution of the transport linear program, and GP
//! quantities from an explicit Gauss-Jordan inverse instead of a Cholesky
//! factor.

#![allow(clippy::needless_range_loop)]

/// Exact optimal transport cost between histograms `a` and `b` (equal mass)
/// under an arbitrary nonnegative `cost[i][j]`, by successive shortest
/// augmenting paths on the transport network.
pub fn transport_cost(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> f64 {
    let m = a.len();
    let n = b.len();
    // nodes: 0 = source, 1..=m supplies, m+1..=m+n demands, m+n+1 = sink
    let nodes = m + n + 2;
    let (src, sink) = (0, m + n + 1);
    // (from, to, residual capacity, cost); edge e and e ^ 1 are a residual pair
    let mut edges: Vec<(usize, usize, f64, f64)> = Vec::new();
    let add = |edges: &mut Vec<(usize, usize, f64, f64)>, u: usize, v: usize, cap: f64, c: f64| {
        edges.push((u, v, cap, c));
        edges.push((v, u, 0.0, -c));
    };
    for (i, &ai) in a.iter().enumerate() {
        add(&mut edges, src, 1 + i, ai, 0.0);
    }
    for (j, &bj) in b.iter().enumerate() {
        add(&mut edges, 1 + m + j, sink, bj, 0.0);
    }
    for i in 0..m {
        for j in 0..n {
            add(&mut edges, 1 + i, 1 + m + j, f64::INFINITY, cost[i][j]);
        }
    }

    let eps = 1e-15;
    let mut total = 0.0;
    loop {
        // Bellman-Ford on the residual graph.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[src] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for (e, &(u, v, cap, c)) in edges.iter().enumerate() {
                if cap > eps && dist[u] + c < dist[v] - 1e-15 {
                    dist[v] = dist[u] + c;
                    via[v] = e;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != src {
            let e = via[v];
            push = push.min(edges[e].2);
            v = edges[e].0;
        }
        let mut v = sink;
        while v != src {
            let e = via[v];
            edges[e].2 -= push;
            edges[e ^ 1].2 += push;
            total += push * edges[e].3;
            v = edges[e].0;
        }
    }
    total
}

/// Transport cost with the binary ground metric (0 on the diagonal, 1 elsewhere).
pub fn transport_cost_binary(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len();
    let cost: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect();
    transport_cost(a, b, &cost)
}

/// Inverse of a dense square matrix by Gauss-Jordan elimination with partial
/// pivoting. Returns `None` for a numerically singular matrix.
pub fn gauss_jordan_inverse(matrix: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = matrix.len();
    let mut aug: Vec<Vec<f64>> = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = aug[col].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            if r != col {
                let f = row[col];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Log-determinant of a symmetric positive definite matrix via plain
/// Gaussian elimination (no pivoting needed for SPD input).
pub fn log_det_spd(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    let mut a = matrix.to_vec();
    let mut log_det = 0.0;
    for k in 0..n {
        let p = a[k][k];
        log_det += p.ln();
        for i in k + 1..n {
            let f = a[i][k] / p;
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    log_det
}

/// `(mean, variance)` of `k*^T C^-1 y` and `k** - k*^T C^-1 k*` with an
/// explicit inverse of the regularized Gram matrix `C`.
pub fn dense_posterior(gram: &[Vec<f64>], kstar: &[f64], kss: f64, y: &[f64]) -> (f64, f64) {
    let inv = gauss_jordan_inverse(gram).expect("singular Gram matrix in oracle");
    let n = y.len();
    let mut mean = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            mean += kstar[i] * inv[i][j] * y[j];
            quad += kstar[i] * inv[i][j] * kstar[j];
        }
    }
    (mean, (kss - quad).max(0.0))
}

/// Gaussian log marginal likelihood `-1/2 y^T C^-1 y - 1/2 log|C| - n/2 log 2pi`.
pub fn dense_log_marginal(gram: &[Vec<f64>], y: &[f64]) -> f64 {
    let inv = gauss_jordan_inverse(gram).expect("singular Gram matrix in oracle");
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += y[i] * inv[i][j] * y[j];
        }
    }
    -0.5 * quad - 0.5 * log_det_spd(gram) - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transport_on_a_line() {
        // |i - j| ground cost: moving all mass from bin 0 to bin 2 costs 2.
        let cost: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| (i as f64 - j as f64).abs()).collect()).collect();
        let c = transport_cost(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &cost);
        assert!((c - 2.0).abs() < 1e-12);
        let c = transport_cost(&[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5], &cost);
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_of_small_matrix() {
        let inv = gauss_jordan_inverse(&[vec![4.0, 7.0], vec![2.0, 6.0]]).unwrap();
        let expected = [[0.6, -0.7], [-0.2, 0.4]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv[i][j] - expected[i][j]).abs() < 1e-12);
            }
        }
        assert!(gauss_jordan_inverse(&[vec![1.0, 1.0], vec![1.0, 1.0]]).is_none());
    }
}

#[cfg(feature = "oracles")]
pub mod props;
