//! Brute-force oracles shared by the integration tests.

#![allow(dead_code)]

pub fn combinations(len: usize, k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for i in start..len {
        if len - i < k - chosen.len() {
            break;
        }
        chosen.push(i);
        combinations(len, k, i + 1, chosen, f);
        chosen.pop();
    }
}

pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * z[k]).sum();
        z[row] = (b[row] - s) / a[row][row];
    }
    Some(z)
}

/// `max c·z` over `{A z = b, z ≥ 0}` by enumerating basic feasible
/// solutions; `A` must have full row rank.
pub fn max_over_vertices(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let rows = a.len();
    let n = c.len();
    let mut best: Option<f64> = None;
    let mut chosen = Vec::with_capacity(rows);
    combinations(n, rows, 0, &mut chosen, &mut |cols| {
        let sub: Vec<Vec<f64>> = a.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect();
        if let Some(zb) = gauss_solve(sub, b.to_vec()) {
            if zb.iter().all(|&v| v >= -1e-10) {
                let v: f64 = cols.iter().zip(&zb).map(|(&j, &z)| c[j] * z).sum();
                best = Some(best.map_or(v, |x: f64| x.max(v)));
            }
        }
    });
    best
}

/// Worst-case expectation over a Wasserstein ball with fixed candidates, by
/// vertex enumeration of the transport LP with a budget slack.
/// `cost[i][j]` is `dᵖ(center_i, candidate_j)`.
pub fn worst_case_by_vertices(weights: &[f64], cost: &[Vec<f64>], losses: &[f64], budget: f64) -> Option<f64> {
    let n = weights.len();
    let m = losses.len();
    let vars = n * m + 1;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let mut r = vec![0.0; vars];
        for j in 0..m {
            r[i * m + j] = 1.0;
        }
        a.push(r);
        b.push(weights[i]);
    }
    let mut r = vec![0.0; vars];
    for i in 0..n {
        for j in 0..m {
            r[i * m + j] = cost[i][j];
        }
    }
    r[n * m] = 1.0;
    a.push(r);
    b.push(budget);
    let mut c = vec![0.0; vars];
    for i in 0..n {
        for j in 0..m {
            c[i * m + j] = losses[j];
        }
    }
    max_over_vertices(&a, &b, &c)
}

/// `W_p^p` between two discrete distributions by vertex enumeration of the
/// transport polytope (the last column constraint is redundant and dropped).
pub fn transport_cost_by_vertices(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Option<f64> {
    let (n, m) = (a.len(), b.len());
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut r = vec![0.0; n * m];
        for j in 0..m {
            r[i * m + j] = 1.0;
        }
        rows.push(r);
        rhs.push(a[i]);
    }
    for j in 0..m - 1 {
        let mut r = vec![0.0; n * m];
        for i in 0..n {
            r[i * m + j] = 1.0;
        }
        rows.push(r);
        rhs.push(b[j]);
    }
    let neg: Vec<f64> = (0..n * m).map(|k| -cost[k / m][k % m]).collect();
    max_over_vertices(&rows, &rhs, &neg).map(|v| -v)
}
