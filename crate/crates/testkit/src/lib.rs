//! Brute-force reference computations for tests.
//!
//! Nothing here depends on the solvers under test; every routine is the
//! slowest obviously-correct way to get the number.

/// Minimum of `⟨C, π⟩` over the vertices of the transportation polytope.
///
/// Enumerates every set of `n + m − 1` cells, keeps those forming a spanning
/// tree of the bipartite row/column graph, solves the tree flows by leaf
/// peeling and discards infeasible ones. Practical up to about 4×4.
pub fn vertex_enumeration_ot(cost: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let (n, m) = (p.len(), q.len());
    assert_eq!(cost.len(), n * m);
    let cells = n * m;
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);
    combinations(cells, k, 0, &mut chosen, &mut |subset| {
        if let Some(flows) = tree_flows(subset, n, m, p, q) {
            if flows.iter().all(|&f| f >= -1e-12) {
                let value: f64 = subset.iter().zip(&flows).map(|(&c, &f)| cost[c] * f).sum();
                best = best.min(value);
            }
        }
    });
    best
}

fn combinations(total: usize, k: usize, start: usize, chosen: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    let remaining = k - chosen.len();
    for c in start..=total - remaining {
        chosen.push(c);
        combinations(total, k, c + 1, chosen, visit);
        chosen.pop();
    }
}

/// Flows on the cells of `subset` if they form a spanning tree.
fn tree_flows(subset: &[usize], n: usize, m: usize, p: &[f64], q: &[f64]) -> Option<Vec<f64>> {
    let nodes = n + m;
    let ends: Vec<(usize, usize)> = subset.iter().map(|&c| (c / m, n + c % m)).collect();
    let mut degree = vec![0usize; nodes];
    for &(a, b) in &ends {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut residual: Vec<f64> = p.iter().chain(q).copied().collect();
    let mut flows = vec![0.0; subset.len()];
    let mut used = vec![false; subset.len()];
    for _ in 0..subset.len() {
        // Any remaining leaf fixes the flow on its only edge.
        let (edge, leaf) = ends.iter().enumerate().find_map(|(e, &(a, b))| {
            if used[e] {
                None
            } else if degree[a] == 1 {
                Some((e, a))
            } else if degree[b] == 1 {
                Some((e, b))
            } else {
                None
            }
        })?;
        let (a, b) = ends[edge];
        let other = if leaf == a { b } else { a };
        flows[edge] = residual[leaf];
        residual[other] -= residual[leaf];
        residual[leaf] = 0.0;
        used[edge] = true;
        degree[a] -= 1;
        degree[b] -= 1;
    }
    // A forest with a cycle elsewhere would leave mass unbalanced.
    residual.iter().all(|r| r.abs() < 1e-9).then_some(flows)
}

/// Minimum total cost over all permutations of an `n × n` matrix.
pub fn permutation_min(cost: &[f64], n: usize) -> f64 {
    fn rec(cost: &[f64], n: usize, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                rec(cost, n, row + 1, used, acc + cost[row * n + j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
    best
}

/// Central finite difference of `f` along every coordinate of `x`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + step;
            let up = f(&probe);
            probe[k] = x[k] - step;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Sample mean and sample standard deviation (divisor `n − 1`).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Closed-form value for the Gaussian random-walk pair with scalar or
/// isotropic covariances, written out independently of the library.
pub fn isotropic_gaussian_value(d: usize, x0: f64, y0: f64, var_x: f64, var_y: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    let d = d as f64;
    let drift = d * (x0 - y0).powi(2);
    let bures = d * (var_x.sqrt() - var_y.sqrt()).powi(2);
    t * drift + t * (t + 1.0) / 2.0 * bures
}
