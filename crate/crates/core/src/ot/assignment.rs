//! Linear assignment (Jonker–Volgenant shortest augmenting paths, O(n³) worst case).
//!
//! Optimal transport between two uniform measures of equal size has a
//! permutation among its optimal vertices, so this is an exact OT solver for
//! that case.

use super::measure::{check_problem, CostMatrix, Coupling, DiscreteMeasure, OtError};

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Jonker–Volgenant: column reduction, reduction transfer and two passes of
/// augmenting row reduction produce a partial assignment with feasible
/// duals; the remaining free rows are matched by Dijkstra shortest
/// augmenting paths on reduced costs.
///
/// Returns the column assigned to each row and the total cost.
pub fn solve_assignment(cost: &CostMatrix) -> (Vec<usize>, f64) {
    let n = cost.rows();
    assert_eq!(n, cost.cols(), "assignment requires a square cost matrix");
    let c = cost.as_slice();
    if n == 1 {
        return (vec![0], c[0]);
    }
    let mut col_of = vec![NONE; n];
    let mut row_of = vec![NONE; n];
    let mut v = vec![0.0; n];
    let mut free = column_reduction(c, n, &mut col_of, &mut row_of, &mut v);
    for _ in 0..2 {
        free = augmenting_row_reduction(c, n, &free, &mut col_of, &mut row_of, &mut v);
    }
    let mut d = vec![0.0; n];
    let mut pred = vec![0usize; n];
    let mut cols: Vec<usize> = (0..n).collect();
    for &f in &free {
        augment(c, n, f, &mut col_of, &mut row_of, &mut v, &mut d, &mut pred, &mut cols);
    }
    let total = col_of.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum();
    (col_of, total)
}

const NONE: usize = usize::MAX;

/// Column reduction plus reduction transfer; returns the free rows.
fn column_reduction(c: &[f64], n: usize, col_of: &mut [usize], row_of: &mut [usize], v: &mut [f64]) -> Vec<usize> {
    let mut matches = vec![0usize; n];
    for j in (0..n).rev() {
        let (mut imin, mut min) = (0, c[j]);
        for i in 1..n {
            let h = c[i * n + j];
            if h < min {
                min = h;
                imin = i;
            }
        }
        v[j] = min;
        matches[imin] += 1;
        if matches[imin] == 1 {
            col_of[imin] = j;
            row_of[j] = imin;
        } else {
            row_of[j] = NONE;
        }
    }
    let mut free = Vec::new();
    for i in 0..n {
        match matches[i] {
            0 => free.push(i),
            1 => {
                let j1 = col_of[i];
                let row = &c[i * n..(i + 1) * n];
                let min = (0..n)
                    .filter(|&j| j != j1)
                    .map(|j| row[j] - v[j])
                    .fold(f64::INFINITY, f64::min);
                v[j1] -= min;
            }
            _ => {}
        }
    }
    free
}

fn augmenting_row_reduction(
    c: &[f64],
    n: usize,
    free_in: &[usize],
    col_of: &mut [usize],
    row_of: &mut [usize],
    v: &mut [f64],
) -> Vec<usize> {
    let mut queue: Vec<usize> = free_in.to_vec();
    let mut free_out = Vec::new();
    let mut k = 0;
    // Reassignments can bid a column down in tiny steps; past this budget the
    // remaining rows are left to the shortest-path phase.
    let mut budget = 2 * n;
    while k < queue.len() {
        if budget == 0 {
            free_out.extend_from_slice(&queue[k..]);
            break;
        }
        budget -= 1;
        let i = queue[k];
        k += 1;
        let row = &c[i * n..(i + 1) * n];
        let (mut umin, mut usub) = (f64::INFINITY, f64::INFINITY);
        let (mut j1, mut j2) = (0, 0);
        for j in 0..n {
            let h = row[j] - v[j];
            if h < usub {
                if h >= umin {
                    usub = h;
                    j2 = j;
                } else {
                    usub = umin;
                    j2 = j1;
                    umin = h;
                    j1 = j;
                }
            }
        }
        let mut i0 = row_of[j1];
        // A decrement lost to rounding would let two rows trade a column forever.
        let lowered = v[j1] - (usub - umin);
        let strict = lowered < v[j1];
        if strict {
            v[j1] = lowered;
        } else if i0 != NONE {
            j1 = j2;
            i0 = row_of[j2];
        }
        col_of[i] = j1;
        row_of[j1] = i;
        if i0 != NONE {
            col_of[i0] = NONE;
            if strict {
                // Reprocess the displaced row next.
                k -= 1;
                queue[k] = i0;
            } else {
                free_out.push(i0);
            }
        }
    }
    free_out
}

#[allow(clippy::too_many_arguments)]
fn augment(
    c: &[f64],
    n: usize,
    start: usize,
    col_of: &mut [usize],
    row_of: &mut [usize],
    v: &mut [f64],
    d: &mut [f64],
    pred: &mut [usize],
    cols: &mut [usize],
) {
    let row = &c[start * n..(start + 1) * n];
    for j in 0..n {
        d[j] = row[j] - v[j];
        pred[j] = start;
        cols[j] = j;
    }
    // cols[..low] are scanned, cols[low..up] sit at the current minimum and
    // wait to be scanned, cols[up..] are unreached.
    let (mut low, mut up) = (0usize, 0usize);
    let mut last = 0usize;
    let mut min = 0.0;
    let end = 'search: loop {
        if up == low {
            last = low;
            min = d[cols[up]];
            up += 1;
            for k in up..n {
                let j = cols[k];
                let h = d[j];
                if h <= min {
                    if h < min {
                        up = low;
                        min = h;
                    }
                    cols[k] = cols[up];
                    cols[up] = j;
                    up += 1;
                }
            }
            for &j in &cols[low..up] {
                if row_of[j] == NONE {
                    break 'search j;
                }
            }
        }
        let j1 = cols[low];
        low += 1;
        let i = row_of[j1];
        let ri = &c[i * n..(i + 1) * n];
        let u1 = ri[j1] - v[j1] - min;
        let mut k = up;
        while k < n {
            let j = cols[k];
            let h = ri[j] - v[j] - u1;
            if h < d[j] {
                d[j] = h;
                pred[j] = i;
                if h == min {
                    if row_of[j] == NONE {
                        break 'search j;
                    }
                    cols[k] = cols[up];
                    cols[up] = j;
                    up += 1;
                }
            }
            k += 1;
        }
    };
    for &j in &cols[..last] {
        v[j] += d[j] - min;
    }
    let mut j = end;
    loop {
        let i = pred[j];
        row_of[j] = i;
        let next = col_of[i];
        col_of[i] = j;
        if i == start {
            break;
        }
        j = next;
    }
}

/// Exact OT between two uniform measures of the same size.
pub fn uniform_assignment_ot(
    cost: &CostMatrix,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
) -> Result<(f64, Coupling), OtError> {
    check_problem(cost, p, q)?;
    let n = cost.rows();
    let (col_of, total) = solve_assignment(cost);
    let w = 1.0 / n as f64;
    let mut plan = vec![0.0; n * n];
    for (i, &j) in col_of.iter().enumerate() {
        plan[i * n + j] = w;
    }
    let coupling = Coupling::new(plan, p.clone(), q.clone())?;
    Ok((total * w, coupling))
}
