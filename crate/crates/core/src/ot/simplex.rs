//! Transportation simplex.
//!
//! The basis is a spanning tree of the bipartite supply/demand graph with
//! `n + m − 1` arcs. The start is the north-west corner rule. Entering arcs are
//! priced with Dantzig's rule (most negative reduced cost) over the whole
//! matrix for small instances and over rotating blocks for large ones; after a
//! run of degenerate pivots the solver switches to Bland's rule (lowest cell
//! index enters, lowest cell index leaves among ties) until progress resumes.
//! Final flows are recomputed from the original marginals on the optimal
//! basis, so accumulated pivot rounding does not leak into the plan.

use super::measure::{check_problem, CostMatrix, Coupling, DiscreteMeasure, OtError};

/// Instances with at most this many cells price every cell on every pivot.
const FULL_PRICING_CELLS: usize = 4096;

const NONE: usize = usize::MAX;

struct Basis<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    /// `(row, col)` of each basic arc; slots are reused when arcs swap.
    arcs: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// Arc slots incident to each node; rows are `0..n`, columns `n..n+m`.
    adjacency: Vec<Vec<usize>>,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    order: Vec<usize>,
}

impl<'a> Basis<'a> {
    fn north_west(cost: &'a [f64], p: &[f64], q: &[f64]) -> Self {
        let (n, m) = (p.len(), q.len());
        let mut arcs = Vec::with_capacity(n + m - 1);
        let mut flow = Vec::with_capacity(n + m - 1);
        let (mut i, mut j) = (0, 0);
        let (mut rs, mut rd) = (p[0], q[0]);
        loop {
            if i == n - 1 && j == m - 1 {
                arcs.push((i, j));
                flow.push(rs.min(rd).max(0.0));
                break;
            }
            let move_row = if i == n - 1 {
                false
            } else if j == m - 1 {
                true
            } else {
                rs < rd
            };
            arcs.push((i, j));
            if move_row {
                flow.push(rs.max(0.0));
                rd -= rs;
                i += 1;
                rs = p[i];
            } else {
                flow.push(rd.max(0.0));
                rs -= rd;
                j += 1;
                rd = q[j];
            }
        }
        debug_assert_eq!(arcs.len(), n + m - 1);
        let mut adjacency = vec![Vec::new(); n + m];
        for (slot, &(r, c)) in arcs.iter().enumerate() {
            adjacency[r].push(slot);
            adjacency[n + c].push(slot);
        }
        let mut basis = Self {
            n,
            m,
            cost,
            arcs,
            flow,
            adjacency,
            parent: vec![NONE; n + m],
            parent_arc: vec![NONE; n + m],
            depth: vec![0; n + m],
            potential: vec![0.0; n + m],
            order: Vec::with_capacity(n + m),
        };
        basis.rebuild_tree();
        basis
    }

    /// Re-roots the tree at row 0 and recomputes depths and potentials.
    fn rebuild_tree(&mut self) {
        let n = self.n;
        self.parent[0] = NONE;
        self.parent_arc[0] = NONE;
        self.depth[0] = 0;
        self.potential[0] = 0.0;
        self.order.clear();
        self.order.push(0);
        let mut head = 0;
        while head < self.order.len() {
            let node = self.order[head];
            head += 1;
            for &slot in &self.adjacency[node] {
                if slot == self.parent_arc[node] {
                    continue;
                }
                let (r, c) = self.arcs[slot];
                let child = if node == r { n + c } else { r };
                self.parent[child] = node;
                self.parent_arc[child] = slot;
                self.depth[child] = self.depth[node] + 1;
                // u_r + v_c = c_rc on every basic arc.
                self.potential[child] = self.cost[r * self.m + c] - self.potential[node];
                self.order.push(child);
            }
        }
        debug_assert_eq!(self.order.len(), n + self.m, "basis is not a spanning tree");
    }

    #[inline]
    fn reduced_cost(&self, cell: usize) -> f64 {
        let (r, c) = (cell / self.m, cell % self.m);
        self.cost[cell] - self.potential[r] - self.potential[self.n + c]
    }

    /// Arcs on the cycle closed by entering `(row, col)`, walking from the
    /// column back to the row. Even positions lose flow, odd positions gain.
    fn cycle(&self, row: usize, col: usize, out: &mut Vec<usize>) {
        out.clear();
        let mut a = self.n + col;
        let mut b = row;
        let mut tail = Vec::new();
        while self.depth[a] > self.depth[b] {
            out.push(self.parent_arc[a]);
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            tail.push(self.parent_arc[b]);
            b = self.parent[b];
        }
        while a != b {
            out.push(self.parent_arc[a]);
            a = self.parent[a];
            tail.push(self.parent_arc[b]);
            b = self.parent[b];
        }
        out.extend(tail.into_iter().rev());
    }

    fn pivot(&mut self, row: usize, col: usize, cycle: &[usize]) -> f64 {
        let m = self.m;
        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        let mut leaving_cell = NONE;
        for &slot in cycle.iter().step_by(2) {
            let f = self.flow[slot].max(0.0);
            let (r, c) = self.arcs[slot];
            let cell = r * m + c;
            if f < theta || (f == theta && cell < leaving_cell) {
                theta = f;
                leaving = slot;
                leaving_cell = cell;
            }
        }
        for (k, &slot) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                self.flow[slot] -= theta;
            } else {
                self.flow[slot] += theta;
            }
        }
        let (lr, lc) = self.arcs[leaving];
        self.adjacency[lr].retain(|&s| s != leaving);
        self.adjacency[self.n + lc].retain(|&s| s != leaving);
        self.arcs[leaving] = (row, col);
        self.flow[leaving] = theta;
        self.adjacency[row].push(leaving);
        self.adjacency[self.n + col].push(leaving);
        self.rebuild_tree();
        theta
    }

    /// Flows of the current basis for the given marginals, by leaf peeling.
    fn tree_flows(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        let mut residual: Vec<f64> = p.iter().chain(q.iter()).copied().collect();
        let mut flow = vec![0.0; self.arcs.len()];
        // Children before parents: reverse BFS order.
        for &node in self.order.iter().rev() {
            let slot = self.parent_arc[node];
            if slot == NONE {
                continue;
            }
            let f = residual[node];
            flow[slot] = f;
            residual[self.parent[node]] -= f;
        }
        flow
    }
}

/// Solves `min ⟨C, π⟩` over couplings of `p` and `q` exactly.
pub fn transport_simplex(
    cost: &CostMatrix,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
) -> Result<(f64, Coupling), OtError> {
    check_problem(cost, p, q)?;
    let (n, m) = (p.len(), q.len());
    let c = cost.as_slice();
    let scale = c.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let tol = 1e-11 * scale;
    let cells = n * m;
    let block = if cells <= FULL_PRICING_CELLS {
        cells
    } else {
        ((cells as f64).sqrt() as usize).max(n + m)
    };
    let max_pivots = 50 * cells + 10_000;

    let mut basis = Basis::north_west(c, p.weights(), q.weights());
    let mut cycle = Vec::with_capacity(n + m);
    let mut next = 0usize;
    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut pivots = 0usize;

    loop {
        let entering = if bland {
            (0..cells).find(|&cell| basis.reduced_cost(cell) < -tol)
        } else {
            price_block(&basis, cells, block, tol, &mut next)
        };
        let Some(cell) = entering else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(OtError::PivotLimit(max_pivots));
        }
        let (row, col) = (cell / m, cell % m);
        basis.cycle(row, col, &mut cycle);
        let theta = basis.pivot(row, col, &cycle);
        if theta <= 0.0 {
            degenerate_run += 1;
            if degenerate_run > n + m {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }
    }

    let flows = basis.tree_flows(p.weights(), q.weights());
    let mut plan = vec![0.0; cells];
    for (slot, &(r, col)) in basis.arcs.iter().enumerate() {
        plan[r * m + col] += flows[slot].max(0.0);
    }
    let value = plan.iter().zip(c).map(|(x, y)| x * y).sum();
    let coupling = Coupling::new(plan, p.clone(), q.clone())?;
    Ok((value, coupling))
}

/// Dantzig pricing over rotating blocks; `None` once a full sweep finds no
/// negative reduced cost.
fn price_block(basis: &Basis<'_>, cells: usize, block: usize, tol: f64, next: &mut usize) -> Option<usize> {
    let mut scanned = 0;
    while scanned < cells {
        let len = block.min(cells - scanned);
        let mut best = -tol;
        let mut best_cell = None;
        for k in 0..len {
            let cell = (*next + k) % cells;
            let rc = basis.reduced_cost(cell);
            if rc < best {
                best = rc;
                best_cell = Some(cell);
            }
        }
        *next = (*next + len) % cells;
        scanned += len;
        if best_cell.is_some() {
            return best_cell;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_square_instance() {
        // Uniform marginals make every basis highly degenerate.
        let n = 6;
        let cost = CostMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64).unwrap();
        let u = DiscreteMeasure::uniform(n);
        let (value, plan) = transport_simplex(&cost, &u, &u).unwrap();
        assert!((value - plan.transport_cost(&cost)).abs() < 1e-12);
        assert!(value >= 0.0);
    }

    #[test]
    fn single_row_and_column() {
        let cost = CostMatrix::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let p = DiscreteMeasure::uniform(1);
        let q = DiscreteMeasure::new(vec![0.2, 0.3, 0.5]).unwrap();
        let (value, _) = transport_simplex(&cost, &p, &q).unwrap();
        assert!((value - (0.2 + 0.6 + 1.5)).abs() < 1e-12);
    }
}
