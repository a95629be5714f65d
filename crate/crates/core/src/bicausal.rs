//! Backward induction for bicausal transport between two scenario trees.
//!
//! For tree processes the one-step kernels depend only on the current node and
//! the cost is separable in time, so the value of a history pair depends only
//! on the current node pair. With `U_T(i, j) = c_T(x_i, y_j)`:
//!
//! ```text
//! U_t(i, j) = 1{t ≥ 1} · c_t(x_i, y_j) + OT( [U_{t+1}(a, b)]_{a ∈ ch(i), b ∈ ch(j)}, p(·|i), q(·|j) )
//! ```
//!
//! and the bicausal value is `U_0(root, root)`. Tables grow as `b^{2t}`, which
//! is why horizons are capped at [`MAX_HORIZON`].

use rayon::prelude::*;

use crate::ot::{exact_ot, ot_2x2, sinkhorn, CostMatrix, DiscreteMeasure, OtError, SinkhornOptions};
use crate::process::StageCost;
use crate::tree::ScenarioTree;

/// Largest horizon accepted; the depth-13 table of a binary tree pair alone
/// holds `4^13 ≈ 6.7·10^7` values.
pub const MAX_HORIZON: usize = 13;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BicausalError {
    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("horizon {0} exceeds the cap of {MAX_HORIZON} (tables grow as branching^(2T))")]
    HorizonTooLarge(usize),
    #[error("one-step problem at depth {depth}, nodes ({x_node}, {y_node}): {source}")]
    Solver {
        depth: usize,
        x_node: usize,
        y_node: usize,
        source: OtError,
    },
    #[error("Sinkhorn did not converge at depth {depth}, nodes ({x_node}, {y_node}) after {iterations} iterations")]
    NotConverged {
        depth: usize,
        x_node: usize,
        y_node: usize,
        iterations: usize,
    },
}

/// `U_t` for every depth, indexed by node positions within the level.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePairValueTable {
    levels: Vec<Vec<f64>>,
    cols: Vec<usize>,
}

impl NodePairValueTable {
    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    /// Value for the `i`-th x-node and `j`-th y-node at depth `t`.
    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.levels[t][i * self.cols[t] + j]
    }

    /// Row-major `U_t`.
    pub fn level(&self, t: usize) -> &[f64] {
        &self.levels[t]
    }
}

/// Result of the entropic recursion.
#[derive(Debug, Clone)]
pub struct NestedSinkhornOutput {
    /// Root value of the entropic recursion, KL penalties included.
    pub value: f64,
    /// Expected total cost under the coupling assembled from the per-node
    /// Sinkhorn plans, without the penalties.
    pub linear_value: f64,
    pub table: NodePairValueTable,
    pub linear_table: NodePairValueTable,
}

fn check(tree_x: &ScenarioTree, tree_y: &ScenarioTree) -> Result<usize, BicausalError> {
    if tree_x.horizon() != tree_y.horizon() {
        return Err(BicausalError::HorizonMismatch {
            left: tree_x.horizon(),
            right: tree_y.horizon(),
        });
    }
    if tree_x.dim() != tree_y.dim() {
        return Err(BicausalError::DimensionMismatch {
            left: tree_x.dim(),
            right: tree_y.dim(),
        });
    }
    if tree_x.horizon() > MAX_HORIZON {
        return Err(BicausalError::HorizonTooLarge(tree_x.horizon()));
    }
    Ok(tree_x.horizon())
}

fn terminal_level(tree_x: &ScenarioTree, tree_y: &ScenarioTree, cost: &dyn StageCost, t: usize) -> Vec<f64> {
    let (sx, nx) = (tree_x.level_start(t), tree_x.level_len(t));
    let (sy, ny) = (tree_y.level_start(t), tree_y.level_len(t));
    let mut level = vec![0.0; nx * ny];
    level.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        let x = tree_x.state(sx + i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = cost.eval(t, x, tree_y.state(sy + j));
        }
    });
    level
}

/// The one-step problem at a node pair: child cost matrix and child marginals.
struct Subproblem {
    cost: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

fn subproblem(tree_x: &ScenarioTree, tree_y: &ScenarioTree, next: &[f64], next_cols: usize, t: usize, i: usize, j: usize) -> Subproblem {
    let (bx, by) = (tree_x.branching(), tree_y.branching());
    let (sx, sy) = (tree_x.level_start(t + 1), tree_y.level_start(t + 1));
    let xs = tree_x.children(tree_x.level_start(t) + i);
    let ys = tree_y.children(tree_y.level_start(t) + j);
    let mut cost = Vec::with_capacity(bx * by);
    for a in xs.clone() {
        let row = &next[(a - sx) * next_cols..];
        for b in ys.clone() {
            cost.push(row[b - sy]);
        }
    }
    Subproblem {
        cost,
        p: xs.map(|a| tree_x.prob(a)).collect(),
        q: ys.map(|b| tree_y.prob(b)).collect(),
    }
}

fn stage(tree_x: &ScenarioTree, tree_y: &ScenarioTree, cost: &dyn StageCost, t: usize, i: usize, j: usize) -> f64 {
    if t == 0 {
        0.0
    } else {
        cost.eval(t, tree_x.state(tree_x.level_start(t) + i), tree_y.state(tree_y.level_start(t) + j))
    }
}

fn solver_error(tree_x: &ScenarioTree, tree_y: &ScenarioTree, t: usize, i: usize, j: usize, source: OtError) -> BicausalError {
    BicausalError::Solver {
        depth: t,
        x_node: tree_x.level_start(t) + i,
        y_node: tree_y.level_start(t) + j,
        source,
    }
}

/// Exact bicausal value by backward induction with an exact one-step LP.
pub fn backward_lp_value(
    tree_x: &ScenarioTree,
    tree_y: &ScenarioTree,
    cost: &dyn StageCost,
) -> Result<(f64, NodePairValueTable), BicausalError> {
    let horizon = check(tree_x, tree_y)?;
    let binary = tree_x.branching() == 2 && tree_y.branching() == 2;
    let mut levels = vec![Vec::new(); horizon + 1];
    levels[horizon] = terminal_level(tree_x, tree_y, cost, horizon);
    for t in (0..horizon).rev() {
        let (nx, ny) = (tree_x.level_len(t), tree_y.level_len(t));
        let next_cols = tree_y.level_len(t + 1);
        let next = &levels[t + 1];
        let mut level = vec![0.0; nx * ny];
        // Errors are gathered in row order so the reported node pair does not
        // depend on the schedule.
        level
            .par_chunks_mut(ny)
            .enumerate()
            .map(|(i, row)| -> Result<(), BicausalError> {
                if binary {
                    // Children of the i-th node sit at positions 2i, 2i+1 of the next level.
                    let (sx1, sy1) = (tree_x.level_start(t + 1), tree_y.level_start(t + 1));
                    let p0 = tree_x.prob(sx1 + 2 * i);
                    let r0 = &next[2 * i * next_cols..(2 * i + 1) * next_cols];
                    let r1 = &next[(2 * i + 1) * next_cols..(2 * i + 2) * next_cols];
                    for (j, v) in row.iter_mut().enumerate() {
                        let b = 2 * j;
                        let q0 = tree_y.prob(sy1 + b);
                        let ot = ot_2x2([r0[b], r0[b + 1], r1[b], r1[b + 1]], p0, q0);
                        *v = stage(tree_x, tree_y, cost, t, i, j) + ot;
                    }
                    return Ok(());
                }
                for (j, v) in row.iter_mut().enumerate() {
                    let sub = subproblem(tree_x, tree_y, next, next_cols, t, i, j);
                    let ot = solve_exact(&sub).map_err(|e| solver_error(tree_x, tree_y, t, i, j, e))?;
                    *v = stage(tree_x, tree_y, cost, t, i, j) + ot;
                }
                Ok(())
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<(), _>>()?;
        levels[t] = level;
    }
    let cols = (0..=horizon).map(|t| tree_y.level_len(t)).collect();
    let table = NodePairValueTable { levels, cols };
    Ok((table.get(0, 0, 0), table))
}

fn solve_exact(sub: &Subproblem) -> Result<f64, OtError> {
    let cost = CostMatrix::new(sub.p.len(), sub.q.len(), sub.cost.clone())?;
    let (value, _) = exact_ot(&cost, &DiscreteMeasure::new(sub.p.clone())?, &DiscreteMeasure::new(sub.q.clone())?)?;
    Ok(value)
}

/// Backward induction with an entropic one-step problem solved by Sinkhorn.
///
/// Each node pair minimizes `⟨U_{t+1}, π⟩ + ε KL(π ‖ p⊗q)` over couplings of
/// its child distributions. Alongside this value the recursion carries the
/// linear cost `L_t = c_t + ⟨L_{t+1}, π*⟩` of the same plans.
pub fn nested_sinkhorn_value(
    tree_x: &ScenarioTree,
    tree_y: &ScenarioTree,
    cost: &dyn StageCost,
    options: SinkhornOptions,
) -> Result<NestedSinkhornOutput, BicausalError> {
    let horizon = check(tree_x, tree_y)?;
    let mut levels = vec![Vec::new(); horizon + 1];
    let mut linear = vec![Vec::new(); horizon + 1];
    levels[horizon] = terminal_level(tree_x, tree_y, cost, horizon);
    linear[horizon] = levels[horizon].clone();
    for t in (0..horizon).rev() {
        let (nx, ny) = (tree_x.level_len(t), tree_y.level_len(t));
        let next_cols = tree_y.level_len(t + 1);
        let (next, next_linear) = (&levels[t + 1], &linear[t + 1]);
        let mut level = vec![0.0; nx * ny];
        let mut level_linear = vec![0.0; nx * ny];
        level
            .par_chunks_mut(ny)
            .zip(level_linear.par_chunks_mut(ny))
            .enumerate()
            .map(|(i, (row, row_linear))| -> Result<(), BicausalError> {
                for j in 0..ny {
                    let sub = subproblem(tree_x, tree_y, next, next_cols, t, i, j);
                    let lin = subproblem(tree_x, tree_y, next_linear, next_cols, t, i, j);
                    let wrap = |e| solver_error(tree_x, tree_y, t, i, j, e);
                    let matrix = CostMatrix::new(sub.p.len(), sub.q.len(), sub.cost).map_err(wrap)?;
                    let p = DiscreteMeasure::new(sub.p).map_err(wrap)?;
                    let q = DiscreteMeasure::new(sub.q).map_err(wrap)?;
                    let out = sinkhorn(&matrix, &p, &q, options).map_err(wrap)?;
                    if !out.converged {
                        return Err(BicausalError::NotConverged {
                            depth: t,
                            x_node: tree_x.level_start(t) + i,
                            y_node: tree_y.level_start(t) + j,
                            iterations: out.iterations,
                        });
                    }
                    let c = stage(tree_x, tree_y, cost, t, i, j);
                    row[j] = c + out.value;
                    let carried: f64 = out.plan.as_slice().iter().zip(&lin.cost).map(|(a, b)| a * b).sum();
                    row_linear[j] = c + carried;
                }
                Ok(())
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<(), _>>()?;
        levels[t] = level;
        linear[t] = level_linear;
    }
    let cols: Vec<usize> = (0..=horizon).map(|t| tree_y.level_len(t)).collect();
    let table = NodePairValueTable { levels, cols: cols.clone() };
    let linear_table = NodePairValueTable { levels: linear, cols };
    Ok(NestedSinkhornOutput {
        value: table.get(0, 0, 0),
        linear_value: linear_table.get(0, 0, 0),
        table,
        linear_table,
    })
}
