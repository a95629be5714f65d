//! One-step empirical Bellman targets.

use rand::RngCore;

use super::net::SeparableValueNet;
use crate::ot::{exact_ot_value, sinkhorn, CostMatrix, DiscreteMeasure, OtError, SinkhornOptions};
use crate::process::{ProcessModel, StageCost};

/// How the one-step empirical transport problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TargetMode {
    #[default]
    Exact,
    /// Sinkhorn at the given regularization; the target is the transport
    /// cost of the rounded plan.
    Entropic { epsilon: f64 },
}

/// A target together with the range of the cost matrix it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanTarget {
    pub value: f64,
    pub cost_min: f64,
    pub cost_max: f64,
    /// Always `true` in exact mode.
    pub converged: bool,
}

/// Scratch buffers reused across targets on one thread.
#[derive(Debug, Default)]
pub struct TargetScratch {
    xs: Vec<f64>,
    ys: Vec<f64>,
    cost: Vec<f64>,
}

/// Empirical Bellman target at the history pair `(hist_x, hist_y)` of time `t`.
///
/// Draws `b` successors on each side, forms `c_{t+1}(x'_i, y'_j) + C_{t+1}(x'_i, y'_j)`
/// with the continuation read from `net` at `h = horizon − t − 1` (and zero on
/// the last step), and solves the uniform `b × b` transport problem.
#[allow(clippy::too_many_arguments)]
pub fn empirical_bellman_target(
    net: &SeparableValueNet,
    horizon: usize,
    t: usize,
    hist_x: &[f64],
    hist_y: &[f64],
    model_x: &dyn ProcessModel,
    model_y: &dyn ProcessModel,
    cost: &dyn StageCost,
    b: usize,
    mode: TargetMode,
    rng: &mut dyn RngCore,
    scratch: &mut TargetScratch,
) -> Result<BellmanTarget, OtError> {
    assert!(t < horizon, "time {t} outside 0..{horizon}");
    assert!(b >= 1, "empty empirical measure");
    let d = model_x.dimension();
    scratch.xs.clear();
    scratch.ys.clear();
    model_x.sample_next(hist_x, b, rng, &mut scratch.xs);
    model_y.sample_next(hist_y, b, rng, &mut scratch.ys);

    scratch.cost.clear();
    scratch.cost.resize(b * b, 0.0);
    let h = horizon - t - 1;
    if h > 0 {
        net.forward_pairs(h, &scratch.xs, &scratch.ys, &mut scratch.cost);
    }
    for (i, xi) in scratch.xs.chunks_exact(d).enumerate() {
        let row = &mut scratch.cost[i * b..(i + 1) * b];
        for (c, yj) in row.iter_mut().zip(scratch.ys.chunks_exact(d)) {
            *c += cost.eval(t + 1, xi, yj);
        }
    }
    let cost_min = scratch.cost.iter().copied().fold(f64::INFINITY, f64::min);
    let cost_max = scratch.cost.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let matrix = CostMatrix::new(b, b, std::mem::take(&mut scratch.cost))?;
    let uniform = DiscreteMeasure::uniform(b);
    let result = match mode {
        TargetMode::Exact => exact_ot_value(&matrix, &uniform, &uniform).map(|value| BellmanTarget {
            value,
            cost_min,
            cost_max,
            converged: true,
        }),
        TargetMode::Entropic { epsilon } => {
            sinkhorn(&matrix, &uniform, &uniform, SinkhornOptions::new(epsilon)).map(|out| BellmanTarget {
                value: out.transport_cost,
                cost_min,
                cost_max,
                converged: out.converged,
            })
        }
    };
    scratch.cost = matrix.into_data();
    result
}
