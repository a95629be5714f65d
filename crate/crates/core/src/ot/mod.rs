//! Finite-support optimal transport: exact solvers and log-domain Sinkhorn.

mod assignment;
mod measure;
mod simplex;
mod sinkhorn;

pub use assignment::{solve_assignment, uniform_assignment_ot};
pub use measure::{
    kl_divergence, wasserstein_p_1d, CostMatrix, Coupling, DiscreteMeasure, OtError, MARGINAL_TOL, MASS_TOL,
};
pub use simplex::transport_simplex;
pub use sinkhorn::{sinkhorn, SinkhornOptions, SinkhornOutput, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Exact optimal transport value and an optimal vertex plan.
///
/// Equal-size uniform marginals go through the assignment solver; everything
/// else through the transportation simplex.
pub fn exact_ot(cost: &CostMatrix, p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<(f64, Coupling), OtError> {
    if p.len() == q.len() && p.len() > 1 && p.is_uniform() && q.is_uniform() {
        uniform_assignment_ot(cost, p, q)
    } else {
        transport_simplex(cost, p, q)
    }
}

/// [`exact_ot`] without materializing the plan.
pub fn exact_ot_value(cost: &CostMatrix, p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64, OtError> {
    if p.len() == q.len() && p.len() > 1 && p.is_uniform() && q.is_uniform() {
        measure::check_problem(cost, p, q)?;
        let (_, total) = solve_assignment(cost);
        Ok(total / p.len() as f64)
    } else {
        Ok(transport_simplex(cost, p, q)?.0)
    }
}

/// Exact OT value between two-atom measures `(p0, 1−p0)` and `(q0, 1−q0)`
/// for the row-major 2×2 cost `c`.
///
/// The feasible set is the segment `π₀₀ ∈ [max(0, p0+q0−1), min(p0, q0)]` and
/// the objective is linear on it, so the optimum sits at an endpoint.
#[inline]
pub fn ot_2x2(c: [f64; 4], p0: f64, q0: f64) -> f64 {
    let (p1, q1) = (1.0 - p0, 1.0 - q0);
    let lo = (p0 - q1).max(0.0);
    let hi = p0.min(q0);
    let at = |s: f64| s * c[0] + (p0 - s) * c[1] + (q0 - s) * c[2] + (p1 - q0 + s) * c[3];
    at(lo).min(at(hi))
}
