//! Entropic OT in the log domain.
//!
//! Minimizes `⟨C, π⟩ + ε KL(π ‖ p⊗q)` by alternating soft-min updates of the
//! dual potentials `f, g`:
//!
//! ```text
//! f_i = −ε log Σ_j q_j exp((g_j − C_ij)/ε)
//! g_j = −ε log Σ_i p_i exp((f_i − C_ij)/ε)
//! π_ij = p_i q_j exp((f_i + g_j − C_ij)/ε)
//! ```
//!
//! Iteration stops once the sup-norm change of both potentials drops below the
//! tolerance. By default the solver warm-starts through a halving schedule
//! `ε_k = max(ε, range(C)·2^{-k})` (epsilon scaling), each stage run to the
//! same tolerance; the fixed point is unchanged but small ε no longer starts
//! from potentials far from the solution. The returned plan is rounded onto the exact coupling polytope
//! (row and column down-scaling followed by a rank-one correction), and the
//! reported value is the entropic objective of that rounded plan.

use super::measure::{check_problem, kl_divergence, CostMatrix, Coupling, DiscreteMeasure, OtError};

/// Default stopping tolerance on the change of the dual potentials.
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub epsilon: f64,
    pub tol: f64,
    /// Budget shared by all scaling stages.
    pub max_iter: usize,
    pub epsilon_scaling: bool,
}

impl SinkhornOptions {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            epsilon_scaling: true,
        }
    }

    pub fn with_epsilon_scaling(mut self, on: bool) -> Self {
        self.epsilon_scaling = on;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    /// `⟨C, π⟩ + ε KL(π ‖ p⊗q)` of `plan`.
    pub value: f64,
    /// The linear part `⟨C, π⟩`.
    pub transport_cost: f64,
    pub kl: f64,
    pub plan: Coupling,
    /// Dual potentials `(f, g)` in cost units.
    pub log_potentials: (Vec<f64>, Vec<f64>),
    pub iterations: usize,
    /// `false` when `max_iter` was reached before the tolerance.
    pub converged: bool,
}

fn soft_min(values: impl Iterator<Item = f64> + Clone, epsilon: f64) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    -epsilon * (max + sum.ln())
}

pub fn sinkhorn(
    cost: &CostMatrix,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    options: SinkhornOptions,
) -> Result<SinkhornOutput, OtError> {
    check_problem(cost, p, q)?;
    let SinkhornOptions {
        epsilon,
        tol,
        max_iter,
        epsilon_scaling,
    } = options;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(OtError::BadEpsilon(epsilon));
    }
    if !(tol > 0.0) {
        return Err(OtError::BadTolerance(tol));
    }
    if let Some(index) = p.weights().iter().position(|&w| w <= 0.0) {
        return Err(OtError::ZeroWeight { side: "row", index });
    }
    if let Some(index) = q.weights().iter().position(|&w| w <= 0.0) {
        return Err(OtError::ZeroWeight { side: "column", index });
    }

    let (n, m) = (p.len(), q.len());
    let c = cost.as_slice();
    let log_p: Vec<f64> = p.weights().iter().map(|w| w.ln()).collect();
    let log_q: Vec<f64> = q.weights().iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    let mut converged;
    let mut stage_eps = if epsilon_scaling {
        (cost.max() - cost.min()).max(epsilon)
    } else {
        epsilon
    };

    loop {
        converged = false;
        while iterations < max_iter {
            iterations += 1;
            if sweep(c, &log_p, &log_q, &mut f, &mut g, stage_eps) < tol {
                converged = true;
                break;
            }
        }
        if stage_eps <= epsilon || !converged {
            break;
        }
        stage_eps = (stage_eps / 2.0).max(epsilon);
    }
    // If the budget ran out early the plan comes from the last stage reached;
    // the value is still the objective at the target ε.
    let converged = converged && stage_eps <= epsilon;

    let mut plan = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            plan[i * m + j] = (log_p[i] + log_q[j] + (f[i] + g[j] - c[i * m + j]) / stage_eps).exp();
        }
    }
    round_to_marginals(&mut plan, p.weights(), q.weights());
    let plan = Coupling::new(plan, p.clone(), q.clone())?;
    let transport_cost = plan.transport_cost(cost);
    let kl = kl_divergence(&plan, p, q)?;
    Ok(SinkhornOutput {
        value: transport_cost + epsilon * kl,
        transport_cost,
        kl,
        plan,
        log_potentials: (f, g),
        iterations,
        converged,
    })
}

/// One pair of soft-min updates; returns the sup-norm change.
fn sweep(c: &[f64], log_p: &[f64], log_q: &[f64], f: &mut [f64], g: &mut [f64], epsilon: f64) -> f64 {
    let (n, m) = (f.len(), g.len());
    let mut delta: f64 = 0.0;
    for i in 0..n {
        let row = &c[i * m..(i + 1) * m];
        let new = soft_min((0..m).map(|j| log_q[j] + (g[j] - row[j]) / epsilon), epsilon);
        delta = delta.max((new - f[i]).abs());
        f[i] = new;
    }
    for j in 0..m {
        let new = soft_min((0..n).map(|i| log_p[i] + (f[i] - c[i * m + j]) / epsilon), epsilon);
        delta = delta.max((new - g[j]).abs());
        g[j] = new;
    }
    delta
}

/// Projects a nonnegative matrix onto the couplings of `p` and `q`.
fn round_to_marginals(plan: &mut [f64], p: &[f64], q: &[f64]) {
    let (n, m) = (p.len(), q.len());
    for i in 0..n {
        let row = &mut plan[i * m..(i + 1) * m];
        let s: f64 = row.iter().sum();
        if s > p[i] {
            let k = p[i] / s;
            row.iter_mut().for_each(|x| *x *= k);
        }
    }
    for j in 0..m {
        let s: f64 = (0..n).map(|i| plan[i * m + j]).sum();
        if s > q[j] {
            let k = q[j] / s;
            (0..n).for_each(|i| plan[i * m + j] *= k);
        }
    }
    let row_err: Vec<f64> = (0..n)
        .map(|i| (p[i] - plan[i * m..(i + 1) * m].iter().sum::<f64>()).max(0.0))
        .collect();
    let col_err: Vec<f64> = (0..m)
        .map(|j| (q[j] - (0..n).map(|i| plan[i * m + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = row_err.iter().sum();
    if total > 0.0 {
        for i in 0..n {
            for j in 0..m {
                plan[i * m + j] += row_err[i] * col_err[j] / total;
            }
        }
    }
}
