//! The backward fitting sweep.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::adam::AdamState;
use super::net::{grad_loss, Example, SeparableValueNet};
use super::target::{empirical_bellman_target, BellmanTarget, TargetMode, TargetScratch};
use super::FviError;
use crate::process::{sample_path_to, ProcessModel, StageCost};
use crate::rng::SeedTree;

const INIT_LABEL: u64 = 0;
const STATE_LABEL: u64 = 1;
const SHUFFLE_LABEL: u64 = 2;

/// Hyperparameters of one fitting run.
#[derive(Debug, Clone, PartialEq)]
pub struct FviConfig {
    pub horizon: usize,
    pub dim: usize,
    /// States sampled per time step (`N`).
    pub paths: usize,
    /// Successors per side in each empirical transport problem (`B`).
    pub ot_samples: usize,
    /// Adam steps per time step (`G`).
    pub grad_steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Elementwise range for gradients and parameters.
    pub clip: Option<(f64, f64)>,
    /// Smooth-L1 threshold.
    pub tau: f64,
    pub target: TargetMode,
    pub seed: u64,
}

impl FviConfig {
    /// Defaults: `N = 2000`, `B = 50`, `G = 50`, batch 128, `lr = 0.01`,
    /// `τ = 1`, exact targets, clipping to `[−1, 1]` only when `dim == 1`.
    pub fn new(horizon: usize, dim: usize) -> Self {
        Self {
            horizon,
            dim,
            paths: 2000,
            ot_samples: 50,
            grad_steps: 50,
            batch: 128,
            lr: 0.01,
            clip: (dim == 1).then_some((-1.0, 1.0)),
            tau: 1.0,
            target: TargetMode::Exact,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), FviError> {
        let bad = |field: &'static str, reason: String| Err(FviError::Config { field, reason });
        if self.horizon == 0 {
            return bad("horizon", "must be at least 1".into());
        }
        if self.dim == 0 {
            return bad("dim", "must be at least 1".into());
        }
        if self.batch == 0 {
            return bad("batch", "must be at least 1".into());
        }
        if self.paths < self.batch {
            return bad("paths", format!("{} is smaller than the batch size {}", self.paths, self.batch));
        }
        if self.ot_samples == 0 {
            return bad("ot_samples", "must be at least 1".into());
        }
        if self.grad_steps == 0 {
            return bad("grad_steps", "must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", format!("{} is not a positive finite number", self.lr));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", format!("{} is not a positive finite number", self.tau));
        }
        if let Some((lo, hi)) = self.clip {
            if !(lo < hi) {
                return bad("clip", format!("empty range [{lo}, {hi}]"));
            }
        }
        if let TargetMode::Entropic { epsilon } = self.target {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return bad("epsilon", format!("{epsilon} is not a positive finite number"));
            }
        }
        Ok(())
    }
}

/// Per-time-step record of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub t: usize,
    pub target_mean: f64,
    /// Minibatch loss before each Adam step.
    pub losses: Vec<f64>,
    /// Entropic targets that hit the iteration cap.
    pub unconverged: usize,
    pub target_seconds: f64,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FviDiagnostics {
    /// Ordered from `t = T − 1` down to `t = 0`.
    pub steps: Vec<StepDiagnostics>,
    /// `forward(T, x0, y0)` before the reporting clamp at zero.
    pub raw_v0: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FviOutput {
    pub net: SeparableValueNet,
    /// `max(forward(T, x0, y0), 0)`.
    pub v0_estimate: f64,
    pub diagnostics: FviDiagnostics,
}

/// Fits the shared cost-to-go network backwards from `t = T − 1` to `t = 0`.
pub fn fit_value_functions(
    model_x: &dyn ProcessModel,
    model_y: &dyn ProcessModel,
    cost: &dyn StageCost,
    config: &FviConfig,
) -> Result<FviOutput, FviError> {
    config.validate()?;
    for (side, model) in [("x", model_x), ("y", model_y)] {
        if model.dimension() != config.dim {
            return Err(FviError::DimensionMismatch { side, expected: config.dim, found: model.dimension() });
        }
        if model.horizon() != config.horizon {
            return Err(FviError::HorizonMismatch { side, expected: config.horizon, found: model.horizon() });
        }
    }
    let start = Instant::now();
    let seeds = SeedTree::new(config.seed);
    let big_t = config.horizon;
    let d = config.dim;
    let mut net = SeparableValueNet::init(d, &mut seeds.rng(&[INIT_LABEL]));
    let mut adam = AdamState::new(net.params().len(), config.lr);
    let mut steps = Vec::with_capacity(big_t);

    for t in (0..big_t).rev() {
        let clock = Instant::now();
        let samples = compute_targets(&net, model_x, model_y, cost, config, &seeds, t)?;
        let target_seconds = clock.elapsed().as_secs_f64();
        let unconverged = samples.iter().filter(|s| !s.target.converged).count();
        let target_mean = samples.iter().map(|s| s.target.value).sum::<f64>() / samples.len() as f64;

        let clock = Instant::now();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut seeds.rng(&[SHUFFLE_LABEL, t as u64]));
        let h = big_t - t;
        let mut losses = Vec::with_capacity(config.grad_steps);
        let mut cursor = 0;
        let mut batch = Vec::with_capacity(config.batch);
        for _ in 0..config.grad_steps {
            batch.clear();
            for _ in 0..config.batch {
                let s = &samples[order[cursor]];
                batch.push(Example { h, x: &s.x, y: &s.y, target: s.target.value });
                cursor = (cursor + 1) % order.len();
            }
            let (loss, grad) = grad_loss(&net, &batch, config.tau);
            losses.push(loss);
            adam.step(net.params_mut(), &grad, config.clip);
        }
        let train_seconds = clock.elapsed().as_secs_f64();
        log::info!(
            "t={t} target_mean={target_mean:.6} loss_first={:.6} loss_last={:.6} targets={target_seconds:.2}s train={train_seconds:.2}s",
            losses[0],
            losses[losses.len() - 1],
        );
        if unconverged > 0 {
            log::warn!("t={t}: {unconverged} entropic targets stopped at the iteration cap");
        }
        steps.push(StepDiagnostics { t, target_mean, losses, unconverged, target_seconds, train_seconds });
    }

    let raw_v0 = net.forward(big_t, model_x.initial_state(), model_y.initial_state());
    Ok(FviOutput {
        net,
        v0_estimate: raw_v0.max(0.0),
        diagnostics: FviDiagnostics { steps, raw_v0, total_seconds: start.elapsed().as_secs_f64() },
    })
}

struct Sample {
    x: Vec<f64>,
    y: Vec<f64>,
    target: BellmanTarget,
}

/// `N` states at time `t` with their targets, in sample-index order.
fn compute_targets(
    net: &SeparableValueNet,
    model_x: &dyn ProcessModel,
    model_y: &dyn ProcessModel,
    cost: &dyn StageCost,
    config: &FviConfig,
    seeds: &SeedTree,
    t: usize,
) -> Result<Vec<Sample>, FviError> {
    let d = config.dim;
    let results: Vec<Result<Sample, FviError>> = (0..config.paths)
        .into_par_iter()
        .map_init(TargetScratch::default, |scratch, n| {
            let mut rng = seeds.rng(&[STATE_LABEL, t as u64, n as u64]);
            let hx = sample_path_to(model_x, t, &mut rng);
            let hy = sample_path_to(model_y, t, &mut rng);
            let target = empirical_bellman_target(
                net,
                config.horizon,
                t,
                hx.as_flat(),
                hy.as_flat(),
                model_x,
                model_y,
                cost,
                config.ot_samples,
                config.target,
                &mut rng,
                scratch,
            )
            .map_err(|source| FviError::Solver { t, sample: n, source })?;
            Ok(Sample { x: hx.last()[..d].to_vec(), y: hy.last()[..d].to_vec(), target })
        })
        .collect();
    results.into_iter().collect()
}
