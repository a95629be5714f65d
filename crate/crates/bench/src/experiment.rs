//! Seeded repetitions of one method over a list of horizons.

use std::time::Instant;

use rayon::prelude::*;

use fviot_core::bicausal::{backward_lp_value, nested_sinkhorn_value, MAX_HORIZON};
use fviot_core::fvi::{fit_value_functions, FviConfig};
use fviot_core::linalg::SpdMatrix;
use fviot_core::oracle::exact_value;
use fviot_core::ot::SinkhornOptions;
use fviot_core::process::{GaussianAR1, SquaredEuclidean};
use fviot_core::rng::{derive_seed, SeedTree};
use fviot_core::tree::{build_tree, TreeConfig};

use crate::config::{ConfigError, ExperimentConfig, Method};
use crate::report::{ExperimentReport, ReportRow};
use crate::BenchError;

/// The two Gaussian random walks of `config` over `horizon` steps.
pub fn models(config: &ExperimentConfig, horizon: usize) -> Result<(GaussianAR1, GaussianAR1), BenchError> {
    let d = config.dim;
    let sx = SpdMatrix::new(d, config.sigma_x.clone()).map_err(|e| BenchError::Model(format!("sigma_x: {e}")))?;
    let sy = SpdMatrix::new(d, config.sigma_y.clone()).map_err(|e| BenchError::Model(format!("sigma_y: {e}")))?;
    let mx = GaussianAR1::new(config.x0.clone(), sx, horizon).map_err(|e| BenchError::Model(e.to_string()))?;
    let my = GaussianAR1::new(config.y0.clone(), sy, horizon).map_err(|e| BenchError::Model(e.to_string()))?;
    Ok((mx, my))
}

/// Closed-form value at `horizon`.
pub fn actual_value(config: &ExperimentConfig, horizon: usize) -> Result<f64, BenchError> {
    let (mx, my) = models(config, horizon)?;
    exact_value(&config.x0, &config.y0, mx.covariance(), my.covariance(), horizon)
        .map_err(|e| BenchError::Model(e.to_string()))
}

/// Seed of repetition `rep`.
pub fn rep_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, &[rep as u64])
}

/// One repetition: the estimate for `config.horizons[index]` under `seed`.
pub fn run_once(config: &ExperimentConfig, index: usize, seed: u64) -> Result<f64, BenchError> {
    let horizon = config.horizons[index];
    let (mx, my) = models(config, horizon)?;
    let cost = SquaredEuclidean;
    match config.method {
        Method::Oracle => actual_value(config, horizon),
        Method::TreeLp | Method::AdaptedSinkhorn => {
            let seeds = SeedTree::new(seed);
            let tree_config = TreeConfig {
                samples_per_node: config.samples_per_node,
                conditioning: config.conditioning,
            };
            let tx = build_tree(&mx, horizon, &tree_config, &seeds.child(&[0]))?;
            let ty = build_tree(&my, horizon, &tree_config, &seeds.child(&[1]))?;
            if config.method == Method::TreeLp {
                Ok(backward_lp_value(&tx, &ty, &cost)?.0)
            } else {
                Ok(nested_sinkhorn_value(&tx, &ty, &cost, SinkhornOptions::new(config.epsilon))?.value)
            }
        }
        Method::Fvi => {
            let fvi = fvi_config(config, index, seed);
            Ok(fit_value_functions(&mx, &my, &cost, &fvi)?.v0_estimate)
        }
    }
}

/// The FVI hyperparameters for `config.horizons[index]`.
pub fn fvi_config(config: &ExperimentConfig, index: usize, seed: u64) -> FviConfig {
    let mut fvi = FviConfig::new(config.horizons[index], config.dim);
    fvi.paths = config.paths;
    fvi.ot_samples = config.ot_samples;
    fvi.grad_steps = config.grad_steps[index];
    fvi.batch = config.batch;
    fvi.lr = config.lr;
    fvi.tau = config.tau;
    fvi.clip = config.clip.range(config.dim);
    fvi.target = config.target;
    fvi.seed = seed;
    fvi
}

fn check_compatible(config: &ExperimentConfig) -> Result<(), BenchError> {
    if config.method.uses_trees() {
        if config.dim != 1 {
            return Err(ConfigError::Incompatible(format!("tree methods require d=1 (got d={})", config.dim)).into());
        }
        if let Some(&t) = config.horizons.iter().find(|&&t| t > MAX_HORIZON) {
            return Err(ConfigError::Range {
                key: "T",
                reason: format!("tree methods are capped at T={MAX_HORIZON} (got {t})"),
            }
            .into());
        }
    }
    for &t in &config.horizons {
        models(config, t)?;
    }
    Ok(())
}

/// Sample mean and standard deviation with divisor `n − 1` (0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every horizon of `config`, `config.reps` times each (once for the
/// oracle). Rows follow the horizon order; repetitions are gathered by index.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, BenchError> {
    check_compatible(config)?;
    let mut report = ExperimentReport::default();
    for (index, &horizon) in config.horizons.iter().enumerate() {
        let actual = actual_value(config, horizon)?;
        let reps = if config.method == Method::Oracle { 1 } else { config.reps };
        let runs: Vec<(f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let start = Instant::now();
                let value = run_once(config, index, rep_seed(config.seed, rep))?;
                Ok((value, start.elapsed().as_secs_f64()))
            })
            .collect::<Vec<Result<_, BenchError>>>()
            .into_iter()
            .collect::<Result<_, _>>()?;
        let estimates: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let (est_mean, est_sd) = mean_sd(&estimates);
        let avg_runtime_s = runs.iter().map(|r| r.1).sum::<f64>() / reps as f64;
        log::info!("{} T={horizon}: actual={actual} mean={est_mean} sd={est_sd}", config.method);
        report.rows.push(ReportRow {
            method: config.method.name().to_string(),
            horizon,
            dimension: config.dim,
            actual,
            est_mean,
            est_sd,
            avg_runtime_s,
            reps,
            seed: config.seed,
            params: config.method_params(index),
            estimates,
        });
    }
    Ok(report)
}
