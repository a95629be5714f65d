//! FVI on the 5-d isotropic Gaussian pair (`N = 4000`, `B = 300`, `G = 400`).
//!
//! `cargo run --release -p fviot-core --example fvi_multi -- [seed]`

use std::time::Instant;

use fviot_core::fvi::{fit_value_functions, FviConfig};
use fviot_core::linalg::SpdMatrix;
use fviot_core::oracle::exact_value;
use fviot_core::process::{GaussianAR1, SquaredEuclidean};

fn main() {
    let seed: u64 = std::env::args().nth(1).map(|a| a.parse().unwrap()).unwrap_or(0);
    let (d, horizon) = (5, 5);
    let mx = GaussianAR1::new(vec![1.0; d], SpdMatrix::scaled_identity(d, 1.21), horizon).unwrap();
    let my = GaussianAR1::new(vec![2.0; d], SpdMatrix::scaled_identity(d, 0.01), horizon).unwrap();
    let truth = exact_value(&[1.0; 5], &[2.0; 5], mx.covariance(), my.covariance(), horizon).unwrap();
    let mut cfg = FviConfig::new(horizon, d);
    cfg.paths = 4000;
    cfg.ot_samples = 300;
    cfg.grad_steps = 400;
    cfg.seed = seed;
    let start = Instant::now();
    let out = fit_value_functions(&mx, &my, &SquaredEuclidean, &cfg).unwrap();
    for s in &out.diagnostics.steps {
        println!("t={} target_mean={:.3} targets={:.1}s train={:.1}s", s.t, s.target_mean, s.target_seconds, s.train_seconds);
    }
    println!("truth={truth:.3} estimate={:.3} time={:.1}s", out.v0_estimate, start.elapsed().as_secs_f64());
}
