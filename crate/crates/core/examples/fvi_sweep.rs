//! FVI on the 1-d Gaussian pair against the closed form.
//!
//! `cargo run --release -p fviot-core --example fvi_sweep -- [reps] [T...]`

use std::time::Instant;

use fviot_core::fvi::{fit_value_functions, FviConfig};
use fviot_core::linalg::SpdMatrix;
use fviot_core::oracle::exact_value;
use fviot_core::process::{GaussianAR1, SquaredEuclidean};

fn grad_steps(horizon: usize) -> usize {
    match horizon {
        0..=5 => 50,
        6 => 40,
        7 => 30,
        _ => 20,
    }
}

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let reps = args.first().copied().unwrap_or(3);
    let horizons = if args.len() > 1 { args[1..].to_vec() } else { vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20] };
    for horizon in horizons {
        let mx = GaussianAR1::new(vec![1.0], SpdMatrix::scaled_identity(1, 1.0), horizon).unwrap();
        let my = GaussianAR1::new(vec![2.0], SpdMatrix::scaled_identity(1, 0.25), horizon).unwrap();
        let truth = exact_value(&[1.0], &[2.0], mx.covariance(), my.covariance(), horizon).unwrap();
        let start = Instant::now();
        let values: Vec<f64> = (0..reps as u64)
            .map(|r| {
                let mut cfg = FviConfig::new(horizon, 1);
                cfg.grad_steps = grad_steps(horizon);
                cfg.seed = r;
                fit_value_functions(&mx, &my, &SquaredEuclidean, &cfg).unwrap().v0_estimate
            })
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        println!(
            "T={horizon:>2} truth={truth:>8.3} mean={mean:>8.3} rel={:>+6.1}% values={values:.3?} avg={:.2}s",
            100.0 * (mean - truth) / truth,
            start.elapsed().as_secs_f64() / reps as f64
        );
    }
}
