//! Backward LP on Gaussian trees against the closed form, with timings.
//!
//! `cargo run --release -p fviot-core --example tree_lp`

use std::time::Instant;

use fviot_core::bicausal::backward_lp_value;
use fviot_core::linalg::SpdMatrix;
use fviot_core::oracle::exact_value;
use fviot_core::process::{GaussianAR1, SquaredEuclidean};
use fviot_core::rng::SeedTree;
use fviot_core::tree::{build_tree, Conditioning, TreeConfig};

fn main() {
    let reps = 10u64;
    for conditioning in [Conditioning::SetMembers, Conditioning::NodeState] {
        println!("{conditioning:?}");
        for horizon in 1..=12usize {
            let mx = GaussianAR1::new(vec![1.0], SpdMatrix::scaled_identity(1, 1.0), horizon).unwrap();
            let my = GaussianAR1::new(vec![2.0], SpdMatrix::scaled_identity(1, 0.25), horizon).unwrap();
            let truth = exact_value(&[1.0], &[2.0], mx.covariance(), my.covariance(), horizon).unwrap();
            let cfg = TreeConfig { samples_per_node: 1000, conditioning };
            let start = Instant::now();
            let values: Vec<f64> = (0..reps)
                .map(|r| {
                    let seeds = SeedTree::new(2024).child(&[r]);
                    let tx = build_tree(&mx, horizon, &cfg, &seeds.child(&[0])).unwrap();
                    let ty = build_tree(&my, horizon, &cfg, &seeds.child(&[1])).unwrap();
                    backward_lp_value(&tx, &ty, &SquaredEuclidean).unwrap().0
                })
                .collect();
            let mean = values.iter().sum::<f64>() / reps as f64;
            println!(
                "T={horizon:2} truth {truth:7.3} mean {mean:7.3} rel {:+.3} avg {:.3}s",
                mean / truth - 1.0,
                start.elapsed().as_secs_f64() / reps as f64
            );
            if horizon >= 12 {
                break;
            }
        }
    }
}
