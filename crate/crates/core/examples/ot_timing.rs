//! Rough timings of the exact OT solvers on random squared-distance costs.
//!
//! `cargo run --release -p fviot-core --example ot_timing`

use std::time::Instant;

use fviot_core::ot::{exact_ot, transport_simplex, CostMatrix, DiscreteMeasure};
use fviot_core::rng::SeedTree;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let seeds = SeedTree::new(1);
    for (n, d, reps) in [(50, 1, 200), (300, 5, 10), (300, 1, 10)] {
        let mut rng = seeds.rng(&[n as u64, d as u64]);
        let instances: Vec<CostMatrix> = (0..reps)
            .map(|_| {
                let xs: Vec<f64> = (0..n * d).map(|_| -> f64 { StandardNormal.sample(&mut rng) }).collect();
                let ys: Vec<f64> = (0..n * d).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 2.0 + 0.5 * z }).collect::<Vec<f64>>();
                CostMatrix::from_fn(n, n, |i, j| {
                    (0..d).map(|k| (xs[i * d + k] - ys[j * d + k]).powi(2)).sum()
                })
                .unwrap()
            })
            .collect();
        let u = DiscreteMeasure::uniform(n);
        let start = Instant::now();
        let a: f64 = instances.iter().map(|c| exact_ot(c, &u, &u).unwrap().0).sum();
        let t_assign = start.elapsed().as_secs_f64() / reps as f64;
        let start = Instant::now();
        let b: f64 = instances.iter().map(|c| transport_simplex(c, &u, &u).unwrap().0).sum();
        let t_simplex = start.elapsed().as_secs_f64() / reps as f64;
        println!(
            "n={n} d={d}: assignment {:.3} ms, simplex {:.3} ms, |diff| {:.2e}",
            t_assign * 1e3,
            t_simplex * 1e3,
            (a - b).abs()
        );
    }
}
