use fviot_core::ot::{
    exact_ot, kl_divergence, sinkhorn, transport_simplex, wasserstein_p_1d, CostMatrix, DiscreteMeasure,
    SinkhornOptions,
};
use fviot_testkit::vertex_enumeration_ot;
use proptest::prelude::*;

/// Weights `k_i / Σk` from positive integer counts.
fn rational(counts: &[u32]) -> DiscreteMeasure {
    let total: u32 = counts.iter().sum();
    DiscreteMeasure::new(counts.iter().map(|&k| k as f64 / total as f64).collect()).unwrap()
}

fn instance(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u32>, Vec<u32>)> {
    (1..=max, 1..=max).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-5.0..5.0f64, n * m),
            prop::collection::vec(1u32..6, n),
            prop::collection::vec(1u32..6, m),
        )
    })
}

fn assert_feasible(plan: &fviot_core::ot::Coupling, p: &DiscreteMeasure, q: &DiscreteMeasure) {
    let (n, m) = (p.len(), q.len());
    for i in 0..n {
        let s: f64 = (0..m).map(|j| plan.get(i, j)).sum();
        assert!((s - p.weights()[i]).abs() <= 1e-7);
    }
    for j in 0..m {
        let s: f64 = (0..n).map(|i| plan.get(i, j)).sum();
        assert!((s - q.weights()[j]).abs() <= 1e-7);
    }
    assert!(plan.as_slice().iter().all(|&x| x >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exact_matches_vertex_enumeration((c, a, b) in instance(4)) {
        let (p, q) = (rational(&a), rational(&b));
        let cost = CostMatrix::new(a.len(), b.len(), c.clone()).unwrap();
        let (value, plan) = exact_ot(&cost, &p, &q).unwrap();
        let brute = vertex_enumeration_ot(&c, p.weights(), q.weights());
        prop_assert!((value - brute).abs() < 1e-9, "{} vs {}", value, brute);
        assert_feasible(&plan, &p, &q);
        prop_assert!((plan.transport_cost(&cost) - value).abs() < 1e-9);
    }

    #[test]
    fn exact_is_permutation_invariant((c, a, b) in instance(6), seed in any::<u64>()) {
        let (n, m) = (a.len(), b.len());
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..m).collect();
        // Cheap deterministic shuffle from the seed.
        let mut s = seed | 1;
        for k in (1..n).rev() { s ^= s << 13; s ^= s >> 7; s ^= s << 17; rows.swap(k, (s % (k as u64 + 1)) as usize); }
        for k in (1..m).rev() { s ^= s << 13; s ^= s >> 7; s ^= s << 17; cols.swap(k, (s % (k as u64 + 1)) as usize); }
        let cost = CostMatrix::new(n, m, c.clone()).unwrap();
        let permuted = CostMatrix::from_fn(n, m, |i, j| c[rows[i] * m + cols[j]]).unwrap();
        let pa: Vec<u32> = rows.iter().map(|&i| a[i]).collect();
        let pb: Vec<u32> = cols.iter().map(|&j| b[j]).collect();
        let (v1, _) = exact_ot(&cost, &rational(&a), &rational(&b)).unwrap();
        let (v2, _) = exact_ot(&permuted, &rational(&pa), &rational(&pb)).unwrap();
        prop_assert!((v1 - v2).abs() < 1e-9);
    }

    #[test]
    fn assignment_and_simplex_agree(n in 2usize..12, c in prop::collection::vec(0.0..10.0f64, 144)) {
        let cost = CostMatrix::new(n, n, c[..n * n].to_vec()).unwrap();
        let u = DiscreteMeasure::uniform(n);
        let (a, _) = exact_ot(&cost, &u, &u).unwrap();
        let (b, _) = transport_simplex(&cost, &u, &u).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_exact_is_squared_w2(
        pts in (1usize..20).prop_flat_map(|n| (prop::collection::vec(-3.0..3.0f64, n), prop::collection::vec(-3.0..3.0f64, n)))
    ) {
        let (xs, ys) = pts;
        let n = xs.len();
        let cost = CostMatrix::from_fn(n, n, |i, j| (xs[i] - ys[j]).powi(2)).unwrap();
        let u = DiscreteMeasure::uniform(n);
        let (value, _) = exact_ot(&cost, &u, &u).unwrap();
        let w2 = wasserstein_p_1d(&xs, &ys, 2.0).unwrap();
        prop_assert!((value - w2 * w2).abs() < 1e-9 * (1.0 + value));
    }

    #[test]
    fn sinkhorn_bounds_and_monotone_in_epsilon((c, a, b) in instance(4)) {
        let (p, q) = (rational(&a), rational(&b));
        let cost = CostMatrix::new(a.len(), b.len(), c).unwrap();
        let (exact, _) = exact_ot(&cost, &p, &q).unwrap();
        let mut previous = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01, 0.001] {
            // Near-degenerate costs converge too slowly at small epsilon to
            // reach the tolerance; the rounded plan keeps the bounds valid anyway.
            let opts = SinkhornOptions::new(eps).with_tol(1e-10).with_max_iter(50_000);
            let out = sinkhorn(&cost, &p, &q, opts).unwrap();
            assert_feasible(&out.plan, &p, &q);
            prop_assert!(out.value >= exact - 1e-9, "eps {}: {} < {}", eps, out.value, exact);
            prop_assert!(out.value <= previous + 1e-6, "eps {}: {} > {}", eps, out.value, previous);
            prop_assert!(out.kl >= 0.0);
            previous = out.value;
        }
    }

    #[test]
    fn kl_is_nonnegative((c, a, b) in instance(5), eps in 0.05..5.0f64) {
        let (p, q) = (rational(&a), rational(&b));
        let cost = CostMatrix::new(a.len(), b.len(), c).unwrap();
        let out = sinkhorn(&cost, &p, &q, SinkhornOptions::new(eps)).unwrap();
        prop_assert!(kl_divergence(&out.plan, &p, &q).unwrap() >= 0.0);
        let (_, plan) = exact_ot(&cost, &p, &q).unwrap();
        prop_assert!(kl_divergence(&plan, &p, &q).unwrap() >= 0.0);
    }
}
