use fviot_core::bicausal::{backward_lp_value, nested_sinkhorn_value, BicausalError};
use fviot_core::linalg::SpdMatrix;
use fviot_core::ot::SinkhornOptions;
use fviot_core::process::{GaussianAR1, SquaredEuclidean};
use fviot_core::rng::SeedTree;
use fviot_core::tree::{build_tree, ScenarioTree, TreeConfig};
use fviot_testkit::vertex_enumeration_ot;
use rand::Rng;

fn random_tree(branching: usize, horizon: usize, rng: &mut impl Rng) -> ScenarioTree {
    let nodes: usize = (0..=horizon).map(|t| branching.pow(t as u32)).sum();
    let states = (0..nodes).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut probs = vec![1.0];
    for _ in 0..(nodes - 1) / branching {
        let raw: Vec<f64> = (0..branching).map(|_| rng.random_range(0.1..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|r| r / sum));
    }
    ScenarioTree::new(1, branching, states, probs).unwrap()
}

/// Two-step value written out as nested brute-force transport problems.
fn nested_brute_force(tx: &ScenarioTree, ty: &ScenarioTree) -> f64 {
    let sq = |a: usize, b: usize| (tx.state(a)[0] - ty.state(b)[0]).powi(2);
    let probs = |t: &ScenarioTree, n: usize| t.children(n).map(|c| t.prob(c)).collect::<Vec<_>>();
    let mut first = Vec::new();
    for a in tx.children(0) {
        for b in ty.children(0) {
            let inner: Vec<f64> =
                tx.children(a).flat_map(|u| ty.children(b).map(move |v| (u, v))).map(|(u, v)| sq(u, v)).collect();
            first.push(sq(a, b) + vertex_enumeration_ot(&inner, &probs(tx, a), &probs(ty, b)));
        }
    }
    vertex_enumeration_ot(&first, &probs(tx, 0), &probs(ty, 0))
}

/// The same tree with the two subtrees of the root exchanged.
fn mirror(tree: &ScenarioTree) -> ScenarioTree {
    let mut states = vec![tree.state(0)[0]];
    let mut probs = vec![1.0];
    for t in 1..=tree.horizon() {
        let (start, len) = (tree.level_start(t), tree.level_len(t));
        let half = len / 2;
        for k in (half..len).chain(0..half) {
            states.push(tree.state(start + k)[0]);
            probs.push(tree.prob(start + k));
        }
    }
    ScenarioTree::new(1, 2, states, probs).unwrap()
}

#[test]
fn one_step_value_is_plain_transport() {
    let seeds = SeedTree::new(1);
    for case in 0..30u64 {
        let mut rng = seeds.rng(&[case]);
        let b = 2 + case as usize % 3;
        let (tx, ty) = (random_tree(b, 1, &mut rng), random_tree(b, 1, &mut rng));
        let cost: Vec<f64> = tx
            .children(0)
            .flat_map(|i| ty.children(0).map(move |j| (i, j)))
            .map(|(i, j)| (tx.state(i)[0] - ty.state(j)[0]).powi(2))
            .collect();
        let p: Vec<f64> = tx.children(0).map(|c| tx.prob(c)).collect();
        let q: Vec<f64> = ty.children(0).map(|c| ty.prob(c)).collect();
        let (value, _) = backward_lp_value(&tx, &ty, &SquaredEuclidean).unwrap();
        assert!((value - vertex_enumeration_ot(&cost, &p, &q)).abs() < 1e-9, "case {case}");
    }
}

#[test]
fn two_step_value_matches_nested_enumeration() {
    let seeds = SeedTree::new(2);
    for case in 0..30u64 {
        let mut rng = seeds.rng(&[case]);
        let b = 2 + case as usize % 2;
        let (tx, ty) = (random_tree(b, 2, &mut rng), random_tree(b, 2, &mut rng));
        let (value, _) = backward_lp_value(&tx, &ty, &SquaredEuclidean).unwrap();
        assert!((value - nested_brute_force(&tx, &ty)).abs() < 1e-9, "case {case}");
    }
}

#[test]
fn value_ignores_child_order_and_side() {
    let seeds = SeedTree::new(3);
    for case in 0..10u64 {
        let mut rng = seeds.rng(&[case]);
        let (tx, ty) = (random_tree(2, 4, &mut rng), random_tree(2, 4, &mut rng));
        let base = backward_lp_value(&tx, &ty, &SquaredEuclidean).unwrap().0;
        let mirrored = backward_lp_value(&mirror(&tx), &ty, &SquaredEuclidean).unwrap().0;
        let swapped = backward_lp_value(&ty, &tx, &SquaredEuclidean).unwrap().0;
        assert!((base - mirrored).abs() < 1e-10 && (base - swapped).abs() < 1e-10);
    }
}

#[test]
fn value_grows_with_the_horizon() {
    let model_x = GaussianAR1::new(vec![1.0], SpdMatrix::identity(1), 6).unwrap();
    let model_y = GaussianAR1::new(vec![2.0], SpdMatrix::scaled_identity(1, 0.25), 6).unwrap();
    let cfg = TreeConfig::default();
    let tx = build_tree(&model_x, 6, &cfg, &SeedTree::new(4)).unwrap();
    let ty = build_tree(&model_y, 6, &cfg, &SeedTree::new(5)).unwrap();
    let mut previous = 0.0;
    for t in 1..=6 {
        let value = backward_lp_value(&tx.truncate(t).unwrap(), &ty.truncate(t).unwrap(), &SquaredEuclidean).unwrap().0;
        assert!(value > previous, "T={t}: {value} <= {previous}");
        previous = value;
    }
}

#[test]
fn entropic_values_decrease_to_the_lp() {
    let seeds = SeedTree::new(6);
    for case in 0..20u64 {
        let mut rng = seeds.rng(&[case]);
        let horizon = 1 + case as usize % 2;
        let (tx, ty) = (random_tree(2, horizon, &mut rng), random_tree(2, horizon, &mut rng));
        let lp = backward_lp_value(&tx, &ty, &SquaredEuclidean).unwrap().0;
        let mut previous = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01, 0.001] {
            let opts = SinkhornOptions::new(eps).with_tol(1e-10).with_max_iter(50_000);
            let out = nested_sinkhorn_value(&tx, &ty, &SquaredEuclidean, opts).unwrap();
            assert!(out.value >= lp - 1e-9, "case {case}, eps {eps}: {} < {lp}", out.value);
            assert!(out.linear_value >= lp - 1e-9);
            assert!(out.value <= previous + 1e-6, "case {case}, eps {eps}");
            previous = out.value;
        }
        assert!((previous - lp).abs() <= 0.02 * (1.0 + lp), "case {case}: {previous} vs {lp}");
    }
}

#[test]
fn mismatched_and_oversized_trees_are_refused() {
    let mut rng = SeedTree::new(7).rng(&[]);
    let (a, b) = (random_tree(2, 2, &mut rng), random_tree(2, 3, &mut rng));
    assert!(matches!(
        backward_lp_value(&a, &b, &SquaredEuclidean),
        Err(BicausalError::HorizonMismatch { .. })
    ));
    let big = random_tree(2, 14, &mut rng);
    assert!(matches!(
        backward_lp_value(&big, &big, &SquaredEuclidean),
        Err(BicausalError::HorizonTooLarge(14))
    ));
}
