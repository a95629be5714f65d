use fviot_core::linalg::SpdMatrix;
use fviot_core::process::{path_cost, sample_path_to, GaussianAR1, Path, ProcessModel, SquaredEuclidean};
use fviot_core::rng::SeedTree;
use fviot_core::tree::{build_tree, tree_expectation, Conditioning, ScenarioTree, TreeConfig, TreeError};
use fviot_testkit::mean_sd;

fn walk(x0: f64, var: f64, horizon: usize) -> GaussianAR1 {
    GaussianAR1::new(vec![x0], SpdMatrix::scaled_identity(1, var), horizon).unwrap()
}

fn members(samples: usize) -> TreeConfig {
    TreeConfig { samples_per_node: samples, conditioning: Conditioning::SetMembers }
}

#[test]
fn gaussian_successors_have_the_right_moments() {
    let cov = SpdMatrix::new(2, vec![2.0, 0.6, 0.6, 0.5]).unwrap();
    let model = GaussianAR1::new(vec![1.0, -1.0], cov, 3).unwrap();
    let mut out = Vec::new();
    let n = 200_000;
    model.sample_next(&[0.0, 0.0, 3.0, 4.0], n, &mut SeedTree::new(1).rng(&[]), &mut out);
    let (a, b): (Vec<f64>, Vec<f64>) = out.chunks_exact(2).map(|p| (p[0] - 3.0, p[1] - 4.0)).unzip();
    let (ma, sa) = mean_sd(&a);
    let (mb, sb) = mean_sd(&b);
    let cross = a.iter().zip(&b).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / (n as f64 - 1.0);
    assert!(ma.abs() < 0.02 && mb.abs() < 0.01, "{ma} {mb}");
    assert!((sa * sa - 2.0).abs() < 0.03 && (sb * sb - 0.5).abs() < 0.01);
    assert!((cross - 0.6).abs() < 0.015, "{cross}");
}

#[test]
fn sampled_paths_start_at_the_root() {
    let model = walk(1.5, 1.0, 6);
    let path = sample_path_to(&model, 4, &mut SeedTree::new(2).rng(&[]));
    assert_eq!(path.horizon(), 4);
    assert_eq!(path.point(0), &[1.5]);
}

#[test]
fn path_cost_skips_time_zero() {
    let x = Path::scalar(&[100.0, 1.0, 2.0]).unwrap();
    let y = Path::scalar(&[-100.0, 0.0, 0.0]).unwrap();
    assert_eq!(path_cost(&SquaredEuclidean, &x, &y).unwrap(), 5.0);
}

#[test]
fn one_step_tree_splits_at_the_half_normal_mean() {
    let tree = build_tree(&walk(0.0, 1.0, 1), 1, &members(1_000_000), &SeedTree::new(3)).unwrap();
    let half_normal = (2.0 / std::f64::consts::PI).sqrt();
    for node in tree.children(0) {
        assert!((tree.state(node)[0].abs() - half_normal).abs() < 0.005, "{:?}", tree.state(node));
        assert!((tree.prob(node) - 0.5).abs() < 0.002, "{}", tree.prob(node));
    }
}

#[test]
fn leaf_probabilities_sum_to_one() {
    for conditioning in [Conditioning::SetMembers, Conditioning::NodeState] {
        let cfg = TreeConfig { samples_per_node: 200, conditioning };
        let tree = build_tree(&walk(1.0, 1.0, 7), 7, &cfg, &SeedTree::new(4)).unwrap();
        let start = tree.level_start(7);
        let total: f64 = (start..tree.len()).map(|n| tree.path_probability(n)).sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
        for node in 0..start {
            let s: f64 = tree.children(node).map(|c| tree.prob(c)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn tree_preserves_the_mean_of_the_walk() {
    let horizon = 6;
    let samples = 1000;
    let tree = build_tree(&walk(1.0, 1.0, horizon), horizon, &members(samples), &SeedTree::new(5)).unwrap();
    let mean = tree_expectation(&tree, |p| p.last()[0]);
    let se = (horizon as f64 / samples as f64).sqrt();
    assert!((mean - 1.0).abs() < 4.0 * se, "{mean}");
    let second = tree_expectation(&tree, |p| (p.last()[0] - 1.0).powi(2));
    // Two-point splits keep the within-child spread out, so the variance is
    // only bounded above by the walk's.
    assert!(second <= horizon as f64 * 1.1 && second > 0.5 * horizon as f64, "{second}");
}

#[test]
fn trees_are_reproducible() {
    let model = walk(0.0, 1.0, 5);
    let a = build_tree(&model, 5, &members(300), &SeedTree::new(9)).unwrap();
    let b = build_tree(&model, 5, &members(300), &SeedTree::new(9)).unwrap();
    let c = build_tree(&model, 5, &members(300), &SeedTree::new(10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(ScenarioTree::from_text(&a.to_text()).unwrap(), a);
}

#[test]
fn multidimensional_models_are_refused() {
    let model = GaussianAR1::new(vec![0.0, 0.0], SpdMatrix::identity(2), 2).unwrap();
    assert!(matches!(
        build_tree(&model, 2, &members(10), &SeedTree::new(0)),
        Err(TreeError::Dimension(2))
    ));
}
