use fviot_core::fvi::{
    empirical_bellman_target, fit_value_functions, grad_loss, mean_loss, Example, FviConfig, FviError,
    SeparableValueNet, TargetMode, TargetScratch,
};
use fviot_core::linalg::SpdMatrix;
use fviot_core::process::{GaussianAR1, ProcessModel, SquaredEuclidean, StageCost};
use fviot_core::rng::SeedTree;
use fviot_testkit::{central_gradient, mean_sd, permutation_min};
use rand::Rng;

fn random_net(d: usize, rng: &mut impl Rng) -> SeparableValueNet {
    let mut net = SeparableValueNet::init(d, rng);
    for p in net.f1_coeffs_mut() {
        *p = rng.random_range(-1.0..1.0);
    }
    for p in net.f3_coeffs_mut() {
        *p = rng.random_range(-1.0..1.0);
    }
    // Nonzero biases so hidden units sit on both sides of the kink.
    let len = net.params().len();
    for p in &mut net.params_mut()[6..len] {
        *p += rng.random_range(-0.3..0.3);
    }
    net
}

fn walk(x0: f64, var: f64, horizon: usize) -> GaussianAR1 {
    GaussianAR1::new(vec![x0], SpdMatrix::scaled_identity(1, var), horizon).unwrap()
}

#[test]
fn gradient_matches_central_differences() {
    let seeds = SeedTree::new(11);
    let tau = 1.0;
    let mut checked = 0;
    for draw in 0..100u64 {
        let mut rng = seeds.rng(&[draw]);
        let d = 1 + (draw as usize % 3);
        let net = random_net(d, &mut rng);
        let points: Vec<(usize, Vec<f64>, Vec<f64>)> = (0..8)
            .map(|_| {
                let x = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                (rng.random_range(0..6usize), x, y)
            })
            .collect();
        // Half the residuals inside the quadratic zone, half in the linear one.
        let targets: Vec<f64> = points
            .iter()
            .enumerate()
            .map(|(k, (h, x, y))| {
                let f = net.forward(*h, x, y);
                let offset = if k % 2 == 0 { rng.random_range(0.1..0.8) } else { rng.random_range(1.5..4.0) };
                if rng.random_bool(0.5) { f + offset } else { f - offset }
            })
            .collect();
        let batch: Vec<Example> = points
            .iter()
            .zip(&targets)
            .map(|((h, x, y), &target)| Example { h: *h, x, y, target })
            .collect();
        let (_, analytic) = grad_loss(&net, &batch, tau);
        let numeric = central_gradient(
            |theta| mean_loss(&SeparableValueNet::from_params(d, theta.to_vec()).unwrap(), &batch, tau),
            net.params(),
            1e-5,
        );
        for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            let scale = a.abs().max(n.abs());
            if scale < 1e-7 {
                // Both vanish (dead ReLU); relative error is meaningless.
                assert!((a - n).abs() < 1e-9, "draw {draw} coordinate {k}: {a} vs {n}");
                continue;
            }
            assert!((a - n).abs() <= 1e-4 * scale, "draw {draw} coordinate {k}: {a} vs {n}");
            checked += 1;
        }
    }
    assert!(checked > 5000, "only {checked} nonzero coordinates compared");
}

#[test]
fn linear_regime_gradient_ignores_residual_size() {
    let net = random_net(2, &mut SeedTree::new(3).rng(&[]));
    let (x, y) = ([0.2, -0.4], [1.0, 0.5]);
    let f = net.forward(3, &x, &y);
    let grad = |target: f64| grad_loss(&net, &[Example { h: 3, x: &x, y: &y, target }], 1.0).1;
    assert_eq!(grad(f + 2.0), grad(f + 20.0));
    let flipped: Vec<f64> = grad(f - 5.0).iter().map(|g| -g).collect();
    assert_eq!(grad(f + 5.0), flipped);
}

#[test]
fn zero_noise_target_is_the_single_atom_cost() {
    let net = random_net(1, &mut SeedTree::new(5).rng(&[]));
    let (mx, my) = (walk(0.5, 0.0, 4), walk(-1.0, 0.0, 4));
    let mut scratch = TargetScratch::default();
    let target = empirical_bellman_target(
        &net,
        4,
        1,
        &[0.5, 0.5],
        &[-1.0, -1.0],
        &mx,
        &my,
        &SquaredEuclidean,
        7,
        TargetMode::Exact,
        &mut SeedTree::new(1).rng(&[]),
        &mut scratch,
    )
    .unwrap();
    let expected = 2.25 + net.forward(2, &[0.5], &[-1.0]);
    assert!((target.value - expected).abs() < 1e-12, "{} vs {expected}", target.value);
}

/// Recomputes a target by brute force over all `b!` matchings from the same draws.
fn brute_force_target(
    net: &SeparableValueNet,
    horizon: usize,
    t: usize,
    hx: &[f64],
    hy: &[f64],
    mx: &dyn ProcessModel,
    my: &dyn ProcessModel,
    b: usize,
    rng: &mut fviot_core::rng::StreamRng,
) -> f64 {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    mx.sample_next(hx, b, rng, &mut xs);
    my.sample_next(hy, b, rng, &mut ys);
    let mut cost = Vec::with_capacity(b * b);
    for x in &xs {
        for y in &ys {
            let continuation = if t + 1 == horizon { 0.0 } else { net.forward(horizon - t - 1, &[*x], &[*y]) };
            cost.push(SquaredEuclidean.eval(t + 1, &[*x], &[*y]) + continuation);
        }
    }
    permutation_min(&cost, b) / b as f64
}

#[test]
fn targets_match_brute_force_matching() {
    let seeds = SeedTree::new(21);
    let (mx, my) = (walk(1.0, 1.0, 5), walk(2.0, 0.25, 5));
    let mut scratch = TargetScratch::default();
    for case in 0..40u64 {
        let mut rng = seeds.rng(&[case]);
        let net = if case % 4 == 0 { SeparableValueNet::zeros(1) } else { random_net(1, &mut rng) };
        let t = case as usize % 5;
        let hx: Vec<f64> = (0..=t).map(|_| rng.random_range(-2.0..3.0)).collect();
        let hy: Vec<f64> = (0..=t).map(|_| rng.random_range(-2.0..3.0)).collect();
        let b = 2 + case as usize % 5;
        let draw = seeds.rng(&[case, 1]);
        let got = empirical_bellman_target(
            &net,
            5,
            t,
            &hx,
            &hy,
            &mx,
            &my,
            &SquaredEuclidean,
            b,
            TargetMode::Exact,
            &mut draw.clone(),
            &mut scratch,
        )
        .unwrap();
        let want = brute_force_target(&net, 5, t, &hx, &hy, &mx, &my, b, &mut draw.clone());
        assert!((got.value - want).abs() < 1e-10, "case {case}: {} vs {want}", got.value);
    }
}

#[test]
fn targets_lie_within_cost_range() {
    let seeds = SeedTree::new(8);
    let (mx, my) = (walk(1.0, 1.0, 3), walk(2.0, 0.25, 3));
    let mut scratch = TargetScratch::default();
    for case in 0..60u64 {
        let mut rng = seeds.rng(&[case]);
        let net = random_net(1, &mut rng);
        let mode = match case % 3 {
            0 => TargetMode::Exact,
            1 => TargetMode::Entropic { epsilon: 0.5 },
            _ => TargetMode::Entropic { epsilon: 0.01 },
        };
        let t = case as usize % 3;
        let hx = vec![1.0; t + 1];
        let hy = vec![2.0; t + 1];
        let target = empirical_bellman_target(
            &net, 3, t, &hx, &hy, &mx, &my, &SquaredEuclidean, 20, mode, &mut rng, &mut scratch,
        )
        .unwrap();
        assert!(target.cost_min <= target.value + 1e-12 && target.value <= target.cost_max + 1e-12, "{target:?}");
    }
}

/// `E[W₂²]` between two independent size-`b` empirical measures of
/// `N(1, 1)` and `N(2, 0.25)`, by sorted matching.
fn sorted_matching_mean(b: usize, reps: usize, seeds: &SeedTree) -> (f64, f64) {
    use rand_distr::{Distribution, StandardNormal};
    let values: Vec<f64> = (0..reps as u64)
        .map(|k| {
            let mut rng = seeds.rng(&[k]);
            let mut xs: Vec<f64> = (0..b).map(|_| 1.0 + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            let mut ys: Vec<f64> = (0..b).map(|_| 2.0 + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            ys.sort_by(f64::total_cmp);
            xs.iter().zip(&ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / b as f64
        })
        .collect();
    let (mean, sd) = mean_sd(&values);
    (mean, sd / (reps as f64).sqrt())
}

#[test]
fn one_step_gaussian_target_matches_empirical_transport() {
    // The population value is `(x − y)² + (1 + 0.25 − 2·0.5) = 1.25`; targets
    // estimate the expected empirical value, which sits O(1/B) above it.
    let (mx, my) = (walk(1.0, 1.0, 1), walk(2.0, 0.25, 1));
    let net = SeparableValueNet::zeros(1);
    let seeds = SeedTree::new(2024);
    let mut scratch = TargetScratch::default();
    let values: Vec<f64> = (0..200u64)
        .map(|k| {
            empirical_bellman_target(
                &net,
                1,
                0,
                &[1.0],
                &[2.0],
                &mx,
                &my,
                &SquaredEuclidean,
                50,
                TargetMode::Exact,
                &mut seeds.rng(&[k]),
                &mut scratch,
            )
            .unwrap()
            .value
        })
        .collect();
    let (mean, sd) = mean_sd(&values);
    let se = sd / (values.len() as f64).sqrt();
    let (reference, reference_se) = sorted_matching_mean(50, 20_000, &SeedTree::new(77));
    let combined = (se * se + reference_se * reference_se).sqrt();
    assert!((mean - reference).abs() < 3.0 * combined, "mean {mean} vs {reference} (se {combined})");
    assert!(reference > 1.25 && reference < 1.35, "bias {}", reference - 1.25);
    assert!((mean - 1.25).abs() < 0.1, "mean {mean}");
}

fn small_config(horizon: usize, seed: u64) -> FviConfig {
    let mut cfg = FviConfig::new(horizon, 1);
    cfg.paths = 256;
    cfg.ot_samples = 16;
    cfg.grad_steps = 10;
    cfg.batch = 64;
    cfg.seed = seed;
    cfg
}

#[test]
fn fitting_is_deterministic() {
    let (mx, my) = (walk(1.0, 1.0, 3), walk(2.0, 0.25, 3));
    let run = |seed| fit_value_functions(&mx, &my, &SquaredEuclidean, &small_config(3, seed)).unwrap();
    let (a, b, c) = (run(4), run(4), run(5));
    assert_eq!(a.net, b.net);
    assert_eq!(a.v0_estimate.to_bits(), b.v0_estimate.to_bits());
    let means = |o: &fviot_core::fvi::FviOutput| o.diagnostics.steps.iter().map(|s| s.target_mean).collect::<Vec<_>>();
    assert_eq!(means(&a), means(&b));
    assert_ne!(a.net, c.net);
    assert_eq!(a.diagnostics.steps.iter().map(|s| s.t).collect::<Vec<_>>(), [2, 1, 0]);
    assert!(a.diagnostics.steps.iter().all(|s| s.losses.len() == 10));
}

#[test]
fn clipped_parameters_stay_in_range() {
    let (mx, my) = (walk(1.0, 1.0, 2), walk(2.0, 0.25, 2));
    let out = fit_value_functions(&mx, &my, &SquaredEuclidean, &small_config(2, 1)).unwrap();
    assert!(out.net.params().iter().all(|p| (-1.0..=1.0).contains(p)));
    assert_eq!(out.v0_estimate, out.diagnostics.raw_v0.max(0.0));
}

#[test]
fn entropic_targets_run_and_report() {
    let (mx, my) = (walk(1.0, 1.0, 2), walk(2.0, 0.25, 2));
    let mut cfg = small_config(2, 3);
    cfg.target = TargetMode::Entropic { epsilon: 0.05 };
    let out = fit_value_functions(&mx, &my, &SquaredEuclidean, &cfg).unwrap();
    assert!(out.v0_estimate.is_finite());
    assert!(out.diagnostics.steps.iter().all(|s| s.unconverged <= cfg.paths));
}

#[test]
fn config_violations_name_the_field() {
    let (mx, my) = (walk(1.0, 1.0, 2), walk(2.0, 0.25, 2));
    let field = |cfg: &FviConfig| match fit_value_functions(&mx, &my, &SquaredEuclidean, cfg) {
        Err(FviError::Config { field, .. }) => field,
        other => panic!("expected a config error, got {other:?}"),
    };
    let mut cfg = small_config(2, 0);
    cfg.paths = 10;
    assert_eq!(field(&cfg), "paths");
    let mut cfg = small_config(2, 0);
    cfg.grad_steps = 0;
    assert_eq!(field(&cfg), "grad_steps");
    let mut cfg = small_config(2, 0);
    cfg.target = TargetMode::Entropic { epsilon: 0.0 };
    assert_eq!(field(&cfg), "epsilon");
    let cfg = small_config(3, 0);
    assert!(matches!(
        fit_value_functions(&mx, &my, &SquaredEuclidean, &cfg),
        Err(FviError::HorizonMismatch { .. })
    ));
}

#[test]
fn accrued_cost_cancels_in_the_residual() {
    // With a history value `A + C_t` regressed against `A + target`, the
    // residual and hence the loss gradient do not depend on `A`.
    let net = random_net(1, &mut SeedTree::new(6).rng(&[]));
    let (x, y) = ([0.4], [1.1]);
    let target = 3.7;
    let base = grad_loss(&net, &[Example { h: 2, x: &x, y: &y, target }], 1.0);
    let mut shifted = net.clone();
    shifted.f3_coeffs_mut()[0] += 5.25;
    let accrued = grad_loss(&shifted, &[Example { h: 2, x: &x, y: &y, target: target + 5.25 }], 1.0);
    assert!((base.0 - accrued.0).abs() < 1e-12);
    for (a, b) in base.1.iter().zip(&accrued.1) {
        assert!((a - b).abs() < 1e-12);
    }
}
