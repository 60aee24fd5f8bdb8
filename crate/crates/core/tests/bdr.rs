//! Blended objective, its regularized and dual forms, and the outer solvers.

use std::sync::Arc;

use bdr_core::bdr::{
    bdr_dual_objective, bdr_objective, regularized_form, solve_bdr_coordinate_descent, solve_bdr_scalar,
    AbsoluteLoss, BdrProblem, InnerMode, InnerRepresentation, LossOracle, SolverConfig, SquaredLoss,
};
use bdr_core::distributions::SamplePoint;
use bdr_core::numeric::golden_section_min;
use bdr_core::wasserstein::GroundMetric;
use proptest::prelude::*;

fn s(v: f64) -> SamplePoint {
    SamplePoint::scalar(v)
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<SamplePoint> {
    (0..=steps).map(|i| s(lo + (hi - lo) * i as f64 / steps as f64)).collect()
}

/// The samples are appended to the grid so that every ball is feasible.
fn problem(loss: Arc<dyn LossOracle>, samples: &[f64], beta: f64, eps: f64, mut g: Vec<SamplePoint>) -> BdrProblem {
    g.extend(samples.iter().map(|&v| s(v)));
    BdrProblem::data_driven(
        loss,
        samples.iter().map(|&v| s(v)).collect(),
        beta,
        eps,
        1.0,
        GroundMetric::Euclidean,
        1,
        InnerRepresentation::Grid(g),
    )
    .unwrap()
}

fn scan_min(prob: &BdrProblem, lo: f64, hi: f64, step: f64) -> f64 {
    let k = ((hi - lo) / step).round() as usize;
    (0..=k)
        .map(|i| bdr_objective(prob, &[lo + i as f64 * step]).unwrap().value)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn coordinate_descent_matches_scan_for_absolute_loss() {
    let g = grid(-1.0, 2.0, 300);
    let mut endpoints = Vec::new();
    for beta in [0.0, 1.0, 0.5] {
        let p = problem(Arc::new(AbsoluteLoss), &[0.0, 1.0], beta, 0.2, g.clone())
            .with_box(vec![-1.0], vec![2.0])
            .unwrap();
        let sol = solve_bdr_coordinate_descent(&p, &[1.7]).unwrap();
        let oracle = scan_min(&p, -1.0, 2.0, 1e-3);
        assert!((sol.value - oracle).abs() <= 2e-3, "beta {beta}: {} vs {oracle}", sol.value);
        assert!((sol.value - (beta * sol.dro_part + (1.0 - beta) * sol.saa_part)).abs() <= 1e-8);
        assert!(sol.saa_part <= sol.dro_part + 1e-8);
        if beta == 0.5 {
            assert!(endpoints[0] - 2e-3 <= sol.value && sol.value <= endpoints[1] + 2e-3);
        } else {
            endpoints.push(oracle);
        }
    }
    assert!((endpoints[1] - 0.7).abs() < 1e-9);
}

#[test]
fn coordinate_descent_with_primal_and_equal_weight_inner() {
    let g = grid(-1.0, 2.0, 60);
    for mode in [InnerMode::PrimalLp, InnerMode::EqualWeight] {
        let p = problem(Arc::new(SquaredLoss), &[0.0, 1.0], 0.5, 0.1, g.clone()).with_config(SolverConfig {
            inner_mode: mode,
            ..SolverConfig::default()
        });
        let sol = solve_bdr_coordinate_descent(&p, &[0.0]).unwrap();
        let oracle = scan_min(&p, -1.0, 2.0, 1e-3);
        assert!((sol.value - oracle).abs() <= 2e-3, "{mode:?}: {} vs {oracle}", sol.value);
    }
}

#[test]
fn dirac_dual_objective() {
    struct Linear;
    impl LossOracle for Linear {
        fn evaluate(&self, _x: &[f64], xi: &SamplePoint) -> f64 {
            xi.coords[0]
        }
        fn convex_in_x(&self) -> bool {
            true
        }
    }
    let p = problem(Arc::new(Linear), &[0.0], 1.0, 0.3, grid(0.0, 1.0, 100));
    let (_, v) = golden_section_min(|l| bdr_dual_objective(&p, &[0.0], l).unwrap(), 0.0, 10.0, 1e-10);
    assert!((v - 0.3).abs() < 1e-9);
}

#[test]
fn closed_form_inner_agrees_with_grid() {
    // h = (x − ξ)² on Ξ = [0, 1]: the supremum sits at 0, ξᵢ or 1
    let inner = Arc::new(|x: &[f64], lam: f64, xi: &SamplePoint| {
        let c = xi.coords[0];
        [0.0, c, 1.0]
            .iter()
            .map(|&z| (x[0] - z).powi(2) - lam * (z - c).abs())
            .fold(f64::MIN, f64::max)
    });
    let samples = [0.1, 0.4, 0.4, 0.9];
    let mut g: Vec<SamplePoint> = samples.iter().map(|&v| s(v)).collect();
    g.extend([s(0.0), s(1.0)]);
    let by_grid = problem(Arc::new(SquaredLoss), &samples, 0.6, 0.15, g);
    let mut closed = by_grid.clone();
    closed.inner = InnerRepresentation::ClosedForm(inner);
    closed.config.lambda0_bracket = Some([0.0, 10.0]);
    for x in [0.0, 0.3, 0.55, 1.0] {
        let a = bdr_objective(&by_grid, &[x]).unwrap().value;
        let b = bdr_objective(&closed, &[x]).unwrap().value;
        assert!((a - b).abs() < 1e-8, "x {x}: {a} vs {b}");
    }
    let sol = solve_bdr_scalar(&closed, 0.0, 1.0, 1e-10).unwrap();
    assert!((sol.value - scan_min(&by_grid, 0.0, 1.0, 1e-4)).abs() < 1e-6);
}

#[test]
fn solver_config_json_keys() {
    let cfg: SolverConfig =
        serde_json::from_str(r#"{"rel_tol": 1e-5, "max_outer": 50, "lambda0_bracket": [0, 20], "inner_mode": "primal_lp"}"#)
            .unwrap();
    assert_eq!(cfg.max_outer, 50);
    assert_eq!(cfg.inner_mode, InnerMode::PrimalLp);
    assert_eq!(cfg.lambda0_bracket, Some([0.0, 20.0]));
    assert_eq!(cfg.window, 5);
}

fn arb_instance() -> impl Strategy<Value = (Vec<f64>, f64, f64, f64)> {
    (
        proptest::collection::vec(0.0f64..1.0, 1..6),
        0.0f64..0.95,
        0.0f64..0.5,
        -0.5f64..1.5,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn regularized_identity((samples, beta, eps, x) in arb_instance()) {
        let p = problem(Arc::new(SquaredLoss), &samples, beta, eps, grid(-0.5, 1.5, 40));
        let parts = bdr_objective(&p, &[x]).unwrap();
        let (lam, f) = regularized_form(&p, &[x]).unwrap();
        prop_assert!((parts.value / (1.0 - beta) - (parts.saa + lam * f)).abs() <= 1e-8);
    }

    #[test]
    fn dual_consistency((samples, beta, eps, x) in arb_instance()) {
        let p = problem(Arc::new(SquaredLoss), &samples, beta, eps, grid(-0.5, 1.5, 40));
        let primal = bdr_objective(&p, &[x]).unwrap().value;
        let (_, dual) = golden_section_min(|l| bdr_dual_objective(&p, &[x], l).unwrap(), 0.0, 50.0, 1e-11);
        let dual = if eps == 0.0 { primal } else { dual };
        prop_assert!((primal - dual).abs() <= 1e-6, "{} vs {}", primal, dual);
    }

    #[test]
    fn pointwise_ordering_and_affinity((samples, _b, eps, x) in arb_instance()) {
        let base = problem(Arc::new(SquaredLoss), &samples, 0.0, eps, grid(-0.5, 1.5, 40));
        let parts0 = bdr_objective(&base, &[x]).unwrap();
        for k in 0..=20 {
            let beta = k as f64 * 0.05;
            let parts = bdr_objective(&base.with_beta(beta).unwrap(), &[x]).unwrap();
            prop_assert!(parts.saa <= parts.value + 1e-12 && parts.value <= parts.dro + 1e-12);
            prop_assert!((parts.value - (beta * parts0.dro + (1.0 - beta) * parts0.saa)).abs() <= 1e-9);
        }
    }

    #[test]
    fn optimal_values_nondecreasing_in_beta(samples in proptest::collection::vec(0.0f64..1.0, 1..5), eps in 0.0f64..0.3) {
        let mut g: Vec<SamplePoint> = samples.iter().map(|&v| s(v)).collect();
        g.extend([s(0.0), s(1.0)]);
        let base = problem(Arc::new(SquaredLoss), &samples, 0.0, eps, g);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=20 {
            let p = base.with_beta(k as f64 * 0.05).unwrap();
            let v = solve_bdr_scalar(&p, 0.0, 1.0, 1e-10).unwrap().value;
            prop_assert!(v >= prev - 1e-9);
            prev = v;
        }
    }
}
