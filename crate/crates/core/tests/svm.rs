//! Hinge-loss worst case and the training LPs against direct evaluation.

use bdr_core::distributions::{Label, SamplePoint};
use bdr_core::rng::SplitMix64;
use bdr_core::svm::{hinge_inner_max, hinge_loss, svm_metric, train, Formulation, SvmInstance, SvmModel};

fn random_point(g: &mut SplitMix64, l: usize) -> SamplePoint {
    let coords = (0..l).map(|_| g.uniform(-1.0, 1.0)).collect();
    let label = if g.below(2) == 0 { Label::Pos } else { Label::Neg };
    SamplePoint::labeled(coords, label)
}

fn flip(label: Label) -> Label {
    match label {
        Label::Pos => Label::Neg,
        Label::Neg => Label::Pos,
    }
}

#[test]
fn inner_max_against_perturbation_search() {
    let mut g = SplitMix64::new(31);
    for case in 0..200 {
        let l = 1 + g.below(4) as usize;
        let x: Vec<f64> = (0..l).map(|_| g.uniform(-2.0, 2.0)).collect();
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let xi = random_point(&mut g, l);
        let kappa = g.uniform(0.0, 2.0);
        let lam = l1 + g.uniform(0.0, 3.0);
        let closed = hinge_inner_max(&x, &xi, lam, kappa).unwrap();
        let mut best = f64::NEG_INFINITY;
        for k in 0..2000 {
            let scale = [0.0, 0.01, 0.3, 3.0][(k / 2) % 4];
            let mut z = xi.clone();
            for c in &mut z.coords {
                *c += scale * g.uniform(-1.0, 1.0);
            }
            if k % 2 == 1 {
                z.label = Some(flip(xi.label.unwrap()));
            }
            let v = hinge_loss(&x, &z).unwrap() - lam * svm_metric(&z, &xi, kappa).unwrap();
            assert!(v <= closed + 1e-9, "case {case}: search {v} beats closed form {closed}");
            best = best.max(v);
        }
        assert!((best - closed).abs() < 1e-9, "case {case}: {best} vs {closed}");
    }
}

#[test]
fn inner_max_unbounded_below_weight_norm() {
    let x = [1.0, -0.5];
    let xi = SamplePoint::labeled(vec![0.2, 0.1], Label::Pos);
    assert_eq!(hinge_inner_max(&x, &xi, 1.49, 0.3).unwrap(), f64::INFINITY);
    // moving against y·sign(x) gains ‖x‖₁ per unit of sup-norm cost
    let lam = 1.4;
    let at = |t: f64| {
        let z = SamplePoint::labeled(vec![0.2 - t, 0.1 + t], Label::Pos);
        hinge_loss(&x, &z).unwrap() - lam * svm_metric(&z, &xi, 0.3).unwrap()
    };
    assert!(at(100.0) > at(10.0) && at(10.0) > at(1.0));
}

fn random_instance(g: &mut SplitMix64, beta: f64) -> SvmInstance {
    let n = 3 + g.below(6) as usize;
    let l = 1 + g.below(3) as usize;
    let pts: Vec<SamplePoint> = (0..n).map(|_| random_point(g, l)).collect();
    SvmInstance::from_points(&pts, beta, g.uniform(0.0, 0.5), g.uniform(0.0, 1.0)).unwrap()
}

#[test]
fn exact_lp_minimizes_blended_objective() {
    let mut g = SplitMix64::new(5);
    for case in 0..30 {
        let beta = [0.0, 0.3, 1.0][case % 3];
        let inst = random_instance(&mut g, beta);
        let m = train(&inst, Formulation::ExactEpigraph).unwrap();
        let at_opt = inst.blended_objective(&m.weights).unwrap();
        assert!((m.objective - at_opt).abs() < 1e-7, "case {case}: {} vs {at_opt}", m.objective);
        for _ in 0..300 {
            let step = g.uniform(0.0, 0.5);
            let y: Vec<f64> = m.weights.iter().map(|w| w + step * g.uniform(-1.0, 1.0)).collect();
            assert!(inst.blended_objective(&y).unwrap() >= at_opt - 1e-9);
        }
    }
}

#[test]
fn formulations_agree_at_pure_endpoints() {
    let mut g = SplitMix64::new(77);
    for case in 0..30 {
        let inst = random_instance(&mut g, if case % 2 == 0 { 0.0 } else { 1.0 });
        let a = train(&inst, Formulation::Shared).unwrap().objective;
        let b = train(&inst, Formulation::ExactEpigraph).unwrap().objective;
        assert!((a - b).abs() < 1e-7, "case {case}: {a} vs {b}");
    }
}

#[test]
fn model_json_round_trip() {
    let mut g = SplitMix64::new(2);
    let inst = random_instance(&mut g, 0.5);
    let m = train(&inst, Formulation::Shared).unwrap();
    let back = SvmModel::from_json(&m.to_json()).unwrap();
    assert_eq!(back.weights, m.weights);
    assert_eq!(back.formulation, Formulation::Shared);
    assert!(m.to_json().contains("\"shared\""));
}
