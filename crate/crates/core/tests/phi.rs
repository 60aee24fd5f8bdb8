//! KL worst case against a simplex grid search, and its ball properties.

use bdr_core::phi::{kl_divergence, phi_worst_case, PhiBall};
use proptest::prelude::*;

/// Best `Σ μᵢhᵢ` over the 2-simplex grid of the given step with
/// `KL(μ ‖ μ̄) ≤ ε`.
fn grid_search(center: &[f64], h: &[f64], eps: f64, step: f64) -> f64 {
    let k = (1.0 / step).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=k {
        for j in 0..=k - i {
            let mu = [i as f64 * step, j as f64 * step, (k - i - j) as f64 * step];
            if kl_divergence(&mu, center) <= eps {
                best = best.max(mu[0] * h[0] + mu[1] * h[1] + mu[2] * h[2]);
            }
        }
    }
    best
}

#[test]
fn uniform_three_atoms_against_grid() {
    let c = [1.0 / 3.0; 3];
    let ball = PhiBall::kl(c.to_vec(), 0.1).unwrap();
    let (v, mu) = phi_worst_case(&ball, &[0.0, 1.0, 2.0]).unwrap();
    let oracle = grid_search(&c, &[0.0, 1.0, 2.0], 0.1, 1e-3);
    assert!((v - oracle).abs() < 1e-3, "{v} vs {oracle}");
    assert!(v >= oracle - 1e-12);
    assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sandwich_feasibility_monotonicity(
        raw in proptest::collection::vec(0.05f64..1.0, 2..7),
        h_seed in proptest::collection::vec(-5.0f64..5.0, 7),
        e1 in 0.0f64..3.0,
        e2 in 0.0f64..3.0,
    ) {
        let t: f64 = raw.iter().sum();
        let mut c: Vec<f64> = raw.iter().map(|v| v / t).collect();
        let head: f64 = c[..c.len() - 1].iter().sum();
        let last = c.len() - 1;
        c[last] = 1.0 - head;
        let h = &h_seed[..c.len()];
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let (v_lo, mu) = phi_worst_case(&PhiBall::kl(c.clone(), lo).unwrap(), h).unwrap();
        let (v_hi, _) = phi_worst_case(&PhiBall::kl(c.clone(), hi).unwrap(), h).unwrap();
        let mean: f64 = c.iter().zip(h).map(|(a, b)| a * b).sum();
        let hmax = h.iter().copied().fold(f64::MIN, f64::max);
        prop_assert!(mean <= v_lo + 1e-9 && v_lo <= hmax + 1e-12);
        prop_assert!(v_lo <= v_hi + 1e-9);
        prop_assert!(kl_divergence(&mu, &c) <= lo + 1e-9);
        prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let (v_big, _) = phi_worst_case(&PhiBall::kl(c.clone(), 50.0).unwrap(), h).unwrap();
        prop_assert!((v_big - hmax).abs() <= 1e-9);
    }
}
