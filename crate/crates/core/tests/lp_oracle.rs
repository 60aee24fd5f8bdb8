//! The simplex solver against brute-force vertex enumeration.

use bdr_core::lp::{
    check_feasible, solve_lp, solve_lp_with, LinearProgram, LpStatus, PivotRule, Relation, SolverOptions,
};
use bdr_core::rng::SplitMix64;

mod common;
use common::{combinations, gauss_solve};

/// Minimum of `c·z` over all vertices of the polytope, by trying every
/// choice of `n` active constraints (equalities always active).
fn vertex_enumeration_min(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // (coefficients, rhs) of every candidate active constraint
    let mut equalities = Vec::new();
    let mut inequalities = Vec::new();
    for i in 0..lp.num_rows() {
        let entry = (lp.row(i).to_vec(), lp.rhs()[i]);
        match lp.relation(i) {
            Relation::Eq => equalities.push(entry),
            _ => inequalities.push(entry),
        }
    }
    for j in 0..n {
        let mut unit = vec![0.0; n];
        unit[j] = 1.0;
        if lp.lower()[j].is_finite() {
            inequalities.push((unit.clone(), lp.lower()[j]));
        }
        if lp.upper()[j].is_finite() {
            inequalities.push((unit, lp.upper()[j]));
        }
    }
    if equalities.len() > n {
        return None;
    }
    let need = n - equalities.len();
    let mut best: Option<f64> = None;
    let mut chosen = Vec::with_capacity(need);
    combinations(inequalities.len(), need, 0, &mut chosen, &mut |idx| {
        let mut a: Vec<Vec<f64>> = equalities.iter().map(|(r, _)| r.clone()).collect();
        let mut b: Vec<f64> = equalities.iter().map(|(_, v)| *v).collect();
        for &k in idx {
            a.push(inequalities[k].0.clone());
            b.push(inequalities[k].1);
        }
        if let Some(z) = gauss_solve(a, b) {
            if check_feasible(lp, &z, 1e-9).unwrap() {
                let v: f64 = z.iter().zip(lp.objective()).map(|(x, c)| x * c).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    });
    best
}

/// Random LP with a box-bounded feasible region containing a known point.
fn random_lp(seed: u64, max_vars: usize, max_rows: usize) -> LinearProgram {
    let mut g = SplitMix64::new(seed);
    let n = 2 + g.below(max_vars as u64 - 1) as usize;
    let m = 1 + g.below(max_rows as u64) as usize;
    let c: Vec<f64> = (0..n).map(|_| g.uniform(-1.0, 1.0)).collect();
    let mut lp = LinearProgram::new(c);
    let mut z0 = vec![0.0; n];
    for (j, zj) in z0.iter_mut().enumerate() {
        let lo = if g.next_f64() < 0.5 { 0.0 } else { g.uniform(-2.0, 0.0) };
        let hi = lo + g.uniform(0.5, 3.0);
        lp.set_bounds(j, lo, hi).unwrap();
        *zj = g.uniform(lo, hi);
    }
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| g.uniform(-1.0, 1.0)).collect();
        let act: f64 = a.iter().zip(&z0).map(|(x, y)| x * y).sum();
        let r = g.next_f64();
        let (rel, b) = if r < 0.45 {
            (Relation::Le, act + g.uniform(0.0, 1.0))
        } else if r < 0.9 {
            (Relation::Ge, act - g.uniform(0.0, 1.0))
        } else {
            (Relation::Eq, act)
        };
        lp.add_row(&a, rel, b).unwrap();
    }
    lp
}

fn assert_certificates(lp: &LinearProgram, tol: f64) {
    let sol = solve_lp(lp, 1e-9).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!(check_feasible(lp, &sol.primal, tol).unwrap());
    let cz: f64 = sol.primal.iter().zip(lp.objective()).map(|(a, b)| a * b).sum();
    assert!((cz - sol.value).abs() <= tol);
    // dual sign conditions
    for (i, &y) in sol.dual.iter().enumerate() {
        match lp.relation(i) {
            Relation::Le => assert!(y <= tol, "row {i} dual {y}"),
            Relation::Ge => assert!(y >= -tol, "row {i} dual {y}"),
            Relation::Eq => {}
        }
    }
    // reduced costs are c - Aᵀy and certify the bounds they sit at
    for j in 0..lp.num_vars() {
        let aty: f64 = (0..lp.num_rows()).map(|i| lp.row(i)[j] * sol.dual[i]).sum();
        let d = sol.reduced_costs[j];
        assert!((lp.objective()[j] - aty - d).abs() <= 1e-8);
        if d > 1e-7 {
            assert!((sol.primal[j] - lp.lower()[j]).abs() <= 1e-7);
        }
        if d < -1e-7 {
            assert!((sol.primal[j] - lp.upper()[j]).abs() <= 1e-7);
        }
    }
    assert!((sol.dual_objective(lp) - sol.value).abs() <= 10.0 * tol.max(1e-9));
}

#[test]
fn five_by_four_matches_vertex_enumeration() {
    for seed in 0..200u64 {
        let lp = random_lp(seed, 5, 4);
        let oracle = vertex_enumeration_min(&lp);
        let sol = solve_lp(&lp, 1e-9).unwrap();
        match oracle {
            Some(v) => {
                assert_eq!(sol.status, LpStatus::Optimal, "seed {seed}");
                assert!((sol.value - v).abs() <= 1e-8, "seed {seed}: {} vs {v}", sol.value);
            }
            None => assert_eq!(sol.status, LpStatus::Infeasible, "seed {seed}"),
        }
    }
}

#[test]
fn thousand_seeds_up_to_six_by_six() {
    for seed in 1000..2000u64 {
        let lp = random_lp(seed, 6, 6);
        let v = vertex_enumeration_min(&lp).expect("instances are feasible by construction");
        for rule in [PivotRule::DantzigBland, PivotRule::DevexBland, PivotRule::Bland] {
            let opts = SolverOptions {
                pivot_rule: rule,
                ..SolverOptions::default()
            };
            let sol = solve_lp_with(&lp, &opts).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal, "seed {seed}");
            assert!((sol.value - v).abs() <= 1e-8, "seed {seed} {rule:?}: {} vs {v}", sol.value);
        }
        assert_certificates(&lp, 1e-9);
    }
}

#[test]
fn repeated_solves_are_bit_identical() {
    for seed in 0..50u64 {
        let lp = random_lp(seed, 6, 6);
        let a = solve_lp(&lp, 1e-9).unwrap();
        let b = solve_lp(&lp, 1e-9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}

#[test]
fn detects_infeasible_instances() {
    for seed in 0..100u64 {
        let mut lp = random_lp(seed, 4, 3);
        // contradict the first row
        let row = lp.row(0).to_vec();
        let b = lp.rhs()[0];
        match lp.relation(0) {
            Relation::Le | Relation::Eq => lp.add_row(&row, Relation::Ge, b + 1.0).unwrap(),
            Relation::Ge => lp.add_row(&row, Relation::Le, b - 1.0).unwrap(),
        };
        assert_eq!(vertex_enumeration_min(&lp), None);
        let sol = solve_lp(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible, "seed {seed}");
    }
}

/// Many rows through the origin, which is a vertex of the box `[-1, 1]ⁿ`
/// intersected with them: the walk passes long runs of degenerate pivots.
fn degenerate_lp(seed: u64, n: usize, m: usize) -> LinearProgram {
    let mut g = SplitMix64::new(seed);
    let c: Vec<f64> = (0..n).map(|_| g.uniform(-1.0, 1.0)).collect();
    let mut lp = LinearProgram::new(c);
    for j in 0..n {
        lp.set_bounds(j, -1.0, 1.0).unwrap();
    }
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| g.uniform(-1.0, 1.0)).collect();
        lp.add_row(&a, Relation::Le, 0.0).unwrap();
    }
    lp
}

#[test]
fn highly_degenerate_lps_agree_across_rules_with_certificates() {
    for seed in 0..20u64 {
        let lp = degenerate_lp(seed, 20, 150);
        let values: Vec<f64> = [PivotRule::DantzigBland, PivotRule::DevexBland, PivotRule::Bland]
            .into_iter()
            .map(|rule| {
                let opts = SolverOptions {
                    pivot_rule: rule,
                    ..SolverOptions::default()
                };
                let sol = solve_lp_with(&lp, &opts).unwrap();
                assert_eq!(sol.status, LpStatus::Optimal, "seed {seed} {rule:?}");
                assert!(check_feasible(&lp, &sol.primal, 1e-8).unwrap());
                sol.value
            })
            .collect();
        assert!((values[0] - values[1]).abs() <= 1e-8 && (values[0] - values[2]).abs() <= 1e-8, "seed {seed}: {values:?}");
        assert_certificates(&lp, 1e-8);
    }
}
