//! Seeded property suites: Wasserstein duality and support structure, the
//! equal-weight route, the SAA ≤ BDR ≤ DRO ordering, the KL worst case
//! against brute force, and the mixture-mean identity.
//!
//! Each suite draws its instances from `SplitMix64::derive(seed, case)` and
//! returns a [`VerifyReport`].

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{expectation, mean_distribution, DiscreteDistribution, FiniteMixture, SamplePoint};
use crate::phi::{kl_divergence, phi_worst_case, PhiBall};
use crate::rng::SplitMix64;
use crate::stats::{common_draw_minima, SyntheticProblem};
use crate::wasserstein::{
    verify_support_structure, worst_case_dual_grid, worst_case_equal_weight, worst_case_primal, GroundMetric,
    WassersteinBall,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite {0:?}; expected one of duality, support, equal_weight, ordering, phi, mixture")]
    UnknownSuite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Duality,
    Support,
    EqualWeight,
    Ordering,
    Phi,
    Mixture,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self, VerifyError> {
        Ok(match s {
            "duality" => Suite::Duality,
            "support" => Suite::Support,
            "equal_weight" | "equal-weight" => Suite::EqualWeight,
            "ordering" => Suite::Ordering,
            "phi" => Suite::Phi,
            "mixture" => Suite::Mixture,
            other => return Err(VerifyError::UnknownSuite(other.to_string())),
        })
    }

    /// Case count and tolerance used when none are given.
    pub fn defaults(self) -> (usize, f64) {
        match self {
            Suite::Duality => (500, 1e-6),
            Suite::Support => (500, 1e-7),
            Suite::EqualWeight => (200, 1e-6),
            Suite::Ordering => (1000, 1e-9),
            Suite::Phi => (20, 1e-3),
            Suite::Mixture => (100, 1e-10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub cases: usize,
    pub failures: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// Descriptions of the first failing cases.
    pub failing_cases: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

const MAX_DUMPS: usize = 20;

struct Tally {
    failures: usize,
    max_error: f64,
    dumps: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            failures: 0,
            max_error: 0.0,
            dumps: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, err: f64, describe: impl FnOnce() -> String) {
        if err.is_nan() || err > self.max_error {
            self.max_error = err;
        }
        if !ok {
            self.failures += 1;
            if self.dumps.len() < MAX_DUMPS {
                self.dumps.push(describe());
            }
        }
    }

    fn report(self, suite: Suite, seed: u64, cases: usize, tolerance: f64) -> VerifyReport {
        VerifyReport {
            suite,
            seed,
            cases,
            failures: self.failures,
            max_error: self.max_error,
            tolerance,
            failing_cases: self.dumps,
        }
    }
}

/// A random transport instance: center atoms are a subset of the grid and
/// the loss is a table over grid points.
#[derive(Debug, Clone)]
pub struct TransportInstance {
    pub ball: WassersteinBall,
    pub grid: Vec<SamplePoint>,
    pub losses: Vec<f64>,
}

impl TransportInstance {
    /// Loss lookup by exact grid-point match; `NaN` off the grid.
    pub fn h(&self, p: &SamplePoint) -> f64 {
        self.grid.iter().position(|g| g == p).map_or(f64::NAN, |j| self.losses[j])
    }
}

fn random_points(g: &mut SplitMix64, m: usize) -> Vec<SamplePoint> {
    (0..m).map(|_| SamplePoint::new(vec![g.next_f64(), g.next_f64()])).collect()
}

fn random_simplex(g: &mut SplitMix64, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + g.next_f64()).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - head;
    w
}

/// Center of 1–5 atoms with random weights, grid of at most 25 points in
/// the unit square, losses in `[0, 10]`, `ε ∈ [0, 2]`, order 1 or 2.
pub fn random_transport_instance(seed: u64, case: u64) -> TransportInstance {
    let mut g = SplitMix64::derive(seed, case);
    let n = 1 + g.below(5) as usize;
    let m = n + g.below((25 - n + 1) as u64) as usize;
    let grid = random_points(&mut g, m);
    let weights = random_simplex(&mut g, n);
    let losses: Vec<f64> = (0..m).map(|_| g.uniform(0.0, 10.0)).collect();
    let eps = g.uniform(0.0, 2.0);
    let order = if g.below(2) == 0 { 1.0 } else { 2.0 };
    let center = DiscreteDistribution::new(grid[..n].to_vec(), weights).expect("valid center");
    let ball = WassersteinBall::new(center, eps, order, GroundMetric::Euclidean).expect("valid ball");
    TransportInstance { ball, grid, losses }
}

/// Uniform-weight center and the continuous loss
/// `a sin(b ξ₁ + c) + d ξ₂² + e ξ₁ξ₂` tabulated on the grid.
pub fn random_equal_weight_instance(seed: u64, case: u64) -> TransportInstance {
    let mut g = SplitMix64::derive(seed, case);
    let n = 1 + g.below(5) as usize;
    let m = n + g.below((25 - n + 1) as u64) as usize;
    let grid = random_points(&mut g, m);
    let (a, b, c, d, e) = (
        g.uniform(0.5, 3.0),
        g.uniform(1.0, 6.0),
        g.uniform(0.0, 6.3),
        g.uniform(-2.0, 2.0),
        g.uniform(-2.0, 2.0),
    );
    let losses = grid
        .iter()
        .map(|p| {
            let (x, y) = (p.coords[0], p.coords[1]);
            a * (b * x + c).sin() + d * y * y + e * x * y
        })
        .collect();
    let eps = g.uniform(0.0, 1.0);
    let order = if g.below(2) == 0 { 1.0 } else { 2.0 };
    let center = DiscreteDistribution::uniform(grid[..n].to_vec()).expect("valid center");
    let ball = WassersteinBall::new(center, eps, order, GroundMetric::Euclidean).expect("valid ball");
    TransportInstance { ball, grid, losses }
}

pub fn run_duality(seed: u64, cases: usize, tol: f64) -> VerifyReport {
    let mut t = Tally::new();
    for case in 0..cases as u64 {
        let inst = random_transport_instance(seed, case);
        let h = |p: &SamplePoint| inst.h(p);
        let res = worst_case_primal(&inst.ball, h, &inst.grid)
            .and_then(|p| worst_case_dual_grid(&inst.ball, h, &inst.grid).map(|d| (p.value, d.0)));
        match res {
            Ok((primal, dual)) => {
                let err = (primal - dual).abs();
                t.record(err <= tol, err, || format!("case {case}: primal {primal} dual {dual}"));
            }
            Err(e) => t.record(false, f64::NAN, || format!("case {case}: {e}")),
        }
    }
    t.report(Suite::Duality, seed, cases, tol)
}

pub fn run_support(seed: u64, cases: usize, tol: f64) -> VerifyReport {
    let mut t = Tally::new();
    for case in 0..cases as u64 {
        let inst = random_transport_instance(seed, case);
        match worst_case_primal(&inst.ball, |p| inst.h(p), &inst.grid) {
            Ok(r) => {
                let ok = verify_support_structure(&r, &inst.ball.center, tol);
                let atoms = r.distribution.len();
                t.record(ok, 0.0, || {
                    format!("case {case}: {atoms} atoms for {} center points", inst.ball.center.len())
                });
            }
            Err(e) => t.record(false, f64::NAN, || format!("case {case}: {e}")),
        }
    }
    t.report(Suite::Support, seed, cases, tol)
}

pub fn run_equal_weight(seed: u64, cases: usize, tol: f64) -> VerifyReport {
    let mut t = Tally::new();
    for case in 0..cases as u64 {
        let inst = random_equal_weight_instance(seed, case);
        let h = |p: &SamplePoint| inst.h(p);
        let res = worst_case_primal(&inst.ball, h, &inst.grid)
            .and_then(|p| worst_case_equal_weight(&inst.ball, h, &inst.grid).map(|e| (p.value, e.value)));
        match res {
            Ok((primal, eq)) => {
                let err = (primal - eq).abs();
                t.record(err <= tol, err, || format!("case {case}: primal {primal} equal-weight {eq}"));
            }
            Err(e) => t.record(false, f64::NAN, || format!("case {case}: {e}")),
        }
    }
    t.report(Suite::EqualWeight, seed, cases, tol)
}

/// Per replication on the three-atom mean-estimation problem with `n = 20`
/// and `ε = 0.1`: `min v_n ≤ min v_{b,n} ≤ min v_{r,n}` for
/// β ∈ {0.25, 0.5, 0.75}.
pub fn run_ordering(seed: u64, cases: usize, tol: f64) -> VerifyReport {
    const BETAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
    let prob = SyntheticProblem::three_atom();
    let mut t = Tally::new();
    match common_draw_minima(&prob, 20, &BETAS, 0.1, cases, seed) {
        Ok(rows) => {
            for (rep, row) in rows.iter().enumerate() {
                match row {
                    Some(v) => {
                        let (saa, dro) = (v[0], v[4]);
                        let err = v[1..4]
                            .iter()
                            .map(|&b| (saa - b).max(b - dro))
                            .fold(f64::NEG_INFINITY, f64::max);
                        t.record(err <= tol, err.max(0.0), || format!("rep {rep}: minima {v:?}"));
                    }
                    None => t.record(false, f64::NAN, || format!("rep {rep}: solver failure")),
                }
            }
        }
        Err(e) => {
            t.record(false, f64::NAN, || e.to_string());
            t.failures = cases;
        }
    }
    t.report(Suite::Ordering, seed, cases, tol)
}

/// Maximum of `Σ μᵢ hᵢ` over the 2-simplex subject to `KL(μ ‖ μ̄) ≤ ε`, by
/// a coarse grid and then a fine grid around the coarse winner.
pub fn phi_brute_force(center: &[f64], losses: &[f64], eps: f64) -> f64 {
    let eval = |a: f64, b: f64| -> Option<f64> {
        let c = 1.0 - a - b;
        if a < 0.0 || b < 0.0 || c < -1e-15 {
            return None;
        }
        let mu = [a, b, c.max(0.0)];
        (kl_divergence(&mu, center) <= eps).then(|| mu[0] * losses[0] + mu[1] * losses[1] + mu[2] * losses[2])
    };
    let scan = |a0: f64, b0: f64, span: f64, steps: usize| -> (f64, f64, f64) {
        let mut best = (f64::NEG_INFINITY, a0, b0);
        let h = span / steps as f64;
        for i in 0..=steps {
            for j in 0..=steps {
                let (a, b) = (a0 + i as f64 * h, b0 + j as f64 * h);
                if let Some(v) = eval(a, b) {
                    if v > best.0 {
                        best = (v, a, b);
                    }
                }
            }
        }
        best
    };
    let coarse = 400;
    let (_, a, b) = scan(0.0, 0.0, 1.0, coarse);
    let w = 2.0 / coarse as f64;
    scan((a - w).max(0.0), (b - w).max(0.0), 2.0 * w, 2000).0
}

/// KL worst case on three atoms against [`phi_brute_force`].
pub fn run_phi(seed: u64, cases: usize, tol: f64) -> VerifyReport {
    let mut t = Tally::new();
    for case in 0..cases as u64 {
        let mut g = SplitMix64::derive(seed, case);
        let center = random_simplex(&mut g, 3);
        let losses: Vec<f64> = (0..3).map(|_| g.next_f64()).collect();
        let eps = g.uniform(0.01, 0.5);
        let res = PhiBall::kl(center.clone(), eps).and_then(|ball| phi_worst_case(&ball, &losses));
        match res {
            Ok((value, _)) => {
                let brute = phi_brute_force(&center, &losses, eps);
                let err = (value - brute).abs();
                t.record(err <= tol, err, || {
                    format!("case {case}: center {center:?} losses {losses:?} eps {eps}: {value} vs {brute}")
                });
            }
            Err(e) => t.record(false, f64::NAN, || format!("case {case}: {e}")),
        }
    }
    t.report(Suite::Phi, seed, cases, tol)
}

/// `E_{mean distribution} h` against `Σ_k w_k E_{P_k} h` on random mixtures
/// of 1–4 components over a shared pool of 6 atoms.
pub fn run_mixture(seed: u64, cases: usize, tol: f64) -> VerifyReport {
    let mut t = Tally::new();
    for case in 0..cases as u64 {
        let mut g = SplitMix64::derive(seed, case);
        let pool = random_points(&mut g, 6);
        let table: Vec<f64> = (0..6).map(|_| g.uniform(-5.0, 5.0)).collect();
        let h = |p: &SamplePoint| pool.iter().position(|q| q == p).map_or(f64::NAN, |j| table[j]);
        let k = 1 + g.below(4) as usize;
        let comps: Vec<DiscreteDistribution> = (0..k)
            .map(|_| {
                let mut idx: Vec<usize> = (0..6).collect();
                g.shuffle(&mut idx);
                idx.truncate(1 + g.below(6) as usize);
                let w = random_simplex(&mut g, idx.len());
                DiscreteDistribution::new(idx.iter().map(|&i| pool[i].clone()).collect(), w).expect("valid component")
            })
            .collect();
        let mix_w = random_simplex(&mut g, k);
        let mix = FiniteMixture::new(comps.clone(), mix_w.clone()).expect("valid mixture");
        let lhs = expectation(&mean_distribution(&mix), h);
        let rhs: Result<f64, _> = comps
            .iter()
            .zip(&mix_w)
            .map(|(c, w)| expectation(c, h).map(|e| w * e))
            .sum();
        match (lhs, rhs) {
            (Ok(a), Ok(b)) => {
                let err = (a - b).abs();
                t.record(err <= tol, err, || format!("case {case}: {a} vs {b}"));
            }
            (Err(e), _) | (_, Err(e)) => t.record(false, f64::NAN, || format!("case {case}: {e}")),
        }
    }
    t.report(Suite::Mixture, seed, cases, tol)
}

pub fn run_suite(suite: Suite, seed: u64, cases: Option<usize>, tol: Option<f64>) -> VerifyReport {
    let (c, tl) = suite.defaults();
    let cases = cases.unwrap_or(c);
    let tol = tol.unwrap_or(tl);
    match suite {
        Suite::Duality => run_duality(seed, cases, tol),
        Suite::Support => run_support(seed, cases, tol),
        Suite::EqualWeight => run_equal_weight(seed, cases, tol),
        Suite::Ordering => run_ordering(seed, cases, tol),
        Suite::Phi => run_phi(seed, cases, tol),
        Suite::Mixture => run_mixture(seed, cases, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_respect_bounds() {
        for case in 0..50 {
            let inst = random_transport_instance(3, case);
            assert!(inst.ball.center.len() <= 5);
            assert!(inst.grid.len() <= 25 && inst.grid.len() >= inst.ball.center.len());
            assert!(inst.losses.iter().all(|&v| (0.0..=10.0).contains(&v)));
            assert!((0.0..=2.0).contains(&inst.ball.radius()));
        }
    }

    #[test]
    fn parse_suites() {
        assert_eq!(Suite::parse("mixture").unwrap(), Suite::Mixture);
        assert!(Suite::parse("nope").is_err());
    }

    #[test]
    fn brute_force_on_a_corner() {
        // ε ≥ −log μ̄₃ makes δ₃ feasible, the best vertex
        let c = [0.25, 0.25, 0.5];
        let v = phi_brute_force(&c, &[0.0, 0.5, 1.0], 2.0f64.ln() + 1e-9);
        assert!((v - 1.0).abs() < 1e-9);
    }
}
