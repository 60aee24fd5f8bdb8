//! The BDR objective `v_b(x) = β·max_{P ∈ B_ε(P̂_n)} E_P h(x, ξ) + (1 − β)·E_{P̂_n} h(x, ξ)`
//! and its minimization. `β = 0` is sample-average approximation, `β = 1` is
//! Wasserstein DRO.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{empirical_from_samples, DiscreteDistribution, DistributionError, SamplePoint};
use crate::numeric::{golden_section_min, CompensatedSum};
use crate::wasserstein::{
    worst_case_dual, worst_case_dual_grid, worst_case_equal_weight, worst_case_primal, DualSearch, GridInnerMax,
    GroundMetric, WassersteinBall, WassersteinError,
};

#[derive(Debug, Error)]
pub enum BdrError {
    #[error("beta {0} not in [0, 1]")]
    BadBeta(f64),
    #[error("no training samples")]
    NoSamples,
    #[error("decision vector has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("loss is not finite ({value}) at sample {index}")]
    NonFiniteLoss { index: usize, value: f64 },
    #[error("the regularized form needs beta < 1")]
    BetaIsOne,
    #[error("coordinate descent needs a loss declared convex in x")]
    NotConvex,
    #[error("coordinate descent needs loss subgradients")]
    NoSubgradient,
    #[error("inner mode {mode:?} needs a candidate grid")]
    NeedsGrid { mode: InnerMode },
    #[error("closed-form inner maximization needs a lambda0 bracket in the solver config")]
    NeedsBracket,
    #[error("invalid box for x: {0}")]
    BadBox(String),
    #[error(transparent)]
    Wasserstein(#[from] WassersteinError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// A loss `h(x, ξ)`.
pub trait LossOracle: Send + Sync {
    fn evaluate(&self, x: &[f64], xi: &SamplePoint) -> f64;

    fn subgradient(&self, _x: &[f64], _xi: &SamplePoint) -> Option<Vec<f64>> {
        None
    }

    /// Caller-asserted convexity in `x`.
    fn convex_in_x(&self) -> bool;
}

/// `‖x − ξ‖²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredLoss;

impl LossOracle for SquaredLoss {
    fn evaluate(&self, x: &[f64], xi: &SamplePoint) -> f64 {
        x.iter().zip(&xi.coords).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn subgradient(&self, x: &[f64], xi: &SamplePoint) -> Option<Vec<f64>> {
        Some(x.iter().zip(&xi.coords).map(|(a, b)| 2.0 * (a - b)).collect())
    }

    fn convex_in_x(&self) -> bool {
        true
    }
}

/// `‖x − ξ‖₁`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AbsoluteLoss;

impl LossOracle for AbsoluteLoss {
    fn evaluate(&self, x: &[f64], xi: &SamplePoint) -> f64 {
        x.iter().zip(&xi.coords).map(|(a, b)| (a - b).abs()).sum()
    }

    fn subgradient(&self, x: &[f64], xi: &SamplePoint) -> Option<Vec<f64>> {
        Some(
            x.iter()
                .zip(&xi.coords)
                .map(|(a, b)| if a > b { 1.0 } else if a < b { -1.0 } else { 0.0 })
                .collect(),
        )
    }

    fn convex_in_x(&self) -> bool {
        true
    }
}

/// `max{1 − Y⟨x, I⟩, 0}`; unlabeled points count as `Y = +1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HingeLoss;

impl LossOracle for HingeLoss {
    fn evaluate(&self, x: &[f64], xi: &SamplePoint) -> f64 {
        let y = xi.label.map_or(1.0, |l| l.sign());
        let m: f64 = x.iter().zip(&xi.coords).map(|(a, b)| a * b).sum();
        (1.0 - y * m).max(0.0)
    }

    fn subgradient(&self, x: &[f64], xi: &SamplePoint) -> Option<Vec<f64>> {
        let y = xi.label.map_or(1.0, |l| l.sign());
        let m: f64 = x.iter().zip(&xi.coords).map(|(a, b)| a * b).sum();
        Some(if 1.0 - y * m > 0.0 {
            xi.coords.iter().map(|v| -y * v).collect()
        } else {
            vec![0.0; x.len()]
        })
    }

    fn convex_in_x(&self) -> bool {
        true
    }
}

type InnerFn = dyn Fn(&[f64], f64, &SamplePoint) -> f64 + Send + Sync;

/// How `max_ξ {h(x, ξ) − λ₀ dᵖ(ξ, ξᵢ)}` is computed.
#[derive(Clone)]
pub enum InnerRepresentation {
    /// Exact maximum over a finite candidate set.
    Grid(Vec<SamplePoint>),
    /// Caller-supplied `(x, λ₀, ξᵢ) ↦ sup_ξ {h(x, ξ) − λ₀ dᵖ(ξ, ξᵢ)}`; may
    /// return `+∞`.
    ClosedForm(Arc<InnerFn>),
}

impl fmt::Debug for InnerRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnerRepresentation::Grid(g) => write!(f, "Grid({} points)", g.len()),
            InnerRepresentation::ClosedForm(_) => write!(f, "ClosedForm"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMode {
    PrimalLp,
    DualSearch,
    EqualWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub max_outer: usize,
    /// `[lo, hi]` for the λ₀ search; derived from the grid when absent.
    pub lambda0_bracket: Option<[f64; 2]>,
    pub inner_mode: InnerMode,
    /// Step size `a / (k + b)` of the outer subgradient iteration.
    pub step_a: f64,
    pub step_b: f64,
    /// Outer iterations over which `rel_tol` is measured.
    pub window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_outer: 200,
            lambda0_bracket: None,
            inner_mode: InnerMode::DualSearch,
            step_a: 1.0,
            step_b: 10.0,
            window: 5,
        }
    }
}

/// A BDR instance: loss, training sample, blend weight, ball, inner solver.
#[derive(Clone)]
pub struct BdrProblem {
    pub loss: Arc<dyn LossOracle>,
    samples: Vec<SamplePoint>,
    /// Empirical distribution of `samples` with identical points merged.
    empirical: DiscreteDistribution,
    beta: f64,
    pub ball: WassersteinBall,
    pub decision_dim: usize,
    pub inner: InnerRepresentation,
    pub config: SolverConfig,
    /// Optional box `[lo, hi]` for `x`.
    pub x_box: Option<(Vec<f64>, Vec<f64>)>,
}

impl fmt::Debug for BdrProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BdrProblem")
            .field("n", &self.samples.len())
            .field("beta", &self.beta)
            .field("ball", &self.ball)
            .field("decision_dim", &self.decision_dim)
            .field("inner", &self.inner)
            .finish()
    }
}

impl BdrProblem {
    /// Ball centered at the empirical distribution of `samples`.
    #[allow(clippy::too_many_arguments)]
    pub fn data_driven(
        loss: Arc<dyn LossOracle>,
        samples: Vec<SamplePoint>,
        beta: f64,
        radius: f64,
        order: f64,
        metric: GroundMetric,
        decision_dim: usize,
        inner: InnerRepresentation,
    ) -> Result<Self, BdrError> {
        if samples.is_empty() {
            return Err(BdrError::NoSamples);
        }
        let empirical = empirical_from_samples(samples.clone())?.collapsed();
        let ball = WassersteinBall::new(empirical.clone(), radius, order, metric)?;
        Self::with_center(loss, samples, beta, ball, decision_dim, inner).map(|mut p| {
            p.empirical = empirical;
            p
        })
    }

    /// Ball with an arbitrary center (a prior-centered model).
    pub fn with_center(
        loss: Arc<dyn LossOracle>,
        samples: Vec<SamplePoint>,
        beta: f64,
        ball: WassersteinBall,
        decision_dim: usize,
        inner: InnerRepresentation,
    ) -> Result<Self, BdrError> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(BdrError::BadBeta(beta));
        }
        if samples.is_empty() {
            return Err(BdrError::NoSamples);
        }
        let empirical = empirical_from_samples(samples.clone())?.collapsed();
        Ok(Self {
            loss,
            samples,
            empirical,
            beta,
            ball,
            decision_dim,
            inner,
            config: SolverConfig::default(),
            x_box: None,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self, BdrError> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(BdrError::BadBeta(beta));
        }
        Ok(Self { beta, ..self.clone() })
    }

    pub fn with_config(mut self, config: SolverConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, BdrError> {
        if lo.len() != self.decision_dim || hi.len() != self.decision_dim {
            return Err(BdrError::BadBox(format!("box needs {} entries", self.decision_dim)));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(BdrError::BadBox("lower bound above upper bound".into()));
        }
        self.x_box = Some((lo, hi));
        Ok(self)
    }

    pub fn samples(&self) -> &[SamplePoint] {
        &self.samples
    }

    pub fn empirical(&self) -> &DiscreteDistribution {
        &self.empirical
    }

    fn check_x(&self, x: &[f64]) -> Result<(), BdrError> {
        if x.len() != self.decision_dim {
            return Err(BdrError::DimensionMismatch {
                expected: self.decision_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn project(&self, x: &mut [f64]) {
        if let Some((lo, hi)) = &self.x_box {
            for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
                *v = v.clamp(*l, *h);
            }
        }
    }

    /// `v_n(x) = E_{P̂_n} h(x, ξ)`.
    pub fn saa_part(&self, x: &[f64]) -> Result<f64, BdrError> {
        self.check_x(x)?;
        let mut acc = CompensatedSum::new();
        for (index, (a, &w)) in self.empirical.atoms().iter().zip(self.empirical.weights()).enumerate() {
            let value = self.loss.evaluate(x, a);
            if !value.is_finite() {
                return Err(BdrError::NonFiniteLoss { index, value });
            }
            acc.add(w * value);
        }
        Ok(acc.value())
    }

    fn bracket(&self) -> Option<DualSearch> {
        self.config.lambda0_bracket.map(|[_, hi]| DualSearch::up_to(hi))
    }

    /// `f(x) = max_{P ∈ B_ε} E_P h(x, ξ)` and the budget multiplier, when the
    /// route provides one.
    pub fn dro_part(&self, x: &[f64]) -> Result<(f64, Option<f64>), BdrError> {
        self.check_x(x)?;
        let h = |p: &SamplePoint| self.loss.evaluate(x, p);
        match (&self.inner, self.config.inner_mode) {
            (InnerRepresentation::Grid(g), InnerMode::PrimalLp) => {
                let r = worst_case_primal(&self.ball, h, g)?;
                Ok((r.value, Some(r.dual_lambda0)))
            }
            (InnerRepresentation::Grid(g), InnerMode::EqualWeight) => {
                let r = worst_case_equal_weight(&self.ball, h, g)?;
                Ok((r.value, None))
            }
            (InnerRepresentation::Grid(g), InnerMode::DualSearch) => {
                let (v, lam) = match self.bracket() {
                    Some(search) if self.ball.radius() > 0.0 => {
                        let inner = GridInnerMax::new(&self.ball, h, g)?;
                        inner.search_bound(&self.ball)?;
                        worst_case_dual(&self.ball, h, |l, i, _| inner.at(l, i), search)?
                    }
                    _ => worst_case_dual_grid(&self.ball, h, g)?,
                };
                Ok((v, Some(lam)))
            }
            (InnerRepresentation::ClosedForm(f), InnerMode::DualSearch) => {
                let search = self.bracket().ok_or(BdrError::NeedsBracket)?;
                let (v, lam) = worst_case_dual(&self.ball, h, |l, _, xi| f(x, l, xi), search)?;
                Ok((v, Some(lam)))
            }
            (InnerRepresentation::ClosedForm(_), mode) => Err(BdrError::NeedsGrid { mode }),
        }
    }

    /// The dual form of the blended objective at a fixed multiplier:
    /// `β(εᵖλ₀ + Σᵢ μ̄ᵢ maxξ[h(x, ξ) − λ₀dᵖ(ξ, ξᵢ)]) + (1 − β) v_n(x)`.
    pub fn dual_objective(&self, x: &[f64], lambda0: f64) -> Result<f64, BdrError> {
        let saa = self.saa_part(x)?;
        if self.beta == 0.0 {
            return Ok(saa);
        }
        let center = &self.ball.center;
        let mut acc = CompensatedSum::new();
        acc.add(self.ball.budget() * lambda0);
        match &self.inner {
            InnerRepresentation::Grid(g) => {
                let inner = GridInnerMax::new(&self.ball, |p: &SamplePoint| self.loss.evaluate(x, p), g)?;
                for (i, &w) in center.weights().iter().enumerate() {
                    acc.add(w * inner.at(lambda0, i));
                }
            }
            InnerRepresentation::ClosedForm(f) => {
                for (a, &w) in center.atoms().iter().zip(center.weights()) {
                    acc.add(w * f(x, lambda0, a));
                }
            }
        }
        Ok(self.beta * acc.value() + (1.0 - self.beta) * saa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    pub value: f64,
    pub dro: f64,
    pub saa: f64,
    pub lambda0: Option<f64>,
}

/// `(v_b(x), f(x), v_n(x))` with `v_b = β f + (1 − β) v_n`.
pub fn bdr_objective(prob: &BdrProblem, x: &[f64]) -> Result<ObjectiveParts, BdrError> {
    let saa = prob.saa_part(x)?;
    let (dro, lambda0) = prob.dro_part(x)?;
    let b = prob.beta;
    let value = if b == 0.0 {
        saa
    } else if b == 1.0 {
        dro
    } else {
        b * dro + (1.0 - b) * saa
    };
    Ok(ObjectiveParts {
        value,
        dro,
        saa,
        lambda0,
    })
}

/// `(λ_n, f(x))` with `λ_n = β/(1 − β)`, so that
/// `v_b(x)/(1 − β) = v_n(x) + λ_n f(x)`.
pub fn regularized_form(prob: &BdrProblem, x: &[f64]) -> Result<(f64, f64), BdrError> {
    if prob.beta >= 1.0 {
        return Err(BdrError::BetaIsOne);
    }
    let (f, _) = prob.dro_part(x)?;
    Ok((prob.beta / (1.0 - prob.beta), f))
}

/// Evaluates the dual form at `(x, λ₀)`; minimizing over `λ₀ ≥ 0` recovers
/// [`bdr_objective`].
pub fn bdr_dual_objective(prob: &BdrProblem, x: &[f64], lambda0: f64) -> Result<f64, BdrError> {
    prob.dual_objective(x, lambda0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BdrSolution {
    pub x_opt: Vec<f64>,
    pub value: f64,
    pub dro_part: f64,
    pub saa_part: f64,
    pub lambda0: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn solution(prob: &BdrProblem, x: Vec<f64>, iterations: usize, converged: bool) -> Result<BdrSolution, BdrError> {
    let parts = bdr_objective(prob, &x)?;
    Ok(BdrSolution {
        x_opt: x,
        value: parts.value,
        dro_part: parts.dro,
        saa_part: parts.saa,
        lambda0: parts.lambda0,
        iterations,
        converged,
    })
}

/// Alternates a worst-case solve at fixed `x` with a projected subgradient
/// step on the blended objective (worst case frozen), step `a/(k + b)`.
/// Stops when the objective changes by less than `rel_tol` (relative) over
/// `window` iterations, or after `max_outer`. Returns the best iterate with a
/// freshly computed objective.
pub fn solve_bdr_coordinate_descent(prob: &BdrProblem, x0: &[f64]) -> Result<BdrSolution, BdrError> {
    prob.check_x(x0)?;
    if !prob.loss.convex_in_x() {
        return Err(BdrError::NotConvex);
    }
    let grid = match &prob.inner {
        InnerRepresentation::Grid(g) => g,
        InnerRepresentation::ClosedForm(_) => {
            return Err(BdrError::NeedsGrid {
                mode: prob.config.inner_mode,
            })
        }
    };
    let cfg = &prob.config;
    let mut x = x0.to_vec();
    prob.project(&mut x);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..cfg.max_outer {
        iterations = k + 1;
        let h = |p: &SamplePoint| prob.loss.evaluate(&x, p);
        // (a) worst case at the current x
        let worst: Vec<(SamplePoint, f64)> = if prob.beta > 0.0 {
            match cfg.inner_mode {
                InnerMode::EqualWeight => {
                    let r = worst_case_equal_weight(&prob.ball, h, grid)?;
                    let w = 1.0 / r.relocations.len() as f64;
                    r.relocations.into_iter().map(|p| (p, w)).collect()
                }
                _ => {
                    let r = worst_case_primal(&prob.ball, h, grid)?;
                    r.distribution
                        .atoms()
                        .iter()
                        .cloned()
                        .zip(r.distribution.weights().iter().copied())
                        .collect()
                }
            }
        } else {
            Vec::new()
        };
        let saa = prob.saa_part(&x)?;
        let dro: f64 = worst.iter().map(|(p, w)| w * prob.loss.evaluate(&x, p)).sum();
        let value = if prob.beta == 0.0 {
            saa
        } else {
            prob.beta * dro + (1.0 - prob.beta) * saa
        };
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((x.clone(), value));
        }
        history.push(value);
        if history.len() > cfg.window {
            let old = history[history.len() - 1 - cfg.window];
            if (value - old).abs() <= cfg.rel_tol * value.abs().max(1.0) {
                converged = true;
                break;
            }
        }

        // (b) subgradient step with the worst case frozen
        let mut g = vec![0.0; x.len()];
        for (p, w) in &worst {
            let s = prob.loss.subgradient(&x, p).ok_or(BdrError::NoSubgradient)?;
            for (gi, si) in g.iter_mut().zip(s) {
                *gi += prob.beta * w * si;
            }
        }
        let emp = prob.empirical();
        for (p, &w) in emp.atoms().iter().zip(emp.weights()) {
            let s = prob.loss.subgradient(&x, p).ok_or(BdrError::NoSubgradient)?;
            for (gi, si) in g.iter_mut().zip(s) {
                *gi += (1.0 - prob.beta) * w * si;
            }
        }
        if g.iter().all(|&v| v == 0.0) {
            converged = true;
            break;
        }
        let step = cfg.step_a / (k as f64 + cfg.step_b);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * gi;
        }
        prob.project(&mut x);
    }
    let (x_best, _) = best.expect("at least one outer iteration");
    solution(prob, x_best, iterations, converged)
}

/// Minimizes a blended objective of one decision variable over `[lo, hi]`
/// by golden-section search, to bracket width `tol`. Exact up to `tol` for
/// losses convex in `x`.
pub fn solve_bdr_scalar(prob: &BdrProblem, lo: f64, hi: f64, tol: f64) -> Result<BdrSolution, BdrError> {
    if prob.decision_dim != 1 {
        return Err(BdrError::DimensionMismatch {
            expected: 1,
            got: prob.decision_dim,
        });
    }
    if !prob.loss.convex_in_x() {
        return Err(BdrError::NotConvex);
    }
    let mut err = None;
    let mut evals = 0usize;
    let (x, _) = golden_section_min(
        |x| {
            evals += 1;
            match bdr_objective(prob, &[x]) {
                Ok(p) => p.value,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::INFINITY
                }
            }
        },
        lo,
        hi,
        tol,
    );
    if let Some(e) = err {
        return Err(e);
    }
    solution(prob, vec![x], evals, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> SamplePoint {
        SamplePoint::scalar(v)
    }

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<SamplePoint> {
        let k = ((hi - lo) / step).round() as usize;
        (0..=k).map(|i| s(lo + i as f64 * step)).collect()
    }

    fn problem(loss: Arc<dyn LossOracle>, beta: f64, eps: f64, g: Vec<SamplePoint>) -> BdrProblem {
        BdrProblem::data_driven(
            loss,
            vec![s(0.0), s(1.0)],
            beta,
            eps,
            1.0,
            GroundMetric::Euclidean,
            1,
            InnerRepresentation::Grid(g),
        )
        .unwrap()
    }

    #[test]
    fn blend_endpoints() {
        let g = grid(0.0, 1.0, 0.1);
        for beta in [0.0, 0.3, 1.0] {
            let p = problem(Arc::new(SquaredLoss), beta, 0.0, g.clone());
            let parts = bdr_objective(&p, &[0.5]).unwrap();
            assert!((parts.value - 0.25).abs() < 1e-12);
        }
        let p = problem(Arc::new(SquaredLoss), 0.0, 0.3, g.clone());
        let parts = bdr_objective(&p, &[0.2]).unwrap();
        assert_eq!(parts.value, parts.saa);
        let p = problem(Arc::new(SquaredLoss), 1.0, 0.3, g);
        let parts = bdr_objective(&p, &[0.2]).unwrap();
        assert_eq!(parts.value, parts.dro);
        assert!(parts.saa <= parts.dro);
    }

    #[test]
    fn regularized_form_identity() {
        let g = grid(0.0, 1.0, 0.1);
        let p = problem(Arc::new(SquaredLoss), 0.5, 0.2, g.clone());
        let (lam, f) = regularized_form(&p, &[0.3]).unwrap();
        assert_eq!(lam, 1.0);
        let parts = bdr_objective(&p, &[0.3]).unwrap();
        assert!((parts.value / 0.5 - (parts.saa + lam * f)).abs() < 1e-8);
        let p0 = problem(Arc::new(SquaredLoss), 0.0, 0.2, g.clone());
        assert_eq!(regularized_form(&p0, &[0.3]).unwrap().0, 0.0);
        let p1 = problem(Arc::new(SquaredLoss), 1.0, 0.2, g);
        assert!(matches!(regularized_form(&p1, &[0.3]), Err(BdrError::BetaIsOne)));
    }

    #[test]
    fn coordinate_descent_least_squares() {
        let p = problem(Arc::new(SquaredLoss), 0.5, 0.0, grid(0.0, 1.0, 0.1));
        let sol = solve_bdr_coordinate_descent(&p, &[0.0]).unwrap();
        assert!((sol.value - 0.25).abs() < 1e-4, "{sol:?}");
        assert!((sol.x_opt[0] - 0.5).abs() < 1e-2);
    }

    #[test]
    fn dual_objective_zero_beta() {
        let p = problem(Arc::new(SquaredLoss), 0.0, 0.3, grid(0.0, 1.0, 0.1));
        let saa = p.saa_part(&[0.1]).unwrap();
        for lam in [0.0, 1.0, 7.0] {
            assert_eq!(bdr_dual_objective(&p, &[0.1], lam).unwrap(), saa);
        }
    }

    #[test]
    fn refuses_nonconvex() {
        struct Wavy;
        impl LossOracle for Wavy {
            fn evaluate(&self, x: &[f64], xi: &SamplePoint) -> f64 {
                (x[0] - xi.coords[0]).sin()
            }
            fn convex_in_x(&self) -> bool {
                false
            }
        }
        let p = problem(Arc::new(Wavy), 0.5, 0.1, grid(0.0, 1.0, 0.1));
        assert!(matches!(solve_bdr_coordinate_descent(&p, &[0.0]), Err(BdrError::NotConvex)));
    }
}
