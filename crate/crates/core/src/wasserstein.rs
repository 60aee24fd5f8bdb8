//! Ground metrics, order-p Wasserstein distances between discrete
//! distributions, and the worst-case expectation over a Wasserstein ball.
//!
//! The worst case over `B_ε(P̄)` with `P̄ = Σᵢ μ̄ᵢ δ_{ξᵢ}` and a finite candidate
//! set `{ζⱼ}` is the transport LP
//!
//! ```text
//! max  Σᵢⱼ h(ζⱼ) Pᵢⱼ
//! s.t. Σⱼ Pᵢⱼ = μ̄ᵢ,   Σᵢⱼ dᵖ(ξᵢ, ζⱼ) Pᵢⱼ ≤ εᵖ,   P ≥ 0
//! ```
//!
//! with dual `min_{λ₀ ≥ 0} εᵖλ₀ + Σᵢ μ̄ᵢ maxⱼ {h(ζⱼ) − λ₀ dᵖ(ξᵢ, ζⱼ)}`. Three
//! routes are provided: the primal LP ([`worst_case_primal`]), a 1-D search
//! over the dual multiplier ([`worst_case_dual`]), and, for equal-weight
//! centers, a per-atom relocation solved as a multiple-choice knapsack
//! ([`worst_case_equal_weight`]).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::distributions::{DiscreteDistribution, DistributionError, SamplePoint};
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::numeric::{golden_section_min, CompensatedSum};

/// Upper limit on the dense cost matrix, `n × |candidates|`.
pub const MAX_COST_ENTRIES: usize = 10_000_000;
/// Upper limit on the dense transport LP, rows × columns.
pub const MAX_LP_ENTRIES: usize = 40_000_000;
/// Width at which the λ₀ search stops.
pub const LAMBDA_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum WassersteinError {
    #[error("radius must be finite and ≥ 0, got {0}")]
    BadRadius(f64),
    #[error("order p must be finite and ≥ 1, got {0}")]
    BadOrder(f64),
    #[error("the candidate set is empty")]
    EmptyCandidates,
    #[error("loss is not finite ({value}) at candidate {index}")]
    NonFiniteLoss { index: usize, value: f64 },
    #[error("metric value {value} between atoms {i} and {j} is invalid")]
    BadMetric { i: usize, j: usize, value: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cost matrix of {rows}×{cols} exceeds the size limit")]
    TooLarge { rows: usize, cols: usize },
    #[error("no candidate distribution is within the transport budget")]
    BudgetInfeasible,
    #[error("dual objective keeps decreasing at λ₀ = {lambda_max}; the loss grows faster than dᵖ")]
    DualUnbounded { lambda_max: f64 },
    #[error("equal-weight route needs a uniformly weighted center")]
    NonUniformCenter,
    #[error("transport LP ended with status {0:?}")]
    Solver(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

type MetricFn = dyn Fn(&SamplePoint, &SamplePoint) -> f64 + Send + Sync;

/// Distance `d(ξ, ξ')` on the sample space.
#[derive(Clone)]
pub enum GroundMetric {
    /// Euclidean norm of the coordinate difference; labels are ignored.
    Euclidean,
    /// `‖I − I'‖∞ + κ·1{Y ≠ Y'}`.
    InfNormWithLabelFlip { kappa: f64 },
    Custom(Arc<MetricFn>),
}

impl fmt::Debug for GroundMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundMetric::Euclidean => write!(f, "Euclidean"),
            GroundMetric::InfNormWithLabelFlip { kappa } => write!(f, "InfNormWithLabelFlip({kappa})"),
            GroundMetric::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl GroundMetric {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(&SamplePoint, &SamplePoint) -> f64 + Send + Sync + 'static,
    {
        GroundMetric::Custom(Arc::new(f))
    }

    pub fn distance(&self, a: &SamplePoint, b: &SamplePoint) -> Result<f64, WassersteinError> {
        if a.dim() != b.dim() {
            return Err(WassersteinError::DimensionMismatch(a.dim(), b.dim()));
        }
        Ok(match self {
            GroundMetric::Euclidean => a
                .coords
                .iter()
                .zip(&b.coords)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt(),
            GroundMetric::InfNormWithLabelFlip { kappa } => {
                let inf = a.coords.iter().zip(&b.coords).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
                inf + if a.label != b.label { *kappa } else { 0.0 }
            }
            GroundMetric::Custom(f) => f(a, b),
        })
    }

    /// Checks `d(ξ, ξ) = 0`, symmetry, and nonnegativity on all pairs of the
    /// given points, within `tol`.
    pub fn check_axioms(&self, points: &[SamplePoint], tol: f64) -> Result<(), WassersteinError> {
        for (i, a) in points.iter().enumerate() {
            let self_d = self.distance(a, a)?;
            if !(self_d.abs() <= tol) {
                return Err(WassersteinError::BadMetric { i, j: i, value: self_d });
            }
            for (j, b) in points.iter().enumerate().skip(i + 1) {
                let ab = self.distance(a, b)?;
                let ba = self.distance(b, a)?;
                if !(ab >= -tol && (ab - ba).abs() <= tol) {
                    return Err(WassersteinError::BadMetric { i, j, value: ab });
                }
            }
        }
        Ok(())
    }
}

/// `{P : W_p(P, center) ≤ radius}` under `metric`.
#[derive(Debug, Clone)]
pub struct WassersteinBall {
    pub center: DiscreteDistribution,
    radius: f64,
    order: f64,
    pub metric: GroundMetric,
}

impl WassersteinBall {
    pub fn new(center: DiscreteDistribution, radius: f64, order: f64, metric: GroundMetric) -> Result<Self, WassersteinError> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(WassersteinError::BadRadius(radius));
        }
        if !(order >= 1.0 && order.is_finite()) {
            return Err(WassersteinError::BadOrder(order));
        }
        Ok(Self {
            center,
            radius,
            order,
            metric,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// The transport budget `εᵖ`.
    pub fn budget(&self) -> f64 {
        self.radius.powf(self.order)
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self, WassersteinError> {
        Self::new(self.center.clone(), radius, self.order, self.metric.clone())
    }

    /// `dᵖ(ξᵢ, ζⱼ)` for every center atom `i` and candidate `j`, row-major.
    pub fn cost_matrix(&self, candidates: &[SamplePoint]) -> Result<Vec<f64>, WassersteinError> {
        cost_matrix(self.center.atoms(), candidates, &self.metric, self.order)
    }
}

fn cost_matrix(
    from: &[SamplePoint],
    to: &[SamplePoint],
    metric: &GroundMetric,
    p: f64,
) -> Result<Vec<f64>, WassersteinError> {
    if from.len().saturating_mul(to.len()) > MAX_COST_ENTRIES {
        return Err(WassersteinError::TooLarge {
            rows: from.len(),
            cols: to.len(),
        });
    }
    let mut c = Vec::with_capacity(from.len() * to.len());
    for (i, a) in from.iter().enumerate() {
        for (j, b) in to.iter().enumerate() {
            let d = metric.distance(a, b)?;
            if !(d >= 0.0 && d.is_finite()) {
                return Err(WassersteinError::BadMetric { i, j, value: d });
            }
            c.push(if p == 1.0 { d } else { d.powf(p) });
        }
    }
    Ok(c)
}

fn evaluate_losses<H>(h: H, candidates: &[SamplePoint]) -> Result<Vec<f64>, WassersteinError>
where
    H: Fn(&SamplePoint) -> f64,
{
    candidates
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let value = h(c);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(WassersteinError::NonFiniteLoss { index, value })
            }
        })
        .collect()
}

/// A coupling stored row-major: row `i` is source atom `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
}

impl TransportPlan {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.cols..(i + 1) * self.cols]
    }

    /// True iff all entries are ≥ −tol and both marginals hold within tol.
    pub fn is_valid(&self, tol: f64) -> bool {
        if self.matrix.iter().any(|&v| v < -tol) {
            return false;
        }
        let rows_ok = (0..self.rows).all(|i| (self.row(i).iter().sum::<f64>() - self.row_marginal[i]).abs() <= tol);
        let cols_ok = (0..self.cols)
            .all(|j| ((0..self.rows).map(|i| self.entry(i, j)).sum::<f64>() - self.col_marginal[j]).abs() <= tol);
        rows_ok && cols_ok
    }

    /// `Σᵢⱼ cost[i][j]·Pᵢⱼ` for a row-major cost matrix of the same shape.
    pub fn cost(&self, cost: &[f64]) -> f64 {
        self.matrix.iter().zip(cost).map(|(p, c)| p * c).collect::<CompensatedSum>().value()
    }

    /// Clips small negative entries, rescales each row to its marginal, and
    /// recomputes the column marginal.
    fn cleaned(mut matrix: Vec<f64>, rows: usize, cols: usize, row_marginal: &[f64]) -> Self {
        for v in &mut matrix {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        for i in 0..rows {
            let r = &mut matrix[i * cols..(i + 1) * cols];
            let s: f64 = r.iter().sum();
            if s > 0.0 {
                let f = row_marginal[i] / s;
                r.iter_mut().for_each(|v| *v *= f);
            }
        }
        let col_marginal = (0..cols)
            .map(|j| (0..rows).map(|i| matrix[i * cols + j]).collect::<CompensatedSum>().value())
            .collect();
        Self {
            matrix,
            rows,
            cols,
            row_marginal: row_marginal.to_vec(),
            col_marginal,
        }
    }
}

/// `W_p(a, b)` and an optimal coupling, from the transport LP.
pub fn wasserstein_distance(
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    p: f64,
    metric: &GroundMetric,
) -> Result<(f64, TransportPlan), WassersteinError> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(WassersteinError::BadOrder(p));
    }
    if a.dim() != b.dim() {
        return Err(WassersteinError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (n, m) = (a.len(), b.len());
    let cost = cost_matrix(a.atoms(), b.atoms(), metric, p)?;
    if (n + m) * n * m > MAX_LP_ENTRIES {
        return Err(WassersteinError::TooLarge { rows: n, cols: m });
    }
    let mut lp = LinearProgram::new(cost.clone());
    for i in 0..n {
        let row: Vec<(usize, f64)> = (0..m).map(|j| (i * m + j, 1.0)).collect();
        lp.add_sparse_row(&row, Relation::Eq, a.weights()[i])?;
    }
    // the last column constraint is implied by the others
    for j in 0..m.saturating_sub(1) {
        let col: Vec<(usize, f64)> = (0..n).map(|i| (i * m + j, 1.0)).collect();
        lp.add_sparse_row(&col, Relation::Eq, b.weights()[j])?;
    }
    let sol = solve_lp(&lp, 1e-12)?;
    if sol.status != LpStatus::Optimal {
        return Err(WassersteinError::Solver(sol.status));
    }
    let mut plan = TransportPlan::cleaned(sol.primal, n, m, a.weights());
    plan.col_marginal = b.weights().to_vec();
    let total = plan.cost(&cost).max(0.0);
    Ok((total.powf(1.0 / p), plan))
}

/// Worst-case distribution over a ball and how it was obtained.
#[derive(Debug, Clone)]
pub struct WorstCaseResult {
    pub value: f64,
    /// Candidates carrying positive mass, weighted by the plan's column sums.
    pub distribution: DiscreteDistribution,
    /// Center atoms × all candidates.
    pub plan: TransportPlan,
    /// Multiplier of the transport-budget row.
    pub dual_lambda0: f64,
    /// The center atom whose mass is divided between two candidates, if any.
    pub split_atom_index: Option<usize>,
    /// Share of the split atom's mass sent to the costlier of its two targets.
    pub split_fraction: Option<f64>,
}

/// Solves the transport LP over the given candidate support.
pub fn worst_case_primal<H>(
    ball: &WassersteinBall,
    h: H,
    candidates: &[SamplePoint],
) -> Result<WorstCaseResult, WassersteinError>
where
    H: Fn(&SamplePoint) -> f64,
{
    if candidates.is_empty() {
        return Err(WassersteinError::EmptyCandidates);
    }
    let hv = evaluate_losses(h, candidates)?;
    let cost = ball.cost_matrix(candidates)?;
    let (n, m) = (ball.center.len(), candidates.len());
    if (n + 1).saturating_mul(n * m) > MAX_LP_ENTRIES {
        return Err(WassersteinError::TooLarge { rows: n, cols: m });
    }
    let mut obj = Vec::with_capacity(n * m);
    for _ in 0..n {
        obj.extend(hv.iter().map(|v| -v));
    }
    let mut lp = LinearProgram::new(obj);
    for i in 0..n {
        let row: Vec<(usize, f64)> = (0..m).map(|j| (i * m + j, 1.0)).collect();
        lp.add_sparse_row(&row, Relation::Eq, ball.center.weights()[i])?;
    }
    let budget_row: Vec<(usize, f64)> = cost.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(k, &c)| (k, c)).collect();
    let budget = ball.budget();
    lp.add_sparse_row(&budget_row, Relation::Le, budget)?;
    let sol = solve_lp(&lp, 1e-11)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(WassersteinError::BudgetInfeasible),
        s => return Err(WassersteinError::Solver(s)),
    }
    let plan = TransportPlan::cleaned(sol.primal, n, m, ball.center.weights());
    let value = hv
        .iter()
        .zip(&plan.col_marginal)
        .map(|(h, w)| h * w)
        .collect::<CompensatedSum>()
        .value();

    let (atoms, weights): (Vec<SamplePoint>, Vec<f64>) = plan
        .col_marginal
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(j, &w)| (candidates[j].clone(), w))
        .unzip();
    let total: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w / total).collect();
    let distribution = DiscreteDistribution::new(atoms, weights)?;

    let mut split_atom_index = None;
    let mut split_fraction = None;
    for i in 0..n {
        let targets: Vec<usize> = (0..m).filter(|&j| plan.entry(i, j) > 0.0).collect();
        if targets.len() == 2 {
            let (a, b) = (targets[0], targets[1]);
            let far = if cost[i * m + a] >= cost[i * m + b] { a } else { b };
            split_atom_index = Some(i);
            split_fraction = Some(plan.entry(i, far) / ball.center.weights()[i]);
            break;
        }
    }
    Ok(WorstCaseResult {
        value,
        distribution,
        plan,
        dual_lambda0: (-sol.dual[n]).max(0.0),
        split_atom_index,
        split_fraction,
    })
}

/// Checks the support structure of a worst case: every center atom's mass
/// goes to a single candidate, except that at most one atom's mass may be
/// divided between two candidates; the resulting distribution has at most
/// `n + 1` atoms of weight above `tol` and matches the plan's column sums.
/// Mass of different center atoms may land on the same candidate.
pub fn verify_support_structure(result: &WorstCaseResult, center: &DiscreteDistribution, tol: f64) -> bool {
    let plan = &result.plan;
    if plan.rows != center.len() || !plan.is_valid(tol) {
        return false;
    }
    if plan.row_marginal.iter().zip(center.weights()).any(|(a, b)| (a - b).abs() > tol) {
        return false;
    }
    let mut splits = 0;
    for i in 0..plan.rows {
        let targets: Vec<f64> = plan.row(i).iter().copied().filter(|&v| v > tol).collect();
        match targets.len() {
            0 if center.weights()[i] <= tol => {}
            1 => {}
            2 => {
                splits += 1;
                if (targets[0] + targets[1] - center.weights()[i]).abs() > tol {
                    return false;
                }
            }
            _ => return false,
        }
    }
    if splits > 1 {
        return false;
    }
    let heavy = result.distribution.weights().iter().filter(|&&w| w > tol).count();
    if heavy > center.len() + 1 {
        return false;
    }
    // distribution weights must be the positive column sums, in order
    let positive: Vec<f64> = plan.col_marginal.iter().copied().filter(|&w| w > 0.0).collect();
    positive.len() == result.distribution.len()
        && positive.iter().zip(result.distribution.weights()).all(|(a, b)| (a - b).abs() <= tol)
}

/// Where to search for the dual multiplier λ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSearch {
    pub lambda_max: f64,
    pub tol: f64,
}

impl DualSearch {
    pub fn up_to(lambda_max: f64) -> Self {
        Self {
            lambda_max,
            tol: LAMBDA_TOL,
        }
    }
}

/// Minimizes the dual objective `εᵖλ₀ + Σᵢ μ̄ᵢ inner_max(λ₀, ξᵢ)` over
/// `λ₀ ∈ [0, lambda_max]` by golden-section search (the objective is convex).
/// `inner_max(λ₀, i, ξᵢ)` must return `sup_ζ {h(ζ) − λ₀ dᵖ(ζ, ξᵢ)}` for
/// center atom `i`.
///
/// At `ε = 0` the infimum is the limit `λ₀ → ∞`, which equals the center's
/// expected loss; that value is returned with `λ₀ = +∞`.
pub fn worst_case_dual<H, I>(
    ball: &WassersteinBall,
    h: H,
    mut inner_max: I,
    search: DualSearch,
) -> Result<(f64, f64), WassersteinError>
where
    H: Fn(&SamplePoint) -> f64,
    I: FnMut(f64, usize, &SamplePoint) -> f64,
{
    let center = &ball.center;
    if ball.radius() == 0.0 {
        let v = crate::distributions::expectation(center, |p| h(p))?;
        return Ok((v, f64::INFINITY));
    }
    if !(search.lambda_max >= 0.0 && search.lambda_max.is_finite()) {
        return Err(WassersteinError::DualUnbounded {
            lambda_max: search.lambda_max,
        });
    }
    let budget = ball.budget();
    let mut objective = |lam: f64| {
        let mut acc = CompensatedSum::new();
        acc.add(budget * lam);
        for (i, (a, &w)) in center.atoms().iter().zip(center.weights()).enumerate() {
            acc.add(w * inner_max(lam, i, a));
        }
        acc.value()
    };
    let (lam, value) = golden_section_min(&mut objective, 0.0, search.lambda_max, search.tol);
    if !value.is_finite() {
        return Err(WassersteinError::DualUnbounded {
            lambda_max: search.lambda_max,
        });
    }
    let hi = search.lambda_max;
    if hi - lam <= 2.0 * search.tol.max(1e-12 * hi) && objective(2.0 * hi + 1.0) < value - 1e-12 {
        return Err(WassersteinError::DualUnbounded { lambda_max: hi });
    }
    Ok((value, lam))
}

/// Exact inner maximization over a finite candidate set:
/// `(λ₀, ξ) ↦ maxⱼ {h(ζⱼ) − λ₀ dᵖ(ζⱼ, ξ)}`. Losses and costs are
/// precomputed for the center atoms.
pub struct GridInnerMax {
    losses: Vec<f64>,
    cost: Vec<f64>,
    m: usize,
    n: usize,
}

impl GridInnerMax {
    pub fn new<H>(ball: &WassersteinBall, h: H, grid: &[SamplePoint]) -> Result<Self, WassersteinError>
    where
        H: Fn(&SamplePoint) -> f64,
    {
        if grid.is_empty() {
            return Err(WassersteinError::EmptyCandidates);
        }
        Ok(Self {
            losses: evaluate_losses(h, grid)?,
            cost: ball.cost_matrix(grid)?,
            m: grid.len(),
            n: ball.center.len(),
        })
    }

    /// Inner maximum for center atom `i`.
    pub fn at(&self, lambda0: f64, i: usize) -> f64 {
        let c = &self.cost[i * self.m..(i + 1) * self.m];
        self.losses
            .iter()
            .zip(c)
            .fold(f64::NEG_INFINITY, |best, (h, d)| best.max(h - lambda0 * d))
    }

    /// A λ₀ beyond which the dual objective only grows when every center
    /// atom is itself a candidate: `2·L + 1` with `L` the largest observed
    /// growth rate from a center atom to a candidate.
    pub fn lambda_max(&self) -> f64 {
        let mut l = 0.0f64;
        for i in 0..self.n {
            let c = &self.cost[i * self.m..(i + 1) * self.m];
            // loss at the center atom = the best zero-cost candidate
            let base = self
                .losses
                .iter()
                .zip(c)
                .filter(|(_, &d)| d == 0.0)
                .fold(f64::NEG_INFINITY, |b, (&h, _)| b.max(h));
            for (h, &d) in self.losses.iter().zip(c) {
                if d > 0.0 && base.is_finite() {
                    l = l.max((h - base) / d);
                } else if d > 0.0 {
                    l = l.max(h.abs() / d);
                }
            }
        }
        2.0 * l + 1.0
    }

    /// Upper end of the λ₀ search for `ball`. Fails with `BudgetInfeasible`
    /// when even the cheapest relocation of every atom exceeds the budget.
    /// When some center atom is not a candidate, the minimizer also lies
    /// below `(max h − min h)/(εᵖ − D)`, with `D = Σᵢ μ̄ᵢ minⱼ dᵖ(ζⱼ, ξᵢ)`.
    pub fn search_bound(&self, ball: &WassersteinBall) -> Result<f64, WassersteinError> {
        let budget = ball.budget();
        let d: f64 = ball
            .center
            .weights()
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let c = &self.cost[i * self.m..(i + 1) * self.m];
                w * c.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .collect::<CompensatedSum>()
            .value();
        if d == 0.0 {
            return Ok(self.lambda_max());
        }
        if d >= budget {
            return Err(WassersteinError::BudgetInfeasible);
        }
        let hmax = self.losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hmin = self.losses.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(self.lambda_max().max((hmax - hmin) / (budget - d) * 1.01 + 1.0))
    }
}

/// Dual route with the inner maximum taken over a finite grid.
pub fn worst_case_dual_grid<H>(
    ball: &WassersteinBall,
    h: H,
    grid: &[SamplePoint],
) -> Result<(f64, f64), WassersteinError>
where
    H: Fn(&SamplePoint) -> f64,
{
    let inner = GridInnerMax::new(ball, &h, grid)?;
    if ball.radius() == 0.0 {
        // the λ₀ → ∞ limit over the grid keeps only zero-cost candidates
        let mut acc = CompensatedSum::new();
        for (i, &w) in ball.center.weights().iter().enumerate() {
            let c = &inner.cost[i * inner.m..(i + 1) * inner.m];
            let best = inner
                .losses
                .iter()
                .zip(c)
                .filter(|(_, &d)| d == 0.0)
                .fold(f64::NEG_INFINITY, |b, (&h, _)| b.max(h));
            if !best.is_finite() {
                return Err(WassersteinError::BudgetInfeasible);
            }
            acc.add(w * best);
        }
        return Ok((acc.value(), f64::INFINITY));
    }
    let search = DualSearch::up_to(inner.search_bound(ball)?);
    worst_case_dual(ball, &h, |lam, i, _| inner.at(lam, i), search)
}

/// Result of the equal-weight route.
#[derive(Debug, Clone)]
pub struct EqualWeightResult {
    pub value: f64,
    /// One relocated point per center atom.
    pub relocations: Vec<SamplePoint>,
    /// Grid index chosen for each atom (the costlier target for a split atom).
    pub choices: Vec<usize>,
    /// `(atom, cheaper target, costlier target, share on the costlier one)`
    /// when the budget ends inside an atom's choice.
    pub split: Option<(usize, usize, usize, f64)>,
    /// `(1/n) Σᵢ dᵖ` actually spent by the chosen grid targets (with the
    /// split atom counted fractionally).
    pub budget_used: f64,
}

/// Equal-weight worst case: each of the `n` center atoms (weight `1/n`)
/// relocates to one grid point, maximizing the average loss subject to an
/// average transport cost of at most `εᵖ`.
///
/// This is a multiple-choice knapsack. Its continuous relaxation, solved
/// here greedily on the upper concave envelope of each atom's
/// (cost, loss) options, allows one atom to be shared between two adjacent
/// envelope points; its value equals the transport LP with uniform rows.
/// For that atom the reported relocation is a point on the segment between
/// its two targets where the loss equals the blended loss (found by
/// bisection); if the two targets carry different labels the costlier target
/// is reported instead.
pub fn worst_case_equal_weight<H>(
    ball: &WassersteinBall,
    h: H,
    grid: &[SamplePoint],
) -> Result<EqualWeightResult, WassersteinError>
where
    H: Fn(&SamplePoint) -> f64,
{
    if grid.is_empty() {
        return Err(WassersteinError::EmptyCandidates);
    }
    if !ball.center.is_uniform() {
        return Err(WassersteinError::NonUniformCenter);
    }
    let n = ball.center.len();
    let m = grid.len();
    let hv = evaluate_losses(&h, grid)?;
    let cost = ball.cost_matrix(grid)?;
    let total_budget = n as f64 * ball.budget();

    // per atom: the upper concave envelope of (cost, loss), starting at the
    // cheapest option (ties broken by larger loss, then lower index)
    let mut hulls: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let c = &cost[i * m..(i + 1) * m];
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(hv[b].total_cmp(&hv[a])).then(a.cmp(&b)));
        let mut hull: Vec<usize> = Vec::new();
        for &j in &order {
            if let Some(&last) = hull.last() {
                if hv[j] <= hv[last] {
                    continue; // dominated: no cheaper-or-equal option is worse
                }
            }
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                // drop b if it lies on or below the chord a–j
                let lhs = (hv[b] - hv[a]) * (c[j] - c[a]);
                let rhs = (hv[j] - hv[a]) * (c[b] - c[a]);
                if lhs <= rhs {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(j);
        }
        hulls.push(hull);
    }

    let mut spent: f64 = (0..n).map(|i| cost[i * m + hulls[i][0]]).sum();
    if spent > total_budget * (1.0 + 1e-12) + 1e-15 {
        return Err(WassersteinError::BudgetInfeasible);
    }
    // incremental segments (slope, atom, position in hull)
    let mut segments: Vec<(f64, usize, usize)> = Vec::new();
    for (i, hull) in hulls.iter().enumerate() {
        let c = &cost[i * m..(i + 1) * m];
        for k in 1..hull.len() {
            let (a, b) = (hull[k - 1], hull[k]);
            let dc = c[b] - c[a];
            let slope = if dc > 0.0 { (hv[b] - hv[a]) / dc } else { f64::INFINITY };
            segments.push((slope, i, k));
        }
    }
    segments.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut level: Vec<usize> = vec![0; n];
    let mut split = None;
    for &(_, i, k) in &segments {
        if level[i] + 1 != k {
            continue; // an earlier segment of this atom did not fit
        }
        let c = &cost[i * m..(i + 1) * m];
        let (a, b) = (hulls[i][k - 1], hulls[i][k]);
        let dc = c[b] - c[a];
        let room = total_budget - spent;
        if dc <= room {
            spent += dc;
            level[i] = k;
        } else {
            if room > 0.0 {
                split = Some((i, a, b, room / dc));
                spent += room;
            }
            break;
        }
    }

    let mut acc = CompensatedSum::new();
    let mut choices = Vec::with_capacity(n);
    let mut relocations = Vec::with_capacity(n);
    for i in 0..n {
        let j = hulls[i][level[i]];
        match split {
            Some((si, a, b, q)) if si == i => {
                let target = (1.0 - q) * hv[a] + q * hv[b];
                acc.add(target);
                choices.push(b);
                relocations.push(intermediate_point(&h, &grid[a], &grid[b], hv[a], hv[b], target));
            }
            _ => {
                acc.add(hv[j]);
                choices.push(j);
                relocations.push(grid[j].clone());
            }
        }
    }
    Ok(EqualWeightResult {
        value: acc.value() / n as f64,
        relocations,
        choices,
        split,
        budget_used: spent / n as f64,
    })
}

/// A point on the segment from `u` to `v` where `h` equals `target`, which
/// lies between `h(u)` and `h(v)`; bisection on the segment parameter.
fn intermediate_point<H>(h: &H, u: &SamplePoint, v: &SamplePoint, hu: f64, hv: f64, target: f64) -> SamplePoint
where
    H: Fn(&SamplePoint) -> f64,
{
    if u.label != v.label {
        return v.clone();
    }
    let at = |t: f64| SamplePoint {
        coords: u.coords.iter().zip(&v.coords).map(|(a, b)| a + t * (b - a)).collect(),
        label: u.label,
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let increasing = hv >= hu;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let val = h(&at(mid));
        let below = if increasing { val < target } else { val > target };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Largest observed `(h(ξ) − h(ξ₀)) / dᵖ(ξ, ξ₀)` over probe pairs with
/// positive distance; `None` if no pair has positive distance.
pub fn growth_rate_check<H>(
    h: H,
    metric: &GroundMetric,
    p: f64,
    probes: &[(SamplePoint, SamplePoint)],
) -> Result<Option<f64>, WassersteinError>
where
    H: Fn(&SamplePoint) -> f64,
{
    let mut best: Option<f64> = None;
    for (a, b) in probes {
        let d = metric.distance(a, b)?;
        if d > 0.0 {
            let r = (h(a) - h(b)) / d.powf(p);
            best = Some(best.map_or(r, |x: f64| x.max(r)));
        }
    }
    Ok(best)
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

    fn abs_metric() -> GroundMetric {
        GroundMetric::Euclidean
    }

    #[test]
    fn distance_examples() {
        let p = DiscreteDistribution::uniform(vec![s(0.0), s(1.0)]).unwrap();
        let q = DiscreteDistribution::dirac(s(0.5));
        let (d, plan) = wasserstein_distance(&p, &q, 1.0, &abs_metric()).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!(plan.is_valid(1e-12));
        let (d, _) = wasserstein_distance(&p, &p, 2.0, &abs_metric()).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn dirac_center_linear_loss() {
        let center = DiscreteDistribution::dirac(s(0.0));
        let ball = WassersteinBall::new(center.clone(), 0.3, 1.0, abs_metric()).unwrap();
        let g = grid(0.0, 1.0, 0.01);
        let r = worst_case_primal(&ball, |p| p.coords[0], &g).unwrap();
        assert!((r.value - 0.3).abs() < 1e-9);
        assert!(verify_support_structure(&r, &center, 1e-7));
        let (v, lam) = worst_case_dual_grid(&ball, |p| p.coords[0], &g).unwrap();
        assert!((v - 0.3).abs() < 1e-9);
        assert!((lam - 1.0).abs() < 1e-6 || v > 0.0);
    }

    #[test]
    fn zero_radius_returns_center() {
        let center = DiscreteDistribution::new(vec![s(0.2), s(0.7)], vec![0.4, 0.6]).unwrap();
        let ball = WassersteinBall::new(center.clone(), 0.0, 1.0, abs_metric()).unwrap();
        let mut g = grid(0.0, 1.0, 0.1);
        g.push(s(0.2));
        g.push(s(0.7));
        let h = |p: &SamplePoint| (p.coords[0] - 0.4).powi(2);
        let exp = crate::distributions::expectation(&center, h).unwrap();
        let r = worst_case_primal(&ball, h, &g).unwrap();
        assert!((r.value - exp).abs() < 1e-12);
        assert!(verify_support_structure(&r, &center, 1e-7));
        assert_eq!(r.split_atom_index, None);
        let (v, lam) = worst_case_dual_grid(&ball, h, &g).unwrap();
        assert!((v - exp).abs() < 1e-12);
        assert!(lam.is_infinite());
    }

    #[test]
    fn uniform_pair_linear_loss() {
        let center = DiscreteDistribution::uniform(vec![s(0.0), s(1.0)]).unwrap();
        let ball = WassersteinBall::new(center, 0.2, 1.0, abs_metric()).unwrap();
        let g = grid(0.0, 1.0, 0.01);
        let h = |p: &SamplePoint| p.coords[0];
        let r = worst_case_primal(&ball, h, &g).unwrap();
        assert!((r.value - 0.7).abs() < 1e-9);
        let e = worst_case_equal_weight(&ball, h, &g).unwrap();
        assert!((e.value - 0.7).abs() < 1e-9);
        assert!(e.budget_used <= 0.2 + 1e-12);
    }

    #[test]
    fn equal_weight_concave_loss() {
        let center = DiscreteDistribution::uniform(vec![s(0.2), s(0.8)]).unwrap();
        let ball = WassersteinBall::new(center, 0.1, 1.0, abs_metric()).unwrap();
        let g = grid(0.0, 1.0, 0.01);
        let h = |p: &SamplePoint| -(p.coords[0] - 0.5).powi(2);
        let r = worst_case_primal(&ball, h, &g).unwrap();
        let e = worst_case_equal_weight(&ball, h, &g).unwrap();
        assert!((r.value - e.value).abs() < 1e-6, "{} vs {}", r.value, e.value);
        // with a concave loss the relocations realize the value within budget
        let realized: f64 = e.relocations.iter().map(&h).sum::<f64>() / 2.0;
        assert!((realized - e.value).abs() < 1e-9);
        let zero = worst_case_equal_weight(&ball.with_radius(0.0).unwrap(), h, &g).unwrap();
        assert_eq!(zero.relocations, ball.center.atoms());
    }

    #[test]
    fn rejects_fake_double_split() {
        let center = DiscreteDistribution::uniform(vec![s(0.0), s(1.0)]).unwrap();
        let ball = WassersteinBall::new(center.clone(), 0.2, 1.0, abs_metric()).unwrap();
        let g = grid(0.0, 1.0, 0.5);
        let mut r = worst_case_primal(&ball, |p| p.coords[0], &g).unwrap();
        assert!(verify_support_structure(&r, &center, 1e-7));
        r.plan.matrix = vec![0.25, 0.25, 0.0, 0.0, 0.25, 0.25];
        r.plan.col_marginal = vec![0.25, 0.5, 0.25];
        r.distribution = DiscreteDistribution::new(g.clone(), vec![0.25, 0.5, 0.25]).unwrap();
        assert!(!verify_support_structure(&r, &center, 1e-7));
    }

    #[test]
    fn growth_rates() {
        let probes: Vec<(SamplePoint, SamplePoint)> = (0..10).map(|i| (s(i as f64), s(i as f64 * 0.5 - 1.0))).collect();
        let m = abs_metric();
        assert_eq!(growth_rate_check(|_| 3.0, &m, 1.0, &probes).unwrap(), Some(0.0));
        let r = growth_rate_check(|p| p.coords[0], &m, 1.0, &probes).unwrap().unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(growth_rate_check(|_| 0.0, &m, 1.0, &[(s(1.0), s(1.0))]).unwrap(), None);
    }

    #[test]
    fn bad_inputs() {
        let center = DiscreteDistribution::dirac(s(0.0));
        assert!(matches!(
            WassersteinBall::new(center.clone(), -1.0, 1.0, abs_metric()),
            Err(WassersteinError::BadRadius(_))
        ));
        assert!(matches!(
            WassersteinBall::new(center.clone(), 1.0, 0.5, abs_metric()),
            Err(WassersteinError::BadOrder(_))
        ));
        let ball = WassersteinBall::new(center, 0.1, 1.0, abs_metric()).unwrap();
        assert!(matches!(
            worst_case_primal(&ball, |p| p.coords[0], &[]),
            Err(WassersteinError::EmptyCandidates)
        ));
        assert!(matches!(
            worst_case_primal(&ball, |_| f64::NAN, &[s(0.0)]),
            Err(WassersteinError::NonFiniteLoss { index: 0, .. })
        ));
        assert!(matches!(
            worst_case_primal(&ball.with_radius(0.0).unwrap(), |p| p.coords[0], &[s(1.0)]),
            Err(WassersteinError::BudgetInfeasible)
        ));
    }
}
