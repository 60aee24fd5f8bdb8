//! Dense linear programs and a self-contained simplex solver.
//!
//! Every LP in this crate (transport problems, worst-case inner maximizations,
//! the SVM programs) is stated as
//!
//! ```text
//! minimize    c·z
//! subject to  a_i·z  (≤ | = | ≥)  b_i        for each row i
//!             lower_j ≤ z_j ≤ upper_j       for each variable j
//! ```
//!
//! with `lower_j` possibly `-∞` and `upper_j` possibly `+∞`. Infinite bounds
//! are real infinities; nothing is replaced by a big-M constant.

mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::SimplexSolver;

/// Default primal feasibility tolerance.
pub const DEFAULT_FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("variable {var} has lower bound {lower} above upper bound {upper}")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("simplex exceeded the iteration limit of {0}")]
    IterationLimit(usize),
    #[error("basis matrix became numerically singular")]
    SingularBasis,
    #[error("no dual simplex pivot restores feasibility after removing the bound perturbation")]
    Cleanup,
}

/// Sense of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// A dense LP in the form documented at module level.
///
/// The constraint matrix is stored row-major. New variables default to the
/// bounds `[0, +∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    matrix: Vec<f64>,
    relations: Vec<Relation>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            matrix: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    /// Builds an LP from explicit parts, checking every structural invariant.
    pub fn from_dense(
        objective: Vec<f64>,
        rows: Vec<Vec<f64>>,
        relations: Vec<Relation>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, LpError> {
        let n = objective.len();
        if relations.len() != rows.len() {
            return Err(LpError::DimensionMismatch {
                what: "relation count vs. row count",
                expected: rows.len(),
                got: relations.len(),
            });
        }
        if rhs.len() != rows.len() {
            return Err(LpError::DimensionMismatch {
                what: "right-hand side length vs. row count",
                expected: rows.len(),
                got: rhs.len(),
            });
        }
        for (what, v) in [("lower bound count", &lower), ("upper bound count", &upper)] {
            if v.len() != n {
                return Err(LpError::DimensionMismatch {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let mut matrix = Vec::with_capacity(rows.len() * n);
        for row in &rows {
            if row.len() != n {
                return Err(LpError::DimensionMismatch {
                    what: "row length vs. variable count",
                    expected: n,
                    got: row.len(),
                });
            }
            matrix.extend_from_slice(row);
        }
        let lp = Self {
            objective,
            matrix,
            relations,
            rhs,
            lower,
            upper,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.num_vars();
        &self.matrix[i * n..(i + 1) * n]
    }

    pub fn relation(&self, i: usize) -> Relation {
        self.relations[i]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) -> Result<(), LpError> {
        if objective.len() != self.num_vars() {
            return Err(LpError::DimensionMismatch {
                what: "objective length",
                expected: self.num_vars(),
                got: objective.len(),
            });
        }
        self.objective = objective;
        Ok(())
    }

    pub fn add_row(&mut self, coeffs: &[f64], relation: Relation, rhs: f64) -> Result<usize, LpError> {
        if coeffs.len() != self.num_vars() {
            return Err(LpError::DimensionMismatch {
                what: "row length vs. variable count",
                expected: self.num_vars(),
                got: coeffs.len(),
            });
        }
        self.matrix.extend_from_slice(coeffs);
        self.relations.push(relation);
        self.rhs.push(rhs);
        Ok(self.num_rows() - 1)
    }

    /// Adds a row given as `(variable, coefficient)` pairs; repeated variables accumulate.
    pub fn add_sparse_row(
        &mut self,
        entries: &[(usize, f64)],
        relation: Relation,
        rhs: f64,
    ) -> Result<usize, LpError> {
        let n = self.num_vars();
        let start = self.matrix.len();
        self.matrix.resize(start + n, 0.0);
        for &(j, v) in entries {
            if j >= n {
                self.matrix.truncate(start);
                return Err(LpError::DimensionMismatch {
                    what: "sparse row variable index",
                    expected: n,
                    got: j,
                });
            }
            self.matrix[start + j] += v;
        }
        self.relations.push(relation);
        self.rhs.push(rhs);
        Ok(self.num_rows() - 1)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if var >= self.num_vars() {
            return Err(LpError::DimensionMismatch {
                what: "variable index",
                expected: self.num_vars(),
                got: var,
            });
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(LpError::InvalidBounds { var, lower, upper });
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        Ok(())
    }

    /// Marks a variable as free (`-∞ < z_j < +∞`).
    pub fn set_free(&mut self, var: usize) -> Result<(), LpError> {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let m = self.num_rows();
        if self.matrix.len() != n * m {
            return Err(LpError::DimensionMismatch {
                what: "matrix entry count",
                expected: n * m,
                got: self.matrix.len(),
            });
        }
        if let Some(j) = self.objective.iter().position(|v| !v.is_finite()) {
            return Err(LpError::NonFinite { what: "objective coefficient", index: j });
        }
        if let Some(k) = self.matrix.iter().position(|v| !v.is_finite()) {
            return Err(LpError::NonFinite { what: "matrix entry", index: k });
        }
        if let Some(i) = self.rhs.iter().position(|v| !v.is_finite()) {
            return Err(LpError::NonFinite { what: "right-hand side", index: i });
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::InvalidBounds { var: j, lower: l, upper: u });
            }
        }
        Ok(())
    }

    pub(crate) fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Row activity `a_i·z`.
    pub fn activity(&self, i: usize, z: &[f64]) -> f64 {
        self.row(i).iter().zip(z).map(|(a, v)| a * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a simplex solve.
///
/// `dual` holds one multiplier per row with the sign convention of a
/// minimization: `≤` rows carry multipliers `≤ 0`, `≥` rows `≥ 0`.
/// `reduced_costs` are the bound multipliers `c_j − a_jᵀ·dual`.
///
/// For `Infeasible`, `dual` is the phase-one multiplier vector (a Farkas-type
/// certificate). For `Unbounded`, `ray` is an improving direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `b·y + Σ_j d_j·(bound_j)` where each reduced cost is
    /// charged against the bound it certifies. Equals `value` at an optimum.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let mut total: f64 = lp.rhs().iter().zip(&self.dual).map(|(b, y)| b * y).sum();
        for (j, &d) in self.reduced_costs.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let bound = if d > 0.0 { lp.lower()[j] } else { lp.upper()[j] };
            if bound.is_finite() {
                total += d * bound;
            } else {
                // a nonzero multiplier on an infinite bound only appears as
                // roundoff; charge it at the primal value instead
                total += d * self.primal[j];
            }
        }
        total
    }
}

/// Pivoting strategy for entering-variable selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PivotRule {
    /// Lowest-index eligible variable everywhere. Terminates on any LP, slowly.
    Bland,
    /// Largest reduced cost, falling back to Bland's rule during long runs of
    /// degenerate pivots. Ties always go to the lowest index.
    DantzigBland,
    /// Devex approximate steepest edge (`d_j² / w_j`), with the same Bland
    /// fallback as `DantzigBland`.
    DevexBland,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// `None` means `50·(rows + cols)`.
    pub max_iterations: Option<usize>,
    pub pivot_rule: PivotRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: DEFAULT_FEAS_TOL,
            opt_tol: DEFAULT_FEAS_TOL,
            max_iterations: None,
            pivot_rule: PivotRule::DantzigBland,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            feas_tol: tol,
            opt_tol: tol,
            ..Self::default()
        }
    }
}

/// Solves `lp` with the default pivot rule and feasibility tolerance `tol`.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SolverOptions::with_tol(tol))
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    SimplexSolver::new(lp, *opts)?.solve()
}

/// True iff `z` satisfies every row and bound of `lp` within `tol`.
pub fn check_feasible(lp: &LinearProgram, z: &[f64], tol: f64) -> Result<bool, LpError> {
    if z.len() != lp.num_vars() {
        return Err(LpError::DimensionMismatch {
            what: "point length vs. variable count",
            expected: lp.num_vars(),
            got: z.len(),
        });
    }
    for (j, &v) in z.iter().enumerate() {
        if v.is_nan() || v < lp.lower()[j] - tol || v > lp.upper()[j] + tol {
            return Ok(false);
        }
    }
    for i in 0..lp.num_rows() {
        let act = lp.activity(i, z);
        let b = lp.rhs()[i];
        let ok = match lp.relation(i) {
            Relation::Le => act <= b + tol,
            Relation::Ge => act >= b - tol,
            Relation::Eq => (act - b).abs() <= tol,
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}
