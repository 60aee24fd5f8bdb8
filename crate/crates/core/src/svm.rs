//! Distributionally robust linear SVM with hinge loss under the ground metric
//! `‖I − I'‖∞ + κ·1{Y ≠ Y'}`.
//!
//! Two LPs are provided. [`build_shared_lp`] is the robust SVM program with
//! objective `βελ₀ + (1/n)Σλᵢ`, free weights `x`, multipliers `λ ≥ 0` and
//! norm slacks `s ≥ 0`:
//!
//! ```text
//! 1 − Yᵢ⟨x, Iᵢ⟩        ≤ λᵢ     i = 1..n
//! 1 + Yᵢ⟨x, Iᵢ⟩ − κλ₀  ≤ λᵢ     i = 1..n
//! Σⱼ sⱼ                ≤ λ₀
//! xⱼ ≤ sⱼ,  −xⱼ ≤ sⱼ            j = 1..l
//! ```
//!
//! [`build_exact_epigraph_lp`] minimizes the blended objective
//! `β(ελ₀ + (1/n)Σwᵢ) + ((1−β)/n)Σeᵢ` where `wᵢ` bounds the worst-case term
//! (the same two rows as above plus `wᵢ ≥ 0`) and `eᵢ ≥ 1 − Yᵢ⟨x, Iᵢ⟩` bounds
//! the empirical hinge. Both LPs agree at `β ∈ {0, 1}`.
//!
//! [`SvmTrainer`] solves the same programs in a smaller equivalent form
//! (`x = u − v` with `u, v ≥ 0`, which removes `s` and the `2l` norm rows,
//! and all-zero feature columns fixed at `x_j = 0`), keeping the simplex basis
//! between solves so that sweeps over `(β, ε)` start warm. The constraint
//! matrix depends on `κ` only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{Label, SamplePoint};
use crate::lp::{LinearProgram, LpError, LpSolution, LpStatus, PivotRule, Relation, SimplexSolver, SolverOptions};

/// Largest dense LP (rows × columns) the builders will create.
pub const MAX_LP_ENTRIES: usize = 40_000_000;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("sample point has no label")]
    MissingLabel,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("LP of {rows}×{cols} exceeds the dense size limit of {MAX_LP_ENTRIES} entries")]
    TooLarge { rows: usize, cols: usize },
    #[error("training LP ended with status {status:?} after {iterations} iterations")]
    NotOptimal { status: LpStatus, iterations: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// `max{1 − Y⟨x, I⟩, 0}`.
pub fn hinge_loss(x: &[f64], xi: &SamplePoint) -> Result<f64, SvmError> {
    let y = xi.label.ok_or(SvmError::MissingLabel)?.sign();
    if x.len() != xi.dim() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            got: xi.dim(),
        });
    }
    Ok((1.0 - y * dot(x, &xi.coords)).max(0.0))
}

/// `‖Iᵢ − Iⱼ‖∞ + κ·1{Yᵢ ≠ Yⱼ}`.
pub fn svm_metric(a: &SamplePoint, b: &SamplePoint, kappa: f64) -> Result<f64, SvmError> {
    if a.dim() != b.dim() {
        return Err(SvmError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let inf = a.coords.iter().zip(&b.coords).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let flip = if a.label != b.label { kappa } else { 0.0 };
    Ok(inf + flip)
}

/// Closed-form `sup_ξ {h(x, ξ) − λ₀ d(ξ, ξᵢ)}` for the hinge loss and the SVM
/// metric over an unbounded feature space: `max(1 − Y⟨x,I⟩, 1 + Y⟨x,I⟩ − κλ₀, 0)`
/// when `λ₀ ≥ ‖x‖₁`, and `+∞` otherwise.
pub fn hinge_inner_max(x: &[f64], xi: &SamplePoint, lambda0: f64, kappa: f64) -> Result<f64, SvmError> {
    let y = xi.label.ok_or(SvmError::MissingLabel)?.sign();
    if x.len() != xi.dim() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            got: xi.dim(),
        });
    }
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if lambda0 < l1 {
        return Ok(f64::INFINITY);
    }
    let m = y * dot(x, &xi.coords);
    Ok((1.0 - m).max(1.0 + m - kappa * lambda0).max(0.0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Training data and hyperparameters. Features are row-major `n × l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmInstance {
    features: Vec<f64>,
    labels: Vec<Label>,
    l: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub kappa: f64,
}

impl SvmInstance {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<Label>,
        l: usize,
        beta: f64,
        epsilon: f64,
        kappa: f64,
    ) -> Result<Self, SvmError> {
        if labels.is_empty() || l == 0 {
            return Err(SvmError::Invalid("need n ≥ 1 samples and l ≥ 1 features".into()));
        }
        if features.len() != labels.len() * l {
            return Err(SvmError::DimensionMismatch {
                expected: labels.len() * l,
                got: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::Invalid("non-finite feature".into()));
        }
        let inst = Self {
            features,
            labels,
            l,
            beta,
            epsilon,
            kappa,
        };
        inst.check_params()?;
        Ok(inst)
    }

    /// Builds an instance from labeled sample points.
    pub fn from_points(points: &[SamplePoint], beta: f64, epsilon: f64, kappa: f64) -> Result<Self, SvmError> {
        let l = points.first().map_or(0, SamplePoint::dim);
        let mut features = Vec::with_capacity(points.len() * l);
        let mut labels = Vec::with_capacity(points.len());
        for p in points {
            if p.dim() != l {
                return Err(SvmError::DimensionMismatch { expected: l, got: p.dim() });
            }
            features.extend_from_slice(&p.coords);
            labels.push(p.label.ok_or(SvmError::MissingLabel)?);
        }
        Self::new(features, labels, l, beta, epsilon, kappa)
    }

    fn check_params(&self) -> Result<(), SvmError> {
        check_params(self.beta, self.epsilon, self.kappa)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.l..(i + 1) * self.l]
    }

    pub fn point(&self, i: usize) -> SamplePoint {
        SamplePoint::labeled(self.row(i).to_vec(), self.labels[i])
    }

    pub fn points(&self) -> Vec<SamplePoint> {
        (0..self.n()).map(|i| self.point(i)).collect()
    }

    /// `v_b(x) = β·dro(x) + ((1−β)/n)Σ hinge(x, ξᵢ)` with the worst-case part
    /// from [`SvmInstance::dro_objective`].
    pub fn blended_objective(&self, x: &[f64]) -> Result<f64, SvmError> {
        let n = self.n() as f64;
        let saa: f64 = (0..self.n())
            .map(|i| hinge_loss(x, &self.point(i)))
            .sum::<Result<f64, _>>()?
            / n;
        if self.beta == 0.0 {
            return Ok(saa);
        }
        let dro = self.dro_objective(x)?;
        Ok(self.beta * dro + (1.0 - self.beta) * saa)
    }

    /// `min_{λ₀ ≥ ‖x‖₁} ελ₀ + (1/n)Σ inner_max(λ₀)`. The function of λ₀ is
    /// convex piecewise linear; its breakpoints are `‖x‖₁` and the points
    /// where a flip term `1 + mᵢ − κλ₀` crosses `max(1 − mᵢ, 0)`, so the
    /// minimum is attained at one of them.
    pub fn dro_objective(&self, x: &[f64]) -> Result<f64, SvmError> {
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let mut candidates = vec![l1];
        if self.kappa > 0.0 {
            for i in 0..self.n() {
                let m = self.labels[i].sign() * dot(x, self.row(i));
                let base = (1.0 - m).max(0.0);
                let bp = (1.0 + m - base) / self.kappa;
                if bp > l1 {
                    candidates.push(bp);
                }
            }
        }
        let n = self.n() as f64;
        let mut best = f64::INFINITY;
        for lam in candidates {
            let mut s = 0.0;
            for i in 0..self.n() {
                s += hinge_inner_max(x, &self.point(i), lam, self.kappa)?;
            }
            best = best.min(self.epsilon * lam + s / n);
        }
        Ok(best)
    }
}

fn check_params(beta: f64, epsilon: f64, kappa: f64) -> Result<(), SvmError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(SvmError::Invalid(format!("beta {beta} not in [0, 1]")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(SvmError::Invalid(format!("epsilon {epsilon} must be finite and ≥ 0")));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(SvmError::Invalid(format!("kappa {kappa} must be finite and ≥ 0")));
    }
    Ok(())
}

fn guard(rows: usize, cols: usize) -> Result<(), SvmError> {
    if rows.saturating_mul(cols) > MAX_LP_ENTRIES {
        return Err(SvmError::TooLarge { rows, cols });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    #[serde(rename = "shared")]
    Shared,
    #[serde(rename = "exact")]
    ExactEpigraph,
}

/// Variable layout of [`build_shared_lp`]: `x` at `0..l`, `λ₀` at `l`,
/// `λᵢ` at `l + i`, `s` at `l + n + 1..`.
pub fn build_shared_lp(inst: &SvmInstance) -> Result<LinearProgram, SvmError> {
    let (n, l) = (inst.n(), inst.l());
    let nv = 2 * l + n + 1;
    guard(2 * n + 1 + 2 * l, nv)?;
    let lam0 = l;
    let s0 = l + n + 1;
    let mut c = vec![0.0; nv];
    c[lam0] = inst.beta * inst.epsilon;
    for ci in &mut c[l + 1..=l + n] {
        *ci = 1.0 / n as f64;
    }
    let mut lp = LinearProgram::new(c);
    for j in 0..l {
        lp.set_free(j)?;
    }
    for i in 0..n {
        let y = inst.labels[i].sign();
        let row = inst.row(i);
        let mut hinge: Vec<(usize, f64)> = Vec::with_capacity(l + 1);
        let mut flip: Vec<(usize, f64)> = Vec::with_capacity(l + 2);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                hinge.push((j, -y * v));
                flip.push((j, y * v));
            }
        }
        hinge.push((lam0 + 1 + i, -1.0));
        flip.push((lam0 + 1 + i, -1.0));
        flip.push((lam0, -inst.kappa));
        lp.add_sparse_row(&hinge, Relation::Le, -1.0)?;
        lp.add_sparse_row(&flip, Relation::Le, -1.0)?;
    }
    let mut norm: Vec<(usize, f64)> = (0..l).map(|j| (s0 + j, 1.0)).collect();
    norm.push((lam0, -1.0));
    lp.add_sparse_row(&norm, Relation::Le, 0.0)?;
    for j in 0..l {
        lp.add_sparse_row(&[(j, 1.0), (s0 + j, -1.0)], Relation::Le, 0.0)?;
        lp.add_sparse_row(&[(j, -1.0), (s0 + j, -1.0)], Relation::Le, 0.0)?;
    }
    Ok(lp)
}

/// Variable layout of [`build_exact_epigraph_lp`]: `x` at `0..l`, `λ₀` at
/// `l`, `wᵢ` at `l + 1 + i`, `eᵢ` at `l + 1 + n + i`, `s` at `l + 1 + 2n..`.
pub fn build_exact_epigraph_lp(inst: &SvmInstance) -> Result<LinearProgram, SvmError> {
    let (n, l) = (inst.n(), inst.l());
    let nv = 2 * l + 2 * n + 1;
    guard(3 * n + 1 + 2 * l, nv)?;
    let lam0 = l;
    let w0 = l + 1;
    let e0 = l + 1 + n;
    let s0 = l + 1 + 2 * n;
    let b = inst.beta;
    let mut c = vec![0.0; nv];
    c[lam0] = b * inst.epsilon;
    for i in 0..n {
        c[w0 + i] = b / n as f64;
        c[e0 + i] = (1.0 - b) / n as f64;
    }
    let mut lp = LinearProgram::new(c);
    for j in 0..l {
        lp.set_free(j)?;
    }
    for i in 0..n {
        let y = inst.labels[i].sign();
        let mut hinge: Vec<(usize, f64)> = Vec::with_capacity(l + 1);
        let mut flip: Vec<(usize, f64)> = Vec::with_capacity(l + 2);
        for (j, &v) in inst.row(i).iter().enumerate() {
            if v != 0.0 {
                hinge.push((j, -y * v));
                flip.push((j, y * v));
            }
        }
        let mut emp = hinge.clone();
        hinge.push((w0 + i, -1.0));
        flip.push((w0 + i, -1.0));
        flip.push((lam0, -inst.kappa));
        emp.push((e0 + i, -1.0));
        lp.add_sparse_row(&hinge, Relation::Le, -1.0)?;
        lp.add_sparse_row(&flip, Relation::Le, -1.0)?;
        lp.add_sparse_row(&emp, Relation::Le, -1.0)?;
    }
    let mut norm: Vec<(usize, f64)> = (0..l).map(|j| (s0 + j, 1.0)).collect();
    norm.push((lam0, -1.0));
    lp.add_sparse_row(&norm, Relation::Le, 0.0)?;
    for j in 0..l {
        lp.add_sparse_row(&[(j, 1.0), (s0 + j, -1.0)], Relation::Le, 0.0)?;
        lp.add_sparse_row(&[(j, -1.0), (s0 + j, -1.0)], Relation::Le, 0.0)?;
    }
    Ok(lp)
}

/// A trained linear classifier and the LP quantities it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub lambda0: f64,
    /// Per-sample multipliers: `λᵢ` for eq. 20, the worst-case epigraph
    /// values `wᵢ` for the exact form.
    #[serde(skip)]
    pub lambdas: Vec<f64>,
    pub objective: f64,
    pub formulation: Formulation,
    pub beta: f64,
    pub epsilon: f64,
    pub kappa: f64,
}

impl SvmModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Solves a fixed SVM constraint system for varying `(β, ε)`, reusing the
/// simplex basis between solves.
pub struct SvmTrainer {
    formulation: Formulation,
    n: usize,
    l: usize,
    kappa: f64,
    /// Original feature index of each kept (not identically zero) column.
    kept: Vec<usize>,
    solver: SimplexSolver,
    last_iterations: usize,
}

impl SvmTrainer {
    /// Compact layout: `u` at `0..k`, `v` at `k..2k`, `λ₀` at `2k`, then
    /// `λᵢ` (eq. 20) or `wᵢ` followed by `eᵢ` (exact), where `k` is the
    /// number of kept feature columns.
    pub fn new(features: &[f64], labels: &[Label], l: usize, kappa: f64, formulation: Formulation) -> Result<Self, SvmError> {
        let n = labels.len();
        if n == 0 || l == 0 || features.len() != n * l {
            return Err(SvmError::DimensionMismatch {
                expected: n * l,
                got: features.len(),
            });
        }
        check_params(0.0, 0.0, kappa)?;
        let kept: Vec<usize> = (0..l).filter(|&j| (0..n).any(|i| features[i * l + j] != 0.0)).collect();
        let k = kept.len();
        let extra = match formulation {
            Formulation::Shared => n,
            Formulation::ExactEpigraph => 2 * n,
        };
        let nv = 2 * k + 1 + extra;
        let rows = match formulation {
            Formulation::Shared => 2 * n + 1,
            Formulation::ExactEpigraph => 3 * n + 1,
        };
        guard(rows, nv)?;
        let lam0 = 2 * k;
        let mut lp = LinearProgram::new(vec![0.0; nv]);
        for i in 0..n {
            let y = labels[i].sign();
            let mut margin: Vec<(usize, f64)> = Vec::with_capacity(2 * k + 2);
            for (jj, &j) in kept.iter().enumerate() {
                let v = features[i * l + j];
                if v != 0.0 {
                    margin.push((jj, y * v));
                    margin.push((k + jj, -y * v));
                }
            }
            let neg: Vec<(usize, f64)> = margin.iter().map(|&(j, v)| (j, -v)).collect();
            let w = lam0 + 1 + i;
            let mut hinge = neg.clone();
            hinge.push((w, -1.0));
            let mut flip = margin;
            flip.push((w, -1.0));
            flip.push((lam0, -kappa));
            lp.add_sparse_row(&hinge, Relation::Le, -1.0)?;
            lp.add_sparse_row(&flip, Relation::Le, -1.0)?;
            if formulation == Formulation::ExactEpigraph {
                let mut emp = neg;
                emp.push((lam0 + 1 + n + i, -1.0));
                lp.add_sparse_row(&emp, Relation::Le, -1.0)?;
            }
        }
        let mut norm: Vec<(usize, f64)> = (0..2 * k).map(|j| (j, 1.0)).collect();
        norm.push((lam0, -1.0));
        lp.add_sparse_row(&norm, Relation::Le, 0.0)?;
        let opts = SolverOptions {
            pivot_rule: PivotRule::DevexBland,
            ..SolverOptions::default()
        };
        let solver = SimplexSolver::new(&lp, opts)?;
        Ok(Self {
            formulation,
            n,
            l,
            kappa,
            kept,
            solver,
            last_iterations: 0,
        })
    }

    pub fn for_instance(inst: &SvmInstance, formulation: Formulation) -> Result<Self, SvmError> {
        Self::new(&inst.features, &inst.labels, inst.l, inst.kappa, formulation)
    }

    /// Simplex iterations spent in the most recent [`SvmTrainer::train`].
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn train(&mut self, beta: f64, epsilon: f64) -> Result<SvmModel, SvmError> {
        check_params(beta, epsilon, self.kappa)?;
        let k = self.kept.len();
        let n = self.n;
        let lam0 = 2 * k;
        let mut c = vec![0.0; lam0 + 1];
        c[lam0] = beta * epsilon;
        match self.formulation {
            Formulation::Shared => c.extend(std::iter::repeat_n(1.0 / n as f64, n)),
            Formulation::ExactEpigraph => {
                c.extend(std::iter::repeat_n(beta / n as f64, n));
                c.extend(std::iter::repeat_n((1.0 - beta) / n as f64, n));
            }
        }
        self.solver.set_objective(&c)?;
        let sol: LpSolution = self.solver.solve()?;
        self.last_iterations = sol.iterations;
        if sol.status != LpStatus::Optimal {
            return Err(SvmError::NotOptimal {
                status: sol.status,
                iterations: sol.iterations,
            });
        }
        let z = &sol.primal;
        let mut weights = vec![0.0; self.l];
        for (jj, &j) in self.kept.iter().enumerate() {
            weights[j] = z[jj] - z[k + jj];
        }
        Ok(SvmModel {
            weights,
            lambda0: z[lam0],
            lambdas: z[lam0 + 1..lam0 + 1 + n].to_vec(),
            objective: sol.value,
            formulation: self.formulation,
            beta,
            epsilon,
            kappa: self.kappa,
        })
    }
}

/// Trains on one instance with a fresh solver.
pub fn train(inst: &SvmInstance, formulation: Formulation) -> Result<SvmModel, SvmError> {
    SvmTrainer::for_instance(inst, formulation)?.train(inst.beta, inst.epsilon)
}

/// `sign(⟨x, Iᵢ⟩)` per row of the row-major matrix; zero scores map to +1.
pub fn predict(model: &SvmModel, features: &[f64]) -> Result<Vec<Label>, SvmError> {
    let l = model.weights.len();
    if l == 0 || !features.len().is_multiple_of(l) {
        return Err(SvmError::DimensionMismatch {
            expected: l,
            got: features.len(),
        });
    }
    Ok(features
        .chunks_exact(l)
        .map(|row| if dot(&model.weights, row) >= 0.0 { Label::Pos } else { Label::Neg })
        .collect())
}

pub fn accuracy(predictions: &[Label], truth: &[Label]) -> Result<f64, SvmError> {
    if predictions.len() != truth.len() {
        return Err(SvmError::DimensionMismatch {
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(SvmError::Invalid("accuracy of an empty prediction set".into()));
    }
    let hits = predictions.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_lp;

    fn pt(c: &[f64], y: Label) -> SamplePoint {
        SamplePoint::labeled(c.to_vec(), y)
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge_loss(&[0.0, 0.0], &pt(&[2.0, 0.0], Label::Pos)).unwrap(), 1.0);
        assert_eq!(hinge_loss(&[1.0, 0.0], &pt(&[2.0, 0.0], Label::Pos)).unwrap(), 0.0);
        assert_eq!(hinge_loss(&[1.0, 0.0], &pt(&[2.0, 0.0], Label::Neg)).unwrap(), 3.0);
        assert!(matches!(
            hinge_loss(&[1.0], &SamplePoint::scalar(1.0)),
            Err(SvmError::MissingLabel)
        ));
    }

    #[test]
    fn metric_examples() {
        let a = pt(&[0.0, 1.0], Label::Pos);
        assert_eq!(svm_metric(&a, &a, 0.25).unwrap(), 0.0);
        assert_eq!(svm_metric(&a, &pt(&[0.0, 1.0], Label::Neg), 0.25).unwrap(), 0.25);
        let d = svm_metric(&a, &pt(&[0.5, 0.2], Label::Pos), 0.25).unwrap();
        assert!((d - 0.8).abs() < 1e-15);
    }

    #[test]
    fn shared_lp_shape() {
        let inst = SvmInstance::new(vec![0.5], vec![Label::Pos], 1, 0.5, 0.1, 0.25).unwrap();
        let lp = build_shared_lp(&inst).unwrap();
        assert_eq!((lp.num_vars(), lp.num_rows()), (4, 5));
    }

    #[test]
    fn separable_pair_has_zero_saa_objective() {
        let inst = SvmInstance::new(vec![1.0, -1.0], vec![Label::Pos, Label::Neg], 1, 0.0, 0.3, 0.25).unwrap();
        for f in [Formulation::Shared, Formulation::ExactEpigraph] {
            let m = train(&inst, f).unwrap();
            assert!(m.objective.abs() < 1e-12);
            let p = predict(&m, &[1.0, -1.0]).unwrap();
            assert_eq!(p, vec![Label::Pos, Label::Neg]);
        }
    }

    #[test]
    fn trainer_matches_verbatim_lp() {
        let feats = vec![0.2, 0.0, 0.9, 0.0, 0.4, 0.0, 0.1, 0.0, 0.7, 0.0];
        let labels = vec![Label::Pos, Label::Neg, Label::Pos, Label::Neg, Label::Neg];
        for (beta, eps) in [(0.0, 0.1), (1.0, 0.05), (0.3, 0.2)] {
            let inst = SvmInstance::new(feats.clone(), labels.clone(), 2, beta, eps, 0.25).unwrap();
            let a = solve_lp(&build_shared_lp(&inst).unwrap(), 1e-9).unwrap();
            let b = train(&inst, Formulation::Shared).unwrap();
            assert!((a.value - b.objective).abs() < 1e-9);
            let a = solve_lp(&build_exact_epigraph_lp(&inst).unwrap(), 1e-9).unwrap();
            let b = train(&inst, Formulation::ExactEpigraph).unwrap();
            assert!((a.value - b.objective).abs() < 1e-9);
        }
    }

    #[test]
    fn predict_and_accuracy() {
        let m = SvmModel {
            weights: vec![1.0, 0.0],
            lambda0: 1.0,
            lambdas: vec![],
            objective: 0.0,
            formulation: Formulation::Shared,
            beta: 0.0,
            epsilon: 0.0,
            kappa: 0.0,
        };
        assert_eq!(predict(&m, &[2.0, 0.0, -2.0, 0.0]).unwrap(), vec![Label::Pos, Label::Neg]);
        let zero = SvmModel {
            weights: vec![0.0, 0.0],
            ..m.clone()
        };
        assert_eq!(predict(&zero, &[2.0, 0.0, -2.0, 0.0]).unwrap(), vec![Label::Pos, Label::Pos]);
        let t = [Label::Pos, Label::Neg];
        assert_eq!(accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(accuracy(&[Label::Neg, Label::Pos], &t).unwrap(), 0.0);
        assert_eq!(accuracy(&[Label::Pos, Label::Pos], &t).unwrap(), 0.5);
        let json = m.to_json();
        assert!(json.contains("\"shared\""));
        assert_eq!(SvmModel::from_json(&json).unwrap().weights, m.weights);
    }
}
