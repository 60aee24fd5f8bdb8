//! Bounded-variable two-phase revised simplex.
//!
//! Each row `i` gets a logical variable `s_i` so that the system reads
//! `A z + s = b`; the logical bounds encode the row sense (`≤`: `s ≥ 0`,
//! `≥`: `s ≤ 0`, `=`: `s = 0`). Rows whose logical cannot absorb the initial
//! residual receive an artificial column that phase one drives to zero.
//!
//! The basis inverse is kept explicitly (dense, column-major) and updated with
//! one elementary transformation per pivot. Reduced costs are updated from the
//! pivot row and recomputed from scratch at a fixed cadence, as are the basic
//! values. A stall at a degenerate vertex is broken by shifting the bounds of
//! the basic variables outward by small random amounts; when the phase ends
//! the bounds are restored and dual simplex pivots remove the leftover
//! infeasibility. The inverse is rebuilt from the basis columns when a pivot element
//! disagrees with its row-wise recomputation or when the recomputed basic
//! values leave a residual. The constraint matrix is held column-wise with
//! zeros dropped.

use super::{LinearProgram, LpError, LpSolution, LpStatus, PivotRule, Relation, SolverOptions};
use crate::rng::SplitMix64;

/// Pivot candidates with `|alpha| <=` this are ignored in the ratio test.
const PIVOT_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: usize = 100;
/// While stalled, blocking rows whose pivot is below this fraction of the
/// largest blocking pivot are passed over.
const STALL_PIVOT_FRACTION: f64 = 0.01;
/// Consecutive degenerate pivots after which the textbook Bland ratio test
/// takes over, restoring its finite-termination guarantee.
const STRICT_BLAND_TRIGGER: usize = 50_000;
/// Relative size of the random outward shift applied to the bounds of basic
/// variables when the simplex stalls.
const PERTURB_SCALE: f64 = 1e-6;
/// Perturbation rounds per phase before falling back to Bland's rule.
const MAX_PERTURB_ROUNDS: usize = 3;
/// Iterations between full recomputations of primal values and reduced costs.
const REFRESH_EVERY: usize = 64;
/// Relative disagreement between the two computations of a pivot element
/// that triggers a rebuild of the basis inverse.
const PIVOT_DRIFT_TOL: f64 = 1e-8;
/// Relative residual of `B x_B = b − N x_N` that triggers a rebuild.
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot { pos: usize, t: f64, to_upper: bool },
}

enum PhaseEnd {
    Optimal,
    Unbounded { entering: usize, dir: f64 },
}

/// A simplex engine bound to one constraint system.
///
/// The objective may be replaced between calls to [`SimplexSolver::solve`];
/// the next solve then starts from the previous basis, which stays primal
/// feasible because the constraints do not change.
pub struct SimplexSolver {
    m: usize,
    n: usize,
    ntot: usize,
    first_artificial: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    active_cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    d: Vec<f64>,
    /// Devex reference weights, one per column.
    devex: Vec<f64>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    rho: Vec<f64>,
    /// Elementary updates applied to `binv` since it was last rebuilt.
    updates: usize,
    /// Breaks ties among blocking rows and draws bound shifts; fixed seed.
    rng: SplitMix64,
    /// Original bounds while a perturbation is active.
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    feasible_basis: bool,
    infeasible: Option<Vec<f64>>,
    opts: SolverOptions,
    max_iterations: usize,
    iterations: usize,
}

impl SimplexSolver {
    pub fn new(lp: &LinearProgram, opts: SolverOptions) -> Result<Self, LpError> {
        lp.validate()?;
        for tol in [opts.feas_tol, opts.opt_tol] {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(LpError::InvalidTolerance(tol));
            }
        }
        let m = lp.num_rows();
        let n = lp.num_vars();
        let dense = lp.matrix();

        let mut col_start = Vec::with_capacity(n + 2 * m + 1);
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        col_start.push(0);
        for j in 0..n {
            for i in 0..m {
                let v = dense[i * n + j];
                if v != 0.0 {
                    row_idx.push(i);
                    vals.push(v);
                }
            }
            col_start.push(row_idx.len());
        }
        for i in 0..m {
            row_idx.push(i);
            vals.push(1.0);
            col_start.push(row_idx.len());
        }

        let mut lower = lp.lower().to_vec();
        let mut upper = lp.upper().to_vec();
        for &rel in lp.relations() {
            let (l, u) = match rel {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
        }

        let mut x = vec![0.0; n + m];
        let mut state = vec![VarState::Lower; n + m];
        for j in 0..n {
            let (l, u) = (lower[j], upper[j]);
            if l.is_finite() {
                x[j] = l;
                state[j] = VarState::Lower;
            } else if u.is_finite() {
                x[j] = u;
                state[j] = VarState::Upper;
            } else {
                x[j] = 0.0;
                state[j] = VarState::Zero;
            }
        }

        // residual b - A z at the starting point
        let mut resid = lp.rhs().to_vec();
        for j in 0..n {
            if x[j] != 0.0 {
                for k in col_start[j]..col_start[j + 1] {
                    resid[row_idx[k]] -= vals[k] * x[j];
                }
            }
        }

        let mut basis = vec![0usize; m];
        let mut binv = vec![0.0; m * m];
        let mut art_signs = Vec::new();
        let tol = opts.feas_tol;
        for i in 0..m {
            let s = n + i;
            let r = resid[i];
            if r >= lower[s] - tol && r <= upper[s] + tol {
                x[s] = r;
                state[s] = VarState::Basic(i);
                basis[i] = s;
                binv[i * m + i] = 1.0;
            } else {
                // logical rests at its bound nearest zero; an artificial takes the rest
                let sv = if lower[s].is_finite() { lower[s] } else { upper[s] };
                x[s] = sv;
                state[s] = if lower[s].is_finite() { VarState::Lower } else { VarState::Upper };
                let gap = r - sv;
                let sign = if gap >= 0.0 { 1.0 } else { -1.0 };
                let a = n + m + art_signs.len();
                art_signs.push((i, sign, gap.abs()));
                basis[i] = a;
                binv[i * m + i] = sign;
            }
        }
        let first_artificial = n + m;
        for &(i, sign, value) in &art_signs {
            row_idx.push(i);
            vals.push(sign);
            col_start.push(row_idx.len());
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(value);
            state.push(VarState::Basic(i));
        }
        let ntot = first_artificial + art_signs.len();

        let mut cost = lp.objective().to_vec();
        cost.resize(ntot, 0.0);

        let max_iterations = opts.max_iterations.unwrap_or(50 * (m + n).max(1));
        Ok(Self {
            m,
            n,
            ntot,
            first_artificial,
            col_start,
            row_idx,
            vals,
            rhs: lp.rhs().to_vec(),
            lower,
            upper,
            active_cost: cost.clone(),
            cost,
            x,
            state,
            basis,
            binv,
            d: vec![0.0; ntot],
            devex: vec![1.0; ntot],
            y: vec![0.0; m],
            alpha: vec![0.0; m],
            rho: vec![0.0; m],
            updates: 0,
            rng: SplitMix64::new(0),
            saved_bounds: None,
            feasible_basis: art_signs.is_empty(),
            infeasible: None,
            opts,
            max_iterations,
            iterations: 0,
        })
    }

    /// Replaces the structural objective for the next solve.
    pub fn set_objective(&mut self, objective: &[f64]) -> Result<(), LpError> {
        if objective.len() != self.n {
            return Err(LpError::DimensionMismatch {
                what: "objective length",
                expected: self.n,
                got: objective.len(),
            });
        }
        if let Some(j) = objective.iter().position(|v| !v.is_finite()) {
            return Err(LpError::NonFinite { what: "objective coefficient", index: j });
        }
        self.cost[..self.n].copy_from_slice(objective);
        Ok(())
    }

    /// Total simplex iterations performed by this engine so far.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        let start_iterations = self.iterations;
        if let Some(farkas) = &self.infeasible {
            return Ok(self.infeasible_solution(farkas.clone(), 0));
        }
        if !self.feasible_basis {
            let mut phase_one = vec![0.0; self.ntot];
            for c in &mut phase_one[self.first_artificial..] {
                *c = 1.0;
            }
            self.active_cost = phase_one;
            self.run_phase(start_iterations)?;
            let bmax = self.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let infeas: f64 = (self.first_artificial..self.ntot).map(|a| self.x[a].max(0.0)).sum();
            if infeas > 10.0 * self.opts.feas_tol * (1.0 + bmax) {
                let farkas = self.y.clone();
                self.infeasible = Some(farkas.clone());
                return Ok(self.infeasible_solution(farkas, self.iterations - start_iterations));
            }
            for a in self.first_artificial..self.ntot {
                self.upper[a] = 0.0;
                if !matches!(self.state[a], VarState::Basic(_)) {
                    self.x[a] = 0.0;
                    self.state[a] = VarState::Lower;
                }
            }
            self.feasible_basis = true;
        }
        self.active_cost = self.cost.clone();
        let end = self.run_phase(start_iterations)?;
        let iterations = self.iterations - start_iterations;
        match end {
            PhaseEnd::Optimal => {
                let primal = self.x[..self.n].to_vec();
                let value = primal.iter().zip(&self.cost).map(|(z, c)| z * c).sum();
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    value,
                    primal,
                    dual: self.y.clone(),
                    reduced_costs: self.d[..self.n].to_vec(),
                    ray: None,
                    iterations,
                })
            }
            PhaseEnd::Unbounded { entering, dir } => {
                let mut ray = vec![0.0; self.n];
                if entering < self.n {
                    ray[entering] = dir;
                }
                self.ftran(entering);
                for (pos, &var) in self.basis.iter().enumerate() {
                    if var < self.n {
                        ray[var] = -dir * self.alpha[pos];
                    }
                }
                Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    value: f64::NEG_INFINITY,
                    primal: self.x[..self.n].to_vec(),
                    dual: self.y.clone(),
                    reduced_costs: self.d[..self.n].to_vec(),
                    ray: Some(ray),
                    iterations,
                })
            }
        }
    }

    fn infeasible_solution(&self, farkas: Vec<f64>, iterations: usize) -> LpSolution {
        LpSolution {
            status: LpStatus::Infeasible,
            value: f64::INFINITY,
            primal: self.x[..self.n].to_vec(),
            dual: farkas,
            reduced_costs: vec![0.0; self.n],
            ray: None,
            iterations,
        }
    }

    /// Runs the simplex loop on `active_cost`. On return the basic values,
    /// multipliers and reduced costs are freshly computed.
    fn run_phase(&mut self, start_iterations: usize) -> Result<PhaseEnd, LpError> {
        self.refresh_checked()?;
        self.devex.iter_mut().for_each(|w| *w = 1.0);
        let mut bland = self.opts.pivot_rule == PivotRule::Bland;
        let mut degenerate = 0usize;
        let mut since_refresh = 0usize;
        let mut rounds = 0usize;
        loop {
            let q = match self.select_entering(bland) {
                Some(q) => q,
                None => {
                    // confirm optimality against freshly computed values
                    self.refresh_checked()?;
                    since_refresh = 0;
                    match self.select_entering(bland) {
                        Some(q) => q,
                        None if self.saved_bounds.is_some() => {
                            self.restore_bounds()?;
                            self.dual_cleanup(start_iterations)?;
                            degenerate = 0;
                            continue;
                        }
                        None => return Ok(PhaseEnd::Optimal),
                    }
                }
            };
            if self.iterations - start_iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            let dir = if self.d[q] < 0.0 { 1.0 } else { -1.0 };
            self.ftran(q);
            let strict = self.opts.pivot_rule == PivotRule::Bland || degenerate >= STRICT_BLAND_TRIGGER;
            let t = match self.ratio_test(q, dir, bland, strict) {
                Step::Unbounded => {
                    self.restore_bounds()?;
                    return Ok(PhaseEnd::Unbounded { entering: q, dir });
                }
                Step::Flip(t) => {
                    self.apply_flip(q, dir, t);
                    t
                }
                Step::Pivot { pos, .. } if self.updates > 0 && !self.pivot_is_accurate(q, pos) => {
                    self.reinvert()?;
                    self.refresh();
                    since_refresh = 0;
                    continue;
                }
                Step::Pivot { pos, t, to_upper } => {
                    self.apply_pivot(q, dir, pos, t, to_upper);
                    t
                }
            };
            self.iterations += 1;
            since_refresh += 1;
            if t <= self.opts.feas_tol {
                degenerate += 1;
                if degenerate >= BLAND_TRIGGER && !bland {
                    let rule = self.opts.pivot_rule;
                    if rule != PivotRule::Bland && rounds < MAX_PERTURB_ROUNDS && self.perturb_basics() {
                        rounds += 1;
                        degenerate = 0;
                    } else {
                        bland = true;
                    }
                }
            } else {
                degenerate = 0;
                if self.opts.pivot_rule != PivotRule::Bland {
                    bland = false;
                }
            }
            if since_refresh >= REFRESH_EVERY {
                self.refresh_checked()?;
                since_refresh = 0;
            }
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn select_entering(&self, bland: bool) -> Option<usize> {
        let tol = self.opts.opt_tol;
        let devex = self.opts.pivot_rule == PivotRule::DevexBland;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ntot {
            let dj = self.d[j];
            let score = match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::Lower => -dj,
                VarState::Upper => dj,
                VarState::Zero => dj.abs(),
            };
            if score <= tol || self.is_fixed(j) {
                continue;
            }
            if bland {
                return Some(j);
            }
            let score = if devex { score * score / self.devex[j] } else { score };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.col_start[j], self.col_start[j + 1]);
        self.row_idx[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    /// `alpha = B⁻¹ a_q`.
    fn ftran(&mut self, q: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|v| *v = 0.0);
        let (a, b) = (self.col_start[q], self.col_start[q + 1]);
        for k in a..b {
            let (row, v) = (self.row_idx[k], self.vals[k]);
            let col = &self.binv[row * m..(row + 1) * m];
            for (dst, src) in self.alpha.iter_mut().zip(col) {
                *dst += v * src;
            }
        }
    }

    fn ratio_test(&mut self, q: usize, dir: f64, bland: bool, strict: bool) -> Step {
        let ftol = self.opts.feas_tol;
        let range = self.upper[q] - self.lower[q];
        if bland && strict {
            return self.bland_ratio_test(dir, range);
        }
        // Harris two-pass: bound the step with relaxed bounds, then pick the
        // largest pivot among rows blocking within that bound. While stalled,
        // a random row among the sizable ones is taken instead, which breaks
        // the deterministic cycles that degenerate vertices invite.
        let mut tmax = f64::INFINITY;
        for pos in 0..self.m {
            let a = self.alpha[pos];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let var = self.basis[pos];
            let delta = -dir * a;
            let t = if delta < 0.0 {
                (self.x[var] - self.lower[var] + ftol) / -delta
            } else {
                (self.upper[var] - self.x[var] + ftol) / delta
            };
            if t < tmax {
                tmax = t;
            }
        }
        if range.is_finite() && range <= tmax {
            return Step::Flip(range);
        }
        if tmax == f64::INFINITY {
            return Step::Unbounded;
        }
        let mut candidates = Vec::new();
        let mut amax = 0.0f64;
        for pos in 0..self.m {
            let a = self.alpha[pos];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let var = self.basis[pos];
            let delta = -dir * a;
            let (t, to_upper) = if delta < 0.0 {
                ((self.x[var] - self.lower[var]) / -delta, false)
            } else {
                ((self.upper[var] - self.x[var]) / delta, true)
            };
            if t <= tmax {
                amax = amax.max(a.abs());
                candidates.push((pos, t, to_upper, a.abs()));
            }
        }
        let best = if bland {
            candidates.retain(|c| c.3 >= STALL_PIVOT_FRACTION * amax);
            match candidates.len() {
                0 => None,
                n => Some(candidates[self.rng.below(n as u64) as usize]),
            }
        } else {
            candidates
                .into_iter()
                .filter(|c| c.3 >= amax)
                .min_by_key(|c| self.basis[c.0])
        };
        match best {
            Some((pos, t, to_upper, _)) => Step::Pivot {
                pos,
                t: t.max(0.0),
                to_upper,
            },
            None => Step::Unbounded,
        }
    }

    /// Textbook ratio test: minimum exact ratio, ties to the smallest basic
    /// index.
    fn bland_ratio_test(&self, dir: f64, range: f64) -> Step {
        let mut best: Option<(usize, f64, bool)> = None;
        for pos in 0..self.m {
            let a = self.alpha[pos];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let var = self.basis[pos];
            let delta = -dir * a;
            let (ratio, to_upper) = if delta < 0.0 {
                if !self.lower[var].is_finite() {
                    continue;
                }
                ((self.x[var] - self.lower[var]) / -delta, false)
            } else {
                if !self.upper[var].is_finite() {
                    continue;
                }
                ((self.upper[var] - self.x[var]) / delta, true)
            };
            let ratio = ratio.max(0.0);
            let better = match best {
                None => true,
                Some((bpos, br, _)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && var < self.basis[bpos]),
            };
            if better {
                best = Some((pos, ratio, to_upper));
            }
        }
        match best {
            Some((_, ratio, _)) if range.is_finite() && range <= ratio => Step::Flip(range),
            Some((pos, t, to_upper)) => Step::Pivot { pos, t, to_upper },
            None if range.is_finite() => Step::Flip(range),
            None => Step::Unbounded,
        }
    }

    fn move_basics(&mut self, dir: f64, t: f64) {
        if t == 0.0 {
            return;
        }
        for pos in 0..self.m {
            let a = self.alpha[pos];
            if a != 0.0 {
                self.x[self.basis[pos]] -= dir * t * a;
            }
        }
    }

    fn apply_flip(&mut self, q: usize, dir: f64, t: f64) {
        self.move_basics(dir, t);
        if dir > 0.0 {
            self.x[q] = self.upper[q];
            self.state[q] = VarState::Upper;
        } else {
            self.x[q] = self.lower[q];
            self.state[q] = VarState::Lower;
        }
    }

    fn apply_pivot(&mut self, q: usize, dir: f64, r: usize, t: f64, to_upper: bool) {
        let m = self.m;
        self.move_basics(dir, t);
        self.x[q] += dir * t;
        let leaving = self.basis[r];
        if to_upper {
            self.x[leaving] = self.upper[leaving];
            self.state[leaving] = VarState::Upper;
        } else {
            self.x[leaving] = self.lower[leaving];
            self.state[leaving] = VarState::Lower;
        }

        for k in 0..m {
            self.rho[k] = self.binv[k * m + r];
        }
        let alpha_r = self.alpha[r];
        let theta = self.d[q] / alpha_r;
        let devex = self.opts.pivot_rule == PivotRule::DevexBland;
        let wq = self.devex[q];
        if theta != 0.0 || devex {
            for j in 0..self.ntot {
                if matches!(self.state[j], VarState::Basic(_)) || j == q {
                    continue;
                }
                let (a, b) = (self.col_start[j], self.col_start[j + 1]);
                let mut arj = 0.0;
                for k in a..b {
                    arj += self.rho[self.row_idx[k]] * self.vals[k];
                }
                if arj != 0.0 {
                    self.d[j] -= theta * arj;
                    if devex {
                        let ratio = arj / alpha_r;
                        self.devex[j] = self.devex[j].max(ratio * ratio * wq);
                    }
                }
            }
        }
        if devex {
            self.devex[leaving] = (wq / (alpha_r * alpha_r)).max(1.0);
        }
        self.d[leaving] = -theta;
        self.d[q] = 0.0;

        let nz: Vec<usize> = (0..m).filter(|&i| self.alpha[i] != 0.0 && i != r).collect();
        let sparse = nz.len() * 3 < m;
        for k in 0..m {
            let rk = self.rho[k];
            if rk == 0.0 {
                continue;
            }
            let f = rk / alpha_r;
            let col = &mut self.binv[k * m..(k + 1) * m];
            if sparse {
                for &i in &nz {
                    col[i] -= f * self.alpha[i];
                }
            } else {
                for (c, a) in col.iter_mut().zip(&self.alpha) {
                    *c -= f * a;
                }
            }
            col[r] = f;
        }

        self.basis[r] = q;
        self.state[q] = VarState::Basic(r);
        self.updates += 1;
    }

    /// Shifts the finite bounds of every basic variable not yet shifted
    /// outward by a random relative amount. Returns whether anything moved.
    fn perturb_basics(&mut self) -> bool {
        let (lo, up) = self
            .saved_bounds
            .get_or_insert_with(|| (self.lower.clone(), self.upper.clone()))
            .clone();
        let mut moved = false;
        for pos in 0..self.m {
            let j = self.basis[pos];
            if self.lower[j] != lo[j] || self.upper[j] != up[j] {
                continue;
            }
            if self.lower[j].is_finite() {
                self.lower[j] -= PERTURB_SCALE * (1.0 + self.lower[j].abs()) * (1.0 + self.rng.next_f64());
                moved = true;
            }
            if self.upper[j].is_finite() {
                self.upper[j] += PERTURB_SCALE * (1.0 + self.upper[j].abs()) * (1.0 + self.rng.next_f64());
                moved = true;
            }
        }
        moved
    }

    /// Puts the original bounds back, moves nonbasic variables onto them and
    /// recomputes the basic values, which may now violate their bounds.
    fn restore_bounds(&mut self) -> Result<(), LpError> {
        if let Some((lo, up)) = self.saved_bounds.take() {
            self.lower = lo;
            self.upper = up;
            for j in 0..self.ntot {
                match self.state[j] {
                    VarState::Lower => self.x[j] = self.lower[j],
                    VarState::Upper => self.x[j] = self.upper[j],
                    VarState::Basic(_) | VarState::Zero => {}
                }
            }
        }
        self.refresh_checked()
    }

    /// Dual simplex pivots from a dual feasible basis until every basic
    /// variable is within its bounds.
    fn dual_cleanup(&mut self, start_iterations: usize) -> Result<(), LpError> {
        let m = self.m;
        let (ftol, otol) = (self.opts.feas_tol, self.opts.opt_tol);
        let mut since_refresh = 0usize;
        loop {
            let mut leave: Option<(usize, f64)> = None;
            for (pos, &j) in self.basis.iter().enumerate() {
                let v = (self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j]);
                if v > ftol && leave.is_none_or(|(_, w)| v > w) {
                    leave = Some((pos, v));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(());
            };
            if self.iterations - start_iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            let var = self.basis[r];
            let to_upper = self.x[var] > self.upper[var];
            // x_r must rise when below its lower bound and fall when above
            let sense = if to_upper { -1.0 } else { 1.0 };
            for k in 0..m {
                self.rho[k] = self.binv[k * m + r];
            }
            let mut candidates = Vec::new();
            let mut bound = f64::INFINITY;
            for j in 0..self.ntot {
                if matches!(self.state[j], VarState::Basic(_)) || self.is_fixed(j) {
                    continue;
                }
                let arj: f64 = self.column(j).map(|(row, v)| self.rho[row] * v).sum();
                if arj.abs() <= PIVOT_TOL {
                    continue;
                }
                // x_r moves by −arj·Δ_j; Δ_j must push it the right way
                let step_sign = -arj.signum() * sense;
                let slack = match self.state[j] {
                    VarState::Lower if step_sign > 0.0 => self.d[j],
                    VarState::Upper if step_sign < 0.0 => -self.d[j],
                    VarState::Zero => self.d[j].abs(),
                    _ => continue,
                };
                let slack = slack.max(0.0);
                bound = bound.min((slack + otol) / arj.abs());
                candidates.push((j, slack / arj.abs(), arj.abs(), step_sign));
            }
            let Some(&(q, _, _, step_sign)) = candidates
                .iter()
                .filter(|c| c.1 <= bound)
                .max_by(|a, b| a.2.total_cmp(&b.2))
            else {
                return Err(LpError::Cleanup);
            };
            self.ftran(q);
            let alpha_r = self.alpha[r];
            let target = if to_upper { self.upper[var] } else { self.lower[var] };
            let delta = (self.x[var] - target) / alpha_r;
            if delta.signum() != step_sign {
                // row and column disagree on the sign: rebuild and retry
                if self.updates == 0 {
                    return Err(LpError::SingularBasis);
                }
                self.reinvert()?;
                self.refresh();
                since_refresh = 0;
                continue;
            }
            let (dir, t) = (delta.signum(), delta.abs());
            let range = self.upper[q] - self.lower[q];
            if range.is_finite() && t > range {
                self.apply_flip(q, dir, range);
            } else {
                self.apply_pivot(q, dir, r, t, to_upper);
            }
            self.iterations += 1;
            since_refresh += 1;
            if since_refresh >= REFRESH_EVERY {
                self.refresh_checked()?;
                since_refresh = 0;
            }
        }
    }

    /// Compares `alpha[r]` from the column-wise product with row `r` of the
    /// inverse applied to `a_q`; a mismatch means the inverse has drifted.
    fn pivot_is_accurate(&self, q: usize, r: usize) -> bool {
        let m = self.m;
        let row_wise: f64 = self.column(q).map(|(row, v)| v * self.binv[row * m + r]).sum();
        let a = self.alpha[r];
        (row_wise - a).abs() <= PIVOT_DRIFT_TOL * (1.0 + a.abs())
    }

    /// Refreshes, then rebuilds the inverse if the basic values fail to
    /// reproduce the right-hand side.
    fn refresh_checked(&mut self) -> Result<(), LpError> {
        if self.refresh() > RESIDUAL_TOL && self.updates > 0 {
            self.reinvert()?;
            self.refresh();
        }
        Ok(())
    }

    /// Rebuilds the inverse from the current basis columns.
    ///
    /// Logical and artificial columns are signed unit vectors, so after
    /// ordering the basis reads `[[D, C], [0, M]]` with `D` diagonal. Only the
    /// structural block `M` is inverted densely (Gauss-Jordan with partial
    /// pivoting); the remaining entries follow by substitution.
    fn reinvert(&mut self) -> Result<(), LpError> {
        let m = self.m;
        // unit columns: basis position and sign per covered row
        let mut unit_at_row: Vec<Option<(usize, f64)>> = vec![None; m];
        let mut structural = Vec::new();
        for (pos, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                structural.push(pos);
                continue;
            }
            let (row, sign) = self.column(var).next().ok_or(LpError::SingularBasis)?;
            if unit_at_row[row].is_some() {
                return Err(LpError::SingularBasis);
            }
            unit_at_row[row] = Some((pos, sign));
        }
        let free_rows: Vec<usize> = (0..m).filter(|&i| unit_at_row[i].is_none()).collect();
        let k = structural.len();
        if free_rows.len() != k {
            return Err(LpError::SingularBasis);
        }
        let mut local_row = vec![usize::MAX; m];
        for (a, &row) in free_rows.iter().enumerate() {
            local_row[row] = a;
        }

        // [M | I] row-major, reduced to [I | M⁻¹]
        let w = 2 * k;
        let mut aug = vec![0.0; k * w];
        let mut scale = 0.0f64;
        for (b, &pos) in structural.iter().enumerate() {
            for (row, v) in self.column(self.basis[pos]) {
                let a = local_row[row];
                if a != usize::MAX {
                    aug[a * w + b] = v;
                    scale = scale.max(v.abs());
                }
            }
        }
        for a in 0..k {
            aug[a * w + k + a] = 1.0;
        }
        for c in 0..k {
            let p = (c..k)
                .max_by(|&i, &j| aug[i * w + c].abs().total_cmp(&aug[j * w + c].abs()))
                .unwrap_or(c);
            let piv = aug[p * w + c];
            if piv.abs() <= 1e-12 * scale.max(1.0) {
                return Err(LpError::SingularBasis);
            }
            if p != c {
                for t in 0..w {
                    aug.swap(p * w + t, c * w + t);
                }
            }
            let inv = 1.0 / piv;
            for t in c..w {
                aug[c * w + t] *= inv;
            }
            let (head, tail) = aug.split_at_mut(c * w);
            let (prow, rest) = tail.split_at_mut(w);
            for row in head.chunks_exact_mut(w).chain(rest.chunks_exact_mut(w)) {
                let f = row[c];
                if f == 0.0 {
                    continue;
                }
                for t in c..w {
                    if prow[t] != 0.0 {
                        row[t] -= f * prow[t];
                    }
                }
            }
        }

        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for (row, entry) in unit_at_row.iter().enumerate() {
            if let Some((pos, sign)) = *entry {
                self.binv[row * m + pos] = 1.0 / sign;
            }
        }
        let mut z = vec![0.0; k];
        for (a, &row) in free_rows.iter().enumerate() {
            for (b, zb) in z.iter_mut().enumerate() {
                *zb = aug[b * w + k + a];
            }
            let col = &mut self.binv[row * m..(row + 1) * m];
            for (b, &pos) in structural.iter().enumerate() {
                col[pos] = z[b];
            }
            // unit rows: sign·z_p + Σ_S A[r_p][q]·z_q = 0
            for (b, &pos) in structural.iter().enumerate() {
                let zq = z[b];
                if zq == 0.0 {
                    continue;
                }
                let (s0, s1) = (self.col_start[self.basis[pos]], self.col_start[self.basis[pos] + 1]);
                for t in s0..s1 {
                    if let Some((p, sign)) = unit_at_row[self.row_idx[t]] {
                        col[p] -= self.vals[t] * zq / sign;
                    }
                }
            }
        }
        self.updates = 0;
        Ok(())
    }

    /// Recomputes basic values, simplex multipliers, and reduced costs from
    /// the current basis inverse. Returns the relative residual of the basic
    /// system, `‖B x_B − (b − N x_N)‖∞ / (1 + ‖b − N x_N‖∞)`.
    fn refresh(&mut self) -> f64 {
        let m = self.m;
        let mut resid = self.rhs.clone();
        for j in 0..self.ntot {
            if matches!(self.state[j], VarState::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for (row, v) in self.column(j) {
                resid[row] -= v * xj;
            }
        }
        let mut xb = vec![0.0; m];
        for k in 0..m {
            let rk = resid[k];
            if rk == 0.0 {
                continue;
            }
            let col = &self.binv[k * m..(k + 1) * m];
            for (dst, src) in xb.iter_mut().zip(col) {
                *dst += rk * src;
            }
        }
        for (pos, &var) in self.basis.iter().enumerate() {
            self.x[var] = xb[pos];
        }
        let scale = 1.0 + resid.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for (pos, &var) in self.basis.iter().enumerate() {
            for (row, v) in self.column(var) {
                resid[row] -= v * xb[pos];
            }
        }
        let residual = resid.iter().fold(0.0f64, |a, b| a.max(b.abs())) / scale;

        let cb: Vec<f64> = self.basis.iter().map(|&v| self.active_cost[v]).collect();
        for k in 0..m {
            let col = &self.binv[k * m..(k + 1) * m];
            self.y[k] = cb.iter().zip(col).map(|(c, b)| c * b).sum();
        }
        for j in 0..self.ntot {
            if matches!(self.state[j], VarState::Basic(_)) {
                self.d[j] = 0.0;
                continue;
            }
            let mut dj = self.active_cost[j];
            for (row, v) in self.column(j) {
                dj -= self.y[row] * v;
            }
            self.d[j] = dj;
        }
        residual
    }
}
