//! Monte-Carlo harness on synthetic problems with a known true distribution:
//! generalization bounds, SAA/DRO bias and the unbiased blend weight,
//! consistency and asymptotic normality of the optimal value.
//!
//! The reference problem is 1-D mean estimation, `h(x, ξ) = (x − ξ)²` with a
//! discrete `P0`, for which `x0 = E ξ`, `v(x0) = Var ξ` and
//! `V_v = Var (x0 − ξ)²` are closed form. With the support hull `[lo, hi]` as
//! `Ξ`, `ξ ↦ (x − ξ)² − λ|ξ − ξᵢ|` is convex on each side of `ξᵢ`, so the
//! inner maximum is attained on `{lo, ξᵢ, hi}` and a grid of those points is
//! exact.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::bdr::{
    solve_bdr_scalar, BdrError, BdrProblem, InnerMode, InnerRepresentation, LossOracle, SolverConfig, SquaredLoss,
};
use crate::data::{synthetic_sampler, DataError, SyntheticSampler};
use crate::distributions::{DiscreteDistribution, DistributionError, SamplePoint};
use crate::numeric::{compensated_sum, mean_and_std_err};
use crate::rng::SplitMix64;
use crate::wasserstein::GroundMetric;

/// Bracket width for the 1-D minimization over `x`.
pub const X_TOL: f64 = 1e-10;
/// Largest fraction of failed replications an experiment tolerates.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("eta must lie in (0, 1), got {0}")]
    BadEta(f64),
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("n must be at least 1")]
    EmptySample,
    #[error("beta {0} not in [0, 1]")]
    BadBeta(f64),
    #[error("at least {min} replications needed, got {got}")]
    TooFewReps { min: usize, got: usize },
    #[error("{failed} of {reps} replications failed; first error: {first}")]
    TooManyFailures { failed: usize, reps: usize, first: String },
    #[error("no sign change: bias {bias0:.3e} ± {se0:.1e} at beta=0, {bias1:.3e} ± {se1:.1e} at beta=1")]
    NoSignChange { bias0: f64, se0: f64, bias1: f64, se1: f64 },
    #[error("V_v is zero; the standardized statistic is undefined")]
    DegenerateVariance,
    #[error("schedule parameter invalid: {0}")]
    BadSchedule(String),
    #[error(transparent)]
    Bdr(#[from] BdrError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A data-generating `P0` with a closed-form true optimum.
#[derive(Clone)]
pub struct SyntheticProblem {
    p0: DiscreteDistribution,
    pub loss: Arc<dyn LossOracle>,
    pub decision_dim: usize,
    /// `x0 = argmin v`.
    pub x0: f64,
    /// `v(x0)`.
    pub true_optimum: f64,
    /// Standard error of `true_optimum`; zero for closed forms.
    pub true_optimum_se: f64,
    /// `V_v = Var_{P0} h(x0, ξ)`.
    pub v_v: f64,
    /// Route for the worst-case expectation in each solve.
    pub inner_mode: InnerMode,
    lo: f64,
    hi: f64,
}

impl std::fmt::Debug for SyntheticProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SyntheticProblem")
            .field("p0", &self.p0)
            .field("x0", &self.x0)
            .field("true_optimum", &self.true_optimum)
            .field("v_v", &self.v_v)
            .finish()
    }
}

impl SyntheticProblem {
    /// Mean estimation under `P0 = Σ wₖ δ_{aₖ}`: `x0 = Σ wₖaₖ`,
    /// `v(x0) = Σ wₖ(aₖ − x0)²`, `V_v = Σ wₖ(aₖ − x0)⁴ − v(x0)²`.
    pub fn mean_estimation(atoms: &[f64], weights: &[f64]) -> Result<Self, StatsError> {
        let p0 = DiscreteDistribution::new(atoms.iter().map(|&a| SamplePoint::scalar(a)).collect(), weights.to_vec())?;
        let x0 = compensated_sum(atoms.iter().zip(weights).map(|(a, w)| a * w));
        let var = compensated_sum(atoms.iter().zip(weights).map(|(a, w)| w * (a - x0).powi(2)));
        let m4 = compensated_sum(atoms.iter().zip(weights).map(|(a, w)| w * (a - x0).powi(4)));
        let lo = atoms.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            p0,
            loss: Arc::new(SquaredLoss),
            decision_dim: 1,
            x0,
            true_optimum: var,
            true_optimum_se: 0.0,
            v_v: (m4 - var * var).max(0.0),
            inner_mode: InnerMode::DualSearch,
            lo,
            hi,
        })
    }

    /// `P0 = uniform{0, 1}`: `v(x0) = 1/4`, `V_v = 0`.
    pub fn two_atom() -> Self {
        Self::mean_estimation(&[0.0, 1.0], &[0.5, 0.5]).expect("valid distribution")
    }

    /// `P0 = uniform{0, 1/2, 1}`: `v(x0) = 1/6`, `V_v = 1/72`.
    pub fn three_atom() -> Self {
        let t = 1.0 / 3.0;
        Self::mean_estimation(&[0.0, 0.5, 1.0], &[t, t, t]).expect("valid distribution")
    }

    pub fn p0(&self) -> &DiscreteDistribution {
        &self.p0
    }

    /// Support hull of `P0`, used as `Ξ` and as the decision box.
    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn sampler(&self, seed: u64) -> Result<SyntheticSampler, StatsError> {
        Ok(synthetic_sampler(self.p0.atoms().to_vec(), self.p0.weights().to_vec(), seed)?)
    }

    /// The `n`-sample draw of replication `rep` under `seed`. Fixed `(seed,
    /// rep)` gives the same draw for every β and ε.
    pub fn draw(&self, n: usize, seed: u64, rep: usize) -> Result<Vec<SamplePoint>, StatsError> {
        Ok(self.sampler(SplitMix64::at(seed, rep as u64))?.sample(n))
    }

    /// Candidate grid `{lo, hi} ∪ samples`.
    pub fn grid(&self, samples: &[SamplePoint]) -> Vec<SamplePoint> {
        let mut v: Vec<f64> = samples.iter().map(|s| s.coords[0]).collect();
        v.push(self.lo);
        v.push(self.hi);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.into_iter().map(SamplePoint::scalar).collect()
    }

    /// `min_x v_{b,n}(x)` on one sample.
    pub fn solve(&self, samples: &[SamplePoint], beta: f64, eps: f64) -> Result<f64, StatsError> {
        if samples.is_empty() {
            return Err(StatsError::EmptySample);
        }
        let prob = BdrProblem::data_driven(
            self.loss.clone(),
            samples.to_vec(),
            beta,
            eps,
            1.0,
            GroundMetric::Euclidean,
            1,
            InnerRepresentation::Grid(self.grid(samples)),
        )?
        .with_config(SolverConfig {
            inner_mode: self.inner_mode,
            ..SolverConfig::default()
        });
        Ok(solve_bdr_scalar(&prob, self.lo, self.hi, X_TOL)?.value)
    }
}

/// `W_1` between two distributions on the line, `∫ |F − G|`.
pub fn wasserstein1_line(a: &DiscreteDistribution, b: &DiscreteDistribution) -> f64 {
    let mut pts: Vec<(f64, f64)> = a
        .atoms()
        .iter()
        .zip(a.weights())
        .map(|(p, &w)| (p.coords[0], w))
        .chain(b.atoms().iter().zip(b.weights()).map(|(p, &w)| (p.coords[0], -w)))
        .collect();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for k in 0..pts.len() {
        diff += pts[k].1;
        if k + 1 < pts.len() {
            total += diff.abs() * (pts[k + 1].0 - pts[k].0);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    Hoeffding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub kind: BoundKind,
    pub sigma: f64,
    pub eta: f64,
}

impl BoundParams {
    pub fn hoeffding(sigma: f64, eta: f64) -> Result<Self, StatsError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(StatsError::BadSigma(sigma));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(StatsError::BadEta(eta));
        }
        Ok(Self {
            kind: BoundKind::Hoeffding,
            sigma,
            eta,
        })
    }
}

/// `G = v_n + sqrt(−2σ² log η / n)` for a σ-sub-Gaussian loss.
pub fn hoeffding_bound(v_n: f64, n: usize, params: &BoundParams) -> Result<f64, StatsError> {
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    if !(params.eta > 0.0 && params.eta < 1.0) {
        return Err(StatsError::BadEta(params.eta));
    }
    if !(params.sigma > 0.0) {
        return Err(StatsError::BadSigma(params.sigma));
    }
    Ok(v_n + (-2.0 * params.sigma * params.sigma * params.eta.ln() / n as f64).sqrt())
}

/// `β v_{r,n} + (1 − β) G`.
pub fn bdr_generalization_bound(v_rn: f64, g_bound: f64, beta: f64) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(StatsError::BadBeta(beta));
    }
    Ok(beta * v_rn + (1.0 - beta) * g_bound)
}

/// The two bounds compared when `g(x) ≤ ε f(x)`: the DRO bound
/// `v_n + ε f` and the BDR bound `v_n + β ε f + (1 − β) g`.
pub fn dro_and_bdr_bounds(v_n: f64, beta: f64, eps: f64, f: f64, g: f64) -> Result<(f64, f64), StatsError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(StatsError::BadBeta(beta));
    }
    Ok((v_n + eps * f, v_n + beta * eps * f + (1.0 - beta) * g))
}

/// Runs `f(rep)` for every replication in parallel and collects results in
/// replication order. Fails when more than [`MAX_FAILURE_RATE`] of them fail.
fn replicate<T, F>(reps: usize, f: F) -> Result<Vec<Option<T>>, StatsError>
where
    T: Send,
    F: Fn(usize) -> Result<T, StatsError> + Sync,
{
    let results: Vec<Result<T, StatsError>> = (0..reps).into_par_iter().map(&f).collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed as f64 > MAX_FAILURE_RATE * reps as f64 {
        let first = results
            .iter()
            .find_map(|r| r.as_ref().err())
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(StatsError::TooManyFailures { failed, reps, first });
    }
    Ok(results.into_iter().map(Result::ok).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasEstimate {
    pub n: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub mean_bias: f64,
    pub std_err: f64,
    pub failures: usize,
    /// Per-replication `min_x v_{b,n}`; `None` for failed replications.
    pub values: Vec<Option<f64>>,
}

pub const MIN_REPS: usize = 30;

/// Monte-Carlo estimate of `E[min_x v_{b,n}] − v(x0)`. Replication `r`
/// uses the draw `prob.draw(n, seed, r)`.
pub fn bias_experiment(
    prob: &SyntheticProblem,
    n: usize,
    beta: f64,
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<BiasEstimate, StatsError> {
    if reps < MIN_REPS {
        return Err(StatsError::TooFewReps { min: MIN_REPS, got: reps });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(StatsError::BadBeta(beta));
    }
    let values = replicate(reps, |r| prob.solve(&prob.draw(n, seed, r)?, beta, eps))?;
    let ok: Vec<f64> = values.iter().flatten().map(|v| v - prob.true_optimum).collect();
    let (mean_bias, std_err) = mean_and_std_err(&ok);
    Ok(BiasEstimate {
        n,
        beta,
        epsilon: eps,
        mean_bias,
        std_err,
        failures: reps - ok.len(),
        values,
    })
}

/// Per-replication minima for several blend weights on common draws; row
/// `r` holds `min_x v_{b,n}` for each entry of `betas`.
pub fn common_draw_minima(
    prob: &SyntheticProblem,
    n: usize,
    betas: &[f64],
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<Option<Vec<f64>>>, StatsError> {
    replicate(reps, |r| {
        let s = prob.draw(n, seed, r)?;
        betas.iter().map(|&b| prob.solve(&s, b, eps)).collect()
    })
}

/// `2 ×` the 95th percentile of `W_1(P̂_n, P0)` over `pilot_reps` draws.
pub fn pilot_epsilon(prob: &SyntheticProblem, n: usize, pilot_reps: usize, seed: u64) -> Result<f64, StatsError> {
    if pilot_reps == 0 {
        return Err(StatsError::TooFewReps { min: 1, got: 0 });
    }
    let mut w: Vec<f64> = (0..pilot_reps)
        .map(|r| {
            let s = prob.draw(n, seed, r)?;
            let emp = crate::distributions::empirical_from_samples(s)?;
            Ok(wasserstein1_line(&emp, &prob.p0))
        })
        .collect::<Result<_, StatsError>>()?;
    w.sort_by(f64::total_cmp);
    let idx = ((0.95 * pilot_reps as f64).ceil() as usize).clamp(1, pilot_reps) - 1;
    Ok(2.0 * w[idx])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasedBeta {
    pub beta: f64,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    pub bias: f64,
    pub std_err: f64,
    /// `bias ± tol_se_multiple · std_err`.
    pub bias_ci: (f64, f64),
    /// `(β, bias, std_err)` for every evaluation, in order.
    pub trace: Vec<(f64, f64, f64)>,
}

/// Bisection on β with common draws (`seed` fixed across β) until the bias
/// estimate is within `tol_se_multiple` standard errors of zero.
pub fn find_unbiased_beta(
    prob: &SyntheticProblem,
    n: usize,
    eps: f64,
    reps: usize,
    tol_se_multiple: f64,
    seed: u64,
) -> Result<UnbiasedBeta, StatsError> {
    let mut trace = Vec::new();
    let mut eval = |beta: f64| -> Result<(f64, f64), StatsError> {
        let b = bias_experiment(prob, n, beta, eps, reps, seed)?;
        trace.push((beta, b.mean_bias, b.std_err));
        Ok((b.mean_bias, b.std_err))
    };
    let (b0, se0) = eval(0.0)?;
    let (b1, se1) = eval(1.0)?;
    if !(b0 < -tol_se_multiple * se0 && b1 > tol_se_multiple * se1) {
        return Err(StatsError::NoSignChange {
            bias0: b0,
            se0,
            bias1: b1,
            se1,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut last = (0.5, 0.0, 0.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (b, se) = eval(mid)?;
        last = (mid, b, se);
        if b.abs() <= tol_se_multiple * se || hi - lo < 1e-9 {
            break;
        }
        if b < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (beta, bias, std_err) = last;
    Ok(UnbiasedBeta {
        beta,
        bracket: (lo, hi),
        bias,
        std_err,
        bias_ci: (bias - tol_se_multiple * std_err, bias + tol_se_multiple * std_err),
        trace,
    })
}

/// How the blend weight shrinks with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BetaSchedule {
    /// `β_n = α / (α + n)`.
    Dirichlet { alpha: f64 },
    /// `β_n = min(1, c · n^(−rate))`.
    Power { c: f64, rate: f64 },
}

impl BetaSchedule {
    pub fn beta(&self, n: usize) -> Result<f64, StatsError> {
        match *self {
            BetaSchedule::Dirichlet { alpha } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(StatsError::BadSchedule(format!("alpha = {alpha}")));
                }
                Ok(if alpha == 0.0 { 0.0 } else { alpha / (alpha + n as f64) })
            }
            BetaSchedule::Power { c, rate } => {
                if !(c >= 0.0 && rate >= 0.0) {
                    return Err(StatsError::BadSchedule(format!("c = {c}, rate = {rate}")));
                }
                Ok((c * (n as f64).powf(-rate)).min(1.0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub mean_abs_error: f64,
    pub std_err: f64,
    pub failures: usize,
}

/// Mean `|min_x v_{b,n} − v(x0)|` along `n_schedule` with `β_n` from
/// `schedule` and a fixed radius.
pub fn consistency_experiment(
    prob: &SyntheticProblem,
    n_schedule: &[usize],
    schedule: BetaSchedule,
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<ConsistencyRow>, StatsError> {
    n_schedule
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let beta = schedule.beta(n)?;
            let b = bias_experiment(prob, n, beta, eps, reps, SplitMix64::at(seed, k as u64))?;
            let errs: Vec<f64> = b.values.iter().flatten().map(|v| (v - prob.true_optimum).abs()).collect();
            let (mean_abs_error, std_err) = mean_and_std_err(&errs);
            Ok(ConsistencyRow {
                n,
                beta,
                epsilon: eps,
                mean_abs_error,
                std_err,
                failures: b.failures,
            })
        })
        .collect()
}

/// Asymptotic Kolmogorov p-value for a one-sample KS distance `d` on `m`
/// observations, with the small-sample correction
/// `λ = (√m + 0.12 + 0.11/√m) d`.
pub fn ks_p_value(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    let lambda = (sm + 0.12 + 0.11 / sm) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Largest gap between the empirical CDF of `values` and the standard
/// normal CDF.
pub fn ks_statistic_normal(values: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltResult {
    pub n: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub ks_statistic: f64,
    pub p_value: f64,
    /// `√n (min v_{b,n} − v(x0)) / √V_v` per successful replication.
    pub statistics: Vec<f64>,
}

/// KS test of `√n (min v_{b,n} − v(x0)) / √V_v` against `N(0, 1)`.
pub fn clt_experiment(
    prob: &SyntheticProblem,
    n: usize,
    schedule: BetaSchedule,
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<CltResult, StatsError> {
    if prob.v_v <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let beta = schedule.beta(n)?;
    let b = bias_experiment(prob, n, beta, eps, reps, seed)?;
    let scale = (n as f64).sqrt() / prob.v_v.sqrt();
    let statistics: Vec<f64> = b.values.iter().flatten().map(|v| scale * (v - prob.true_optimum)).collect();
    let ks_statistic = ks_statistic_normal(&statistics);
    Ok(CltResult {
        n,
        beta,
        epsilon: eps,
        ks_statistic,
        p_value: ks_p_value(ks_statistic, statistics.len()),
        statistics,
    })
}

/// One CSV row of a stats run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRecord {
    pub experiment: String,
    pub n: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub rep: usize,
    pub value: f64,
    pub bias: f64,
    pub seed: u64,
}

/// Rows for the successful replications of a bias estimate.
pub fn bias_records(experiment: &str, prob: &SyntheticProblem, b: &BiasEstimate, seed: u64) -> Vec<StatsRecord> {
    b.values
        .iter()
        .enumerate()
        .filter_map(|(rep, v)| {
            v.map(|value| StatsRecord {
                experiment: experiment.to_string(),
                n: b.n,
                beta: b.beta,
                epsilon: b.epsilon,
                rep,
                value,
                bias: value - prob.true_optimum,
                seed,
            })
        })
        .collect()
}

pub fn write_records<W: Write>(records: &[StatsRecord], out: W) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
