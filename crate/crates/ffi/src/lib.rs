//! C ABI over `bdr-core`.
//!
//! Every function returns a [`BdrStatus`]; results go through out-pointers.
//! Matrices are row-major `f64` buffers. Handles are opaque and must be
//! released with their `_free` function. The message of the most recent
//! failure on the calling thread is available from [`bdr_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use bdr_core::distributions::{DiscreteDistribution, Label, SamplePoint};
use bdr_core::svm::{Formulation, SvmTrainer};
use bdr_core::wasserstein::{wasserstein_distance, worst_case_primal, GroundMetric, WassersteinBall};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdrFormulation {
    /// Objective `βε·λ₀ + (1/n)Σλᵢ` over shared constraints.
    Shared = 0,
    /// Separate epigraph variables for the worst-case and empirical parts.
    Exact = 1,
}

/// Wasserstein ball around a discrete center under the Euclidean metric.
pub struct BdrBall {
    ball: WassersteinBall,
    dim: usize,
}

/// SVM trainer that reuses its simplex basis across `(β, ε)` solves.
pub struct BdrSvm {
    trainer: SvmTrainer,
    l: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

struct Fail(BdrStatus, String);

impl Fail {
    fn invalid(msg: impl Into<String>) -> Self {
        Fail(BdrStatus::InvalidArgument, msg.into())
    }

    fn solver(e: impl std::fmt::Display) -> Self {
        Fail(BdrStatus::SolverFailure, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BdrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BdrStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BdrStatus::Panic
        }
    }
}

/// A slice from a possibly null pointer; `len == 0` accepts null.
unsafe fn view<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(BdrStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn view_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail(BdrStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(BdrStatus::NullPointer, format!("{name} is null")))
}

unsafe fn distribution(points: *const f64, weights: *const f64, n: usize, dim: usize) -> Result<DiscreteDistribution, Fail> {
    if n == 0 || dim == 0 {
        return Err(Fail::invalid("need at least one atom of dimension ≥ 1"));
    }
    let pts = view(points, n * dim, "points")?;
    let w = view(weights, n, "weights")?;
    let atoms = pts.chunks(dim).map(|c| SamplePoint::new(c.to_vec())).collect();
    DiscreteDistribution::new(atoms, w.to_vec()).map_err(|e| Fail::invalid(e.to_string()))
}

/// Message of the last failure on this thread; empty when none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bdr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Order-`order` Wasserstein distance between two discrete distributions
/// with `dim`-dimensional atoms.
///
/// # Safety
/// Point buffers hold `n·dim` values, weight buffers `n` values.
#[no_mangle]
pub unsafe extern "C" fn bdr_wasserstein_distance(
    a_points: *const f64,
    a_weights: *const f64,
    na: usize,
    b_points: *const f64,
    b_weights: *const f64,
    nb: usize,
    dim: usize,
    order: f64,
    out_distance: *mut f64,
) -> BdrStatus {
    guard(|| {
        let a = distribution(a_points, a_weights, na, dim)?;
        let b = distribution(b_points, b_weights, nb, dim)?;
        let o = out(out_distance, "out_distance")?;
        let (w, _) = wasserstein_distance(&a, &b, order, &GroundMetric::Euclidean).map_err(Fail::solver)?;
        *o = w;
        Ok(())
    })
}

/// Creates a ball of the given radius and order around the center.
///
/// # Safety
/// `center_points` holds `n·dim` values, `center_weights` `n` values;
/// `out_ball` is writable.
#[no_mangle]
pub unsafe extern "C" fn bdr_ball_new(
    center_points: *const f64,
    center_weights: *const f64,
    n: usize,
    dim: usize,
    radius: f64,
    order: f64,
    out_ball: *mut *mut BdrBall,
) -> BdrStatus {
    guard(|| {
        let o = out(out_ball, "out_ball")?;
        *o = ptr::null_mut();
        let center = distribution(center_points, center_weights, n, dim)?;
        let ball = WassersteinBall::new(center, radius, order, GroundMetric::Euclidean)
            .map_err(|e| Fail::invalid(e.to_string()))?;
        *o = Box::into_raw(Box::new(BdrBall { ball, dim }));
        Ok(())
    })
}

/// # Safety
/// `ball` is null or came from [`bdr_ball_new`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bdr_ball_free(ball: *mut BdrBall) {
    if !ball.is_null() {
        drop(Box::from_raw(ball));
    }
}

/// Worst-case expected loss over the ball, restricted to `m` candidate
/// points with losses `losses[j]`. Writes the value and the worst-case mass
/// on each candidate (`out_mass`, length `m`; may be null). Candidates with
/// identical coordinates must carry identical losses.
///
/// # Safety
/// `candidates` holds `m·dim` values, `losses` `m` values; `out_mass` is
/// null or holds `m` values.
#[no_mangle]
pub unsafe extern "C" fn bdr_worst_case(
    ball: *const BdrBall,
    candidates: *const f64,
    losses: *const f64,
    m: usize,
    out_value: *mut f64,
    out_mass: *mut f64,
) -> BdrStatus {
    guard(|| {
        let b = ball.as_ref().ok_or(Fail(BdrStatus::NullPointer, "ball is null".into()))?;
        if m == 0 {
            return Err(Fail::invalid("need at least one candidate"));
        }
        let pts = view(candidates, m * b.dim, "candidates")?;
        let h_vals = view(losses, m, "losses")?;
        let o = out(out_value, "out_value")?;
        let grid: Vec<SamplePoint> = pts.chunks(b.dim).map(|c| SamplePoint::new(c.to_vec())).collect();
        let h = |p: &SamplePoint| {
            grid.iter()
                .position(|q| q.coords == p.coords)
                .map_or(f64::NAN, |j| h_vals[j])
        };
        let r = worst_case_primal(&b.ball, h, &grid).map_err(Fail::solver)?;
        *o = r.value;
        if !out_mass.is_null() {
            view_mut(out_mass, m, "out_mass")?.copy_from_slice(&r.plan.col_marginal);
        }
        Ok(())
    })
}

/// Builds an SVM trainer over `n` samples with `l` features and labels
/// `±1`, using ground metric `‖·‖∞ + κ·1{label flip}`.
///
/// # Safety
/// `features` holds `n·l` values, `labels` `n` values; `out_svm` is writable.
#[no_mangle]
pub unsafe extern "C" fn bdr_svm_new(
    features: *const f64,
    labels: *const i32,
    n: usize,
    l: usize,
    kappa: f64,
    formulation: BdrFormulation,
    out_svm: *mut *mut BdrSvm,
) -> BdrStatus {
    guard(|| {
        let o = out(out_svm, "out_svm")?;
        *o = ptr::null_mut();
        let x = view(features, n * l, "features")?;
        let y = view(labels, n, "labels")?
            .iter()
            .map(|&v| match v {
                1 => Ok(Label::Pos),
                -1 => Ok(Label::Neg),
                other => Err(Fail::invalid(format!("label {other} is not ±1"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let f = match formulation {
            BdrFormulation::Shared => Formulation::Shared,
            BdrFormulation::Exact => Formulation::ExactEpigraph,
        };
        let trainer = SvmTrainer::new(x, &y, l, kappa, f).map_err(|e| Fail::invalid(e.to_string()))?;
        *o = Box::into_raw(Box::new(BdrSvm { trainer, l }));
        Ok(())
    })
}

/// Trains at blend weight `beta` and radius `epsilon`; writes `l` weights
/// and the LP optimum.
///
/// # Safety
/// `svm` came from [`bdr_svm_new`]; `out_weights` holds `l` values.
#[no_mangle]
pub unsafe extern "C" fn bdr_svm_train(
    svm: *mut BdrSvm,
    beta: f64,
    epsilon: f64,
    out_weights: *mut f64,
    out_objective: *mut f64,
) -> BdrStatus {
    guard(|| {
        let s = svm.as_mut().ok_or(Fail(BdrStatus::NullPointer, "svm is null".into()))?;
        let w = view_mut(out_weights, s.l, "out_weights")?;
        let obj = out(out_objective, "out_objective")?;
        let model = s.trainer.train(beta, epsilon).map_err(|e| match e {
            bdr_core::svm::SvmError::Invalid(m) => Fail::invalid(m),
            other => Fail::solver(other),
        })?;
        w.copy_from_slice(&model.weights);
        *obj = model.objective;
        Ok(())
    })
}

/// # Safety
/// `svm` is null or came from [`bdr_svm_new`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bdr_svm_free(svm: *mut BdrSvm) {
    if !svm.is_null() {
        drop(Box::from_raw(svm));
    }
}
