//! Worst-case expectation over a KL ball on a fixed finite support:
//! `max Σ μᵢ hᵢ` over the simplex subject to `KL(μ ‖ μ̄) ≤ ε`.
//!
//! For a linear objective the optimizer is the exponential tilt
//! `μᵢ(λ) ∝ μ̄ᵢ exp(hᵢ / λ)`, with `λ > 0` chosen so that the constraint is
//! tight. `KL(μ(λ) ‖ μ̄)` decreases in `λ`, from `−log μ̄(A)` as `λ → 0`
//! (where `A` is the argmax set of `h`) to 0 as `λ → ∞`; when
//! `ε ≥ −log μ̄(A)` the answer is `max h`, attained by `μ̄` conditioned on `A`.

use thiserror::Error;

use crate::distributions::SIMPLEX_TOL;
use crate::numeric::CompensatedSum;

pub const LAMBDA_MIN: f64 = 1e-12;
pub const LAMBDA_MAX: f64 = 1e6;
pub const KL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhiError {
    #[error("radius must be finite and ≥ 0, got {0}")]
    BadRadius(f64),
    #[error("center weight {index} is {value}; weights must be strictly positive")]
    BadCenterWeight { index: usize, value: f64 },
    #[error("center weights sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("{weights} center weights but {losses} losses")]
    LengthMismatch { weights: usize, losses: usize },
    #[error("loss {index} is not finite")]
    NonFiniteLoss { index: usize },
}

/// Divergence generator. Only KL (`φ(t) = t log t`) is provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi {
    Kl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiBall {
    center_weights: Vec<f64>,
    radius: f64,
    pub phi: Phi,
}

impl PhiBall {
    pub fn kl(center_weights: Vec<f64>, radius: f64) -> Result<Self, PhiError> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(PhiError::BadRadius(radius));
        }
        for (index, &value) in center_weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PhiError::BadCenterWeight { index, value });
            }
        }
        let sum: f64 = center_weights.iter().copied().collect::<CompensatedSum>().value();
        if center_weights.is_empty() || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(PhiError::NotNormalized(sum));
        }
        Ok(Self {
            center_weights,
            radius,
            phi: Phi::Kl,
        })
    }

    pub fn center_weights(&self) -> &[f64] {
        &self.center_weights
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// `KL(μ ‖ μ̄) = Σ μᵢ log(μᵢ / μ̄ᵢ)` with `0 log 0 = 0`.
pub fn kl_divergence(mu: &[f64], center: &[f64]) -> f64 {
    mu.iter()
        .zip(center)
        .filter(|(&m, _)| m > 0.0)
        .map(|(&m, &c)| m * (m / c).ln())
        .collect::<CompensatedSum>()
        .value()
}

/// Normalized tilt `μ̄ᵢ exp((hᵢ − max h)/λ)`.
fn tilt(center: &[f64], losses: &[f64], hmax: f64, lambda: f64) -> Vec<f64> {
    let w: Vec<f64> = center
        .iter()
        .zip(losses)
        .map(|(&c, &h)| c * ((h - hmax) / lambda).exp())
        .collect();
    let total: f64 = w.iter().copied().collect::<CompensatedSum>().value();
    w.into_iter().map(|v| v / total).collect()
}

fn weighted(mu: &[f64], losses: &[f64]) -> f64 {
    mu.iter().zip(losses).map(|(m, h)| m * h).collect::<CompensatedSum>().value()
}

/// Returns the worst-case value and an optimizer `μ*` with
/// `KL(μ* ‖ μ̄) ≤ ε + 1e−9`.
pub fn phi_worst_case(ball: &PhiBall, losses: &[f64]) -> Result<(f64, Vec<f64>), PhiError> {
    let center = &ball.center_weights;
    if losses.len() != center.len() {
        return Err(PhiError::LengthMismatch {
            weights: center.len(),
            losses: losses.len(),
        });
    }
    if let Some(index) = losses.iter().position(|h| !h.is_finite()) {
        return Err(PhiError::NonFiniteLoss { index });
    }
    let eps = ball.radius;
    let hmax = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hmin = losses.iter().copied().fold(f64::INFINITY, f64::min);
    if eps == 0.0 || hmax == hmin {
        return Ok((weighted(center, losses), center.clone()));
    }

    // mass of the argmax set decides whether the limit λ → 0 is reachable
    let top_mass: f64 = center.iter().zip(losses).filter(|(_, &h)| h == hmax).map(|(c, _)| c).sum();
    if eps >= -top_mass.ln() {
        let mu: Vec<f64> = center
            .iter()
            .zip(losses)
            .map(|(&c, &h)| if h == hmax { c / top_mass } else { 0.0 })
            .collect();
        return Ok((hmax, mu));
    }

    // bisection on log λ; KL decreases in λ, keep `hi` on the feasible side
    let (mut lo, mut hi) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
    let mut best = tilt(center, losses, hmax, LAMBDA_MAX);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let mu = tilt(center, losses, hmax, mid.exp());
        let kl = kl_divergence(&mu, center);
        if kl <= eps {
            hi = mid;
            best = mu;
            if eps - kl <= KL_TOL {
                break;
            }
        } else {
            lo = mid;
        }
        if hi.exp() - lo.exp() <= 1e-12 {
            break;
        }
    }
    Ok((weighted(&best, losses), best))
}
