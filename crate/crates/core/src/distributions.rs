//! Discrete distributions on a sample space and finite mixtures of them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::CompensatedSum;

/// Weights must sum to one within this tolerance.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("a distribution needs at least one atom")]
    Empty,
    #[error("{atoms} atoms but {weights} weights")]
    LengthMismatch { atoms: usize, weights: usize },
    #[error("weight {index} is {value}; weights must be finite and nonnegative")]
    BadWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("atom {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("loss is not finite ({value}) at atom {index}")]
    NonFiniteLoss { index: usize, value: f64 },
}

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    /// `+1 → Pos`, `-1 → Neg`, anything else `None`.
    pub fn from_sign(y: i64) -> Option<Self> {
        match y {
            1 => Some(Label::Pos),
            -1 => Some(Label::Neg),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }
}

/// A point ξ of the sample space: a coordinate vector, plus a label for
/// supervised pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub coords: Vec<f64>,
    pub label: Option<Label>,
}

impl SamplePoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords, label: None }
    }

    pub fn scalar(v: f64) -> Self {
        Self::new(vec![v])
    }

    pub fn labeled(coords: Vec<f64>, label: Label) -> Self {
        Self {
            coords,
            label: Some(label),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Bitwise identity key; two points share a key iff their coordinates
    /// compare equal and their labels match.
    fn key(&self) -> (Vec<u64>, Option<Label>) {
        // normalize -0.0 so that key equality agrees with `==`
        let bits = self.coords.iter().map(|v| (v + 0.0).to_bits()).collect();
        (bits, self.label)
    }
}

/// Finitely supported distribution `Σ_j μ_j δ_{ξ_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<SamplePoint>,
    weights: Vec<f64>,
}

fn check_simplex(weights: &[f64]) -> Result<(), DistributionError> {
    let mut sum = CompensatedSum::new();
    for (index, &value) in weights.iter().enumerate() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(DistributionError::BadWeight { index, value });
        }
        sum.add(value);
    }
    let sum = sum.value();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(DistributionError::NotNormalized { sum });
    }
    Ok(())
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<SamplePoint>, weights: Vec<f64>) -> Result<Self, DistributionError> {
        if atoms.is_empty() {
            return Err(DistributionError::Empty);
        }
        if atoms.len() != weights.len() {
            return Err(DistributionError::LengthMismatch {
                atoms: atoms.len(),
                weights: weights.len(),
            });
        }
        let dim = atoms[0].dim();
        if let Some((index, a)) = atoms.iter().enumerate().find(|(_, a)| a.dim() != dim) {
            return Err(DistributionError::DimensionMismatch {
                index,
                expected: dim,
                got: a.dim(),
            });
        }
        check_simplex(&weights)?;
        Ok(Self { atoms, weights })
    }

    pub fn dirac(atom: SamplePoint) -> Self {
        Self {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    /// Uniform weights `1/n`; duplicates stay separate atoms.
    pub fn uniform(atoms: Vec<SamplePoint>) -> Result<Self, DistributionError> {
        let n = atoms.len();
        if n == 0 {
            return Err(DistributionError::Empty);
        }
        let w = 1.0 / n as f64;
        // n·fl(1/n) can miss 1 by a few ulps, far inside SIMPLEX_TOL
        Self::new(atoms, vec![w; n])
    }

    pub fn atoms(&self) -> &[SamplePoint] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&v| (v - w).abs() <= 1e-15)
    }

    /// Merges identical atoms, keeping first-seen order. The result is the
    /// same measure on fewer atoms.
    pub fn collapsed(&self) -> Self {
        let mut index: HashMap<(Vec<u64>, Option<Label>), usize> = HashMap::new();
        let mut atoms = Vec::new();
        let mut sums: Vec<CompensatedSum> = Vec::new();
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            let slot = *index.entry(a.key()).or_insert_with(|| {
                atoms.push(a.clone());
                sums.push(CompensatedSum::new());
                atoms.len() - 1
            });
            sums[slot].add(w);
        }
        Self {
            atoms,
            weights: sums.iter().map(CompensatedSum::value).collect(),
        }
    }
}

/// Empirical distribution `(1/n) Σ δ_{ξ_i}` of the samples, in order.
pub fn empirical_from_samples(samples: Vec<SamplePoint>) -> Result<DiscreteDistribution, DistributionError> {
    DiscreteDistribution::uniform(samples)
}

/// `Σ_j μ_j h(ξ_j)`, failing on the first atom where `h` is not finite.
pub fn expectation<H>(dist: &DiscreteDistribution, mut h: H) -> Result<f64, DistributionError>
where
    H: FnMut(&SamplePoint) -> f64,
{
    let mut acc = CompensatedSum::new();
    for (index, (a, &w)) in dist.atoms.iter().zip(&dist.weights).enumerate() {
        let value = h(a);
        if !value.is_finite() {
            return Err(DistributionError::NonFiniteLoss { index, value });
        }
        acc.add(w * value);
    }
    Ok(acc.value())
}

/// A finite mixture `Σ_k w_k P_k` of discrete distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMixture {
    components: Vec<DiscreteDistribution>,
    mixing_weights: Vec<f64>,
}

impl FiniteMixture {
    pub fn new(components: Vec<DiscreteDistribution>, mixing_weights: Vec<f64>) -> Result<Self, DistributionError> {
        if components.is_empty() {
            return Err(DistributionError::Empty);
        }
        if components.len() != mixing_weights.len() {
            return Err(DistributionError::LengthMismatch {
                atoms: components.len(),
                weights: mixing_weights.len(),
            });
        }
        let dim = components[0].dim();
        if let Some((index, c)) = components.iter().enumerate().find(|(_, c)| c.dim() != dim) {
            return Err(DistributionError::DimensionMismatch {
                index,
                expected: dim,
                got: c.dim(),
            });
        }
        check_simplex(&mixing_weights)?;
        Ok(Self {
            components,
            mixing_weights,
        })
    }

    pub fn components(&self) -> &[DiscreteDistribution] {
        &self.components
    }

    pub fn mixing_weights(&self) -> &[f64] {
        &self.mixing_weights
    }
}

/// The mean distribution of a finite mixture: on the union of the component
/// supports, each atom carries `Σ_k w_k P_k(atom)`. Atoms are identified by
/// exact equality; near-duplicates stay distinct and tiny weights are kept.
pub fn mean_distribution(mix: &FiniteMixture) -> DiscreteDistribution {
    let mut index: HashMap<(Vec<u64>, Option<Label>), usize> = HashMap::new();
    let mut atoms = Vec::new();
    let mut sums: Vec<CompensatedSum> = Vec::new();
    for (comp, &wk) in mix.components.iter().zip(&mix.mixing_weights) {
        for (a, &mu) in comp.atoms.iter().zip(&comp.weights) {
            let slot = *index.entry(a.key()).or_insert_with(|| {
                atoms.push(a.clone());
                sums.push(CompensatedSum::new());
                atoms.len() - 1
            });
            sums[slot].add(wk * mu);
        }
    }
    DiscreteDistribution {
        atoms,
        weights: sums.iter().map(CompensatedSum::value).collect(),
    }
}
