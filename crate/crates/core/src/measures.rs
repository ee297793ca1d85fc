//! Probability-simplex geometry.
//!
//! An allocation of a budget over `m` arms is identified with the weight
//! vector of a discrete probability measure supported on `{1, .., m}`. Under
//! the binary ground metric (moving a unit of mass between two distinct
//! support points costs 1) the Wasserstein distance between two such
//! measures has a closed form: half the L1 distance, raised to `1/p`.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Absolute tolerance for simplex-sum and budget-equality checks.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Default order of the Wasserstein distance.
pub const DEFAULT_WASSERSTEIN_P: f64 = 1.0;

/// A point of the probability simplex of dimension `m - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates `weights`: at least two entries, all finite and nonnegative,
    /// summing to one within [`SUM_TOLERANCE`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(domain(format!("weight vector needs dimension >= 2, got {}", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Invariant("weight vector entries must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Invariant(format!("weight vector sums to {total}, expected 1")));
        }
        Ok(Self(weights))
    }

    /// The `i`-th vertex of the simplex.
    pub fn vertex(m: usize, i: usize) -> Result<Self> {
        if i >= m {
            return Err(domain(format!("vertex index {i} out of range for m={m}")));
        }
        let mut w = vec![0.0; m];
        w[i] = 1.0;
        Self::new(w)
    }

    /// The barycenter `(1/m, .., 1/m)`.
    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0 / m as f64; m])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(value: WeightVector) -> Self {
        value.0
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A nonnegative split of `budget` over the arms, spending it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    amounts: Vec<f64>,
    budget: f64,
}

impl AllocationDecision {
    pub fn new(amounts: Vec<f64>, budget: f64) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(domain(format!("budget must be positive, got {budget}")));
        }
        if amounts.is_empty() {
            return Err(domain("allocation needs at least one arm"));
        }
        if amounts.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Invariant("allocated amounts must be finite and nonnegative".into()));
        }
        let total: f64 = amounts.iter().sum();
        if (total - budget).abs() > SUM_TOLERANCE {
            return Err(Error::Invariant(format!("amounts sum to {total}, budget is {budget}")));
        }
        Ok(Self { amounts, budget })
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn dim(&self) -> usize {
        self.amounts.len()
    }
}

/// Normalizes an allocation by its budget: `a_i = x_i / b`.
pub fn to_weight_vector(x: &AllocationDecision) -> Result<WeightVector> {
    if !(x.budget > 0.0) {
        return Err(domain("cannot normalize by a nonpositive budget"));
    }
    let total: f64 = x.amounts.iter().sum();
    if (total - x.budget).abs() > SUM_TOLERANCE {
        return Err(Error::Invariant(format!("amounts sum to {total}, budget is {}", x.budget)));
    }
    WeightVector::new(x.amounts.iter().map(|v| v / x.budget).collect())
}

/// Scales a weight vector by a budget: `x_i = b * a_i`.
pub fn from_weight_vector(a: &WeightVector, budget: f64) -> Result<AllocationDecision> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(domain(format!("budget must be positive, got {budget}")));
    }
    AllocationDecision::new(a.0.iter().map(|w| w * budget).collect(), budget)
}

/// Half the L1 distance between two weight vectors (the binary-metric
/// transport cost, before the `1/p` power). Callers guarantee equal length.
pub(crate) fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Closed-form `W_p` between two fixed-support measures under the binary
/// ground metric.
pub fn wasserstein_p(a: &WeightVector, a2: &WeightVector, p: f64) -> Result<f64> {
    if a.dim() != a2.dim() {
        return Err(domain(format!("dimension mismatch: {} vs {}", a.dim(), a2.dim())));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(domain(format!("Wasserstein order must be in (0, inf), got {p}")));
    }
    Ok(half_l1(&a.0, &a2.0).powf(1.0 / p))
}

/// Draws a point uniformly from the simplex (flat Dirichlet) by normalizing
/// unit-rate exponential variates.
pub fn sample_uniform_simplex<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<WeightVector> {
    if m < 2 {
        return Err(domain(format!("simplex sampling needs m >= 2, got {m}")));
    }
    loop {
        let draws: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return Ok(WeightVector(normalized(draws, total)));
        }
    }
}

/// Euclidean projection onto the simplex (sort and threshold).
pub fn project_to_simplex(v: &[f64]) -> Result<WeightVector> {
    if v.len() < 2 {
        return Err(domain(format!("projection needs dimension >= 2, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(domain("cannot project a non-finite vector"));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let projected: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let total: f64 = projected.iter().sum();
    Ok(WeightVector(normalized(projected, total)))
}

/// Divides by `total` and pushes the residual rounding error onto the
/// largest entry so the result sums to one to machine precision.
fn normalized(mut w: Vec<f64>, total: f64) -> Vec<f64> {
    for x in &mut w {
        *x /= total;
    }
    let sum: f64 = w.iter().sum();
    let (imax, _) = w.iter().enumerate().fold((0, f64::MIN), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    w[imax] = (w[imax] + (1.0 - sum)).max(0.0);
    w
}
