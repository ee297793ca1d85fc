use rand::RngCore;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{ObservationRecord, Policy, PolicyId};
use crate::error::{domain, Error, Result};
use crate::measures::AllocationDecision;

pub const DEFAULT_DELTA: f64 = 0.05;

/// Trials observed on one arm at one allocation level.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Level {
    amount: f64,
    successes: u32,
    trials: u32,
}

/// Per-arm confidence bounds on the difficulty `nu` of each job.
#[derive(Debug, Clone, PartialEq)]
pub struct SbfState {
    lower: Vec<f64>,
    upper: Vec<f64>,
    levels: Vec<Vec<Level>>,
    delta: f64,
}

impl SbfState {
    /// Lower bounds at zero, upper bounds unbounded.
    pub fn new(arms: usize) -> Self {
        Self::with_delta(arms, DEFAULT_DELTA)
    }

    pub fn with_delta(arms: usize, delta: f64) -> Self {
        Self { lower: vec![0.0; arms], upper: vec![f64::INFINITY; arms], levels: vec![Vec::new(); arms], delta }
    }

    /// State with the given lower bounds and no other information.
    pub fn from_lower(lower: Vec<f64>) -> Result<Self> {
        if lower.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain("lower bounds must be finite and nonnegative"));
        }
        let mut state = Self::new(lower.len());
        state.lower = lower;
        Ok(state)
    }

    pub fn arms(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Successes and trials on `arm` at allocations up to `limit`.
    fn pooled(&self, arm: usize, limit: f64) -> (u32, u32) {
        self.levels[arm].iter().filter(|l| l.amount <= limit).fold((0, 0), |(s, n), l| (s + l.successes, n + l.trials))
    }

    fn record(&mut self, arm: usize, amount: f64, success: bool) {
        let levels = &mut self.levels[arm];
        let idx = match levels.binary_search_by(|l| l.amount.total_cmp(&amount)) {
            Ok(i) => i,
            Err(i) => {
                levels.insert(i, Level { amount, successes: 0, trials: 0 });
                i
            }
        };
        levels[idx].trials += 1;
        levels[idx].successes += success as u32;
    }
}

/// Lower limit of the two-sided Wilson score interval at level `1 - delta`.
pub fn wilson_lower_bound(successes: u32, trials: u32, delta: f64) -> f64 {
    if successes == 0 {
        return 0.0;
    }
    let z = Normal::standard().inverse_cdf(1.0 - delta / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half) / (1.0 + z2 / n)).max(0.0)
}

/// Optimistic greedy fill: cover the easiest jobs at their lower bounds first.
pub fn sbf_decide(state: &SbfState, budget: f64) -> Result<AllocationDecision> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(domain(format!("budget must be positive, got {budget}")));
    }
    let m = state.arms();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| state.lower[a].total_cmp(&state.lower[b]));
    let mut amounts = vec![0.0; m];
    let mut remaining = budget;
    let mut saturated = Vec::new();
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let x = state.lower[i].min(remaining);
        amounts[i] = x;
        remaining -= x;
        if x == state.lower[i] {
            saturated.push(i);
        }
    }
    if remaining > 0.0 {
        let share = remaining / saturated.len() as f64;
        for &i in &saturated {
            amounts[i] += share;
        }
    }
    // absorb rounding so the split is exact to the budget
    let drift = budget - amounts.iter().sum::<f64>();
    let largest = (0..m).max_by(|&a, &b| amounts[a].total_cmp(&amounts[b])).unwrap_or(0);
    amounts[largest] = (amounts[largest] + drift).max(0.0);
    AllocationDecision::new(amounts, budget)
}

/// Folds one step of per-arm outcomes into the bounds.
pub fn sbf_update(
    state: &SbfState,
    decision: &AllocationDecision,
    per_arm_outcomes: Option<&[bool]>,
) -> Result<SbfState> {
    let outcomes =
        per_arm_outcomes.ok_or_else(|| Error::Contract("SBF needs per-arm outcomes (semi-bandit feedback)".into()))?;
    if decision.dim() != state.arms() || outcomes.len() != state.arms() {
        return Err(domain("decision or outcomes do not match the number of arms"));
    }
    let mut next = state.clone();
    for (i, (&x, &success)) in decision.amounts().iter().zip(outcomes).enumerate() {
        if x <= 0.0 {
            continue;
        }
        next.record(i, x, success);
        if !success {
            // a failure is impossible at or above nu
            next.lower[i] = next.lower[i].max(x.min(next.upper[i]));
        }
        let (s, n) = next.pooled(i, x.min(next.upper[i]));
        let q = wilson_lower_bound(s, n, next.delta);
        if q > 0.0 {
            next.upper[i] = next.upper[i].min((x / q).max(next.lower[i]));
        }
    }
    Ok(next)
}

/// Semi-bandit baseline driving an [`SbfState`].
#[derive(Debug, Clone)]
pub struct Sbf {
    state: SbfState,
}

impl Sbf {
    pub fn new(arms: usize) -> Self {
        Self { state: SbfState::new(arms) }
    }

    pub fn state(&self) -> &SbfState {
        &self.state
    }
}

impl Policy for Sbf {
    fn id(&self) -> PolicyId {
        PolicyId::Sbf
    }

    fn decide(&mut self, budget: f64, _rng: &mut dyn RngCore) -> Result<AllocationDecision> {
        sbf_decide(&self.state, budget)
    }

    fn observe(&mut self, record: ObservationRecord) -> Result<()> {
        self.state = sbf_update(&self.state, &record.decision, record.per_arm_outcomes.as_deref())?;
        Ok(())
    }
}
