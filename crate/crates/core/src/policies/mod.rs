//! Sequential allocators behind one contract: observe past steps, receive the
//! next budget, emit a feasible allocation.

mod bora;
mod sbf;

pub use bora::{
    bora1_decide, bora2_decide, bora3_decide, bora_decide, fit_surrogate, query_point, Bora, BoraConfig, BoraVariant,
};
pub use sbf::{sbf_decide, sbf_update, wilson_lower_bound, Sbf, SbfState};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::measures::{from_weight_vector, sample_uniform_simplex, AllocationDecision};

/// One past step as seen by a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub decision: AllocationDecision,
    pub reward: f64,
    /// Per-arm completion, only available under semi-bandit feedback.
    pub per_arm_outcomes: Option<Vec<bool>>,
    pub step: usize,
}

impl ObservationRecord {
    pub fn new(
        decision: AllocationDecision,
        reward: f64,
        per_arm_outcomes: Option<Vec<bool>>,
        step: usize,
    ) -> Result<Self> {
        if !reward.is_finite() {
            return Err(domain("reward must be finite"));
        }
        if step < 1 {
            return Err(domain("steps are numbered from 1"));
        }
        if let Some(o) = &per_arm_outcomes {
            if o.len() != decision.dim() {
                return Err(domain(format!("{} per-arm outcomes for {} arms", o.len(), decision.dim())));
            }
        }
        Ok(Self { decision, reward, per_arm_outcomes, step })
    }
}

/// Policy identifiers as used in configs and CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyId {
    Bora1,
    Bora2,
    Bora3,
    Sbf,
    Random,
}

impl PolicyId {
    pub const ALL: [PolicyId; 5] = [Self::Bora1, Self::Bora2, Self::Bora3, Self::Sbf, Self::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Bora1 => "bora1",
            Self::Bora2 => "bora2",
            Self::Bora3 => "bora3",
            Self::Sbf => "sbf",
            Self::Random => "random",
        }
    }

    pub fn bora_variant(&self) -> Option<BoraVariant> {
        match self {
            Self::Bora1 => Some(BoraVariant::Bora1),
            Self::Bora2 => Some(BoraVariant::Bora2),
            Self::Bora3 => Some(BoraVariant::Bora3),
            _ => None,
        }
    }

    /// Whether the policy needs per-arm outcomes.
    pub fn needs_semi_bandit_feedback(&self) -> bool {
        matches!(self, Self::Sbf)
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| Error::Config(format!("unknown policy '{s}'")))
    }
}

/// A stateful allocator.
pub trait Policy: Send {
    fn id(&self) -> PolicyId;

    /// Allocation for the next step given its budget.
    fn decide(&mut self, budget: f64, rng: &mut dyn RngCore) -> Result<AllocationDecision>;

    /// Feeds back the outcome of the last decision.
    fn observe(&mut self, record: ObservationRecord) -> Result<()>;
}

/// Uniformly random feasible allocation.
pub fn random_decision<R: Rng + ?Sized>(arms: usize, budget: f64, rng: &mut R) -> Result<AllocationDecision> {
    let a = sample_uniform_simplex(arms, rng)?;
    from_weight_vector(&a, budget)
}

/// Allocates uniformly at random every step.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    arms: usize,
}

impl RandomPolicy {
    pub fn new(arms: usize) -> Self {
        Self { arms }
    }
}

impl Policy for RandomPolicy {
    fn id(&self) -> PolicyId {
        PolicyId::Random
    }

    fn decide(&mut self, budget: f64, rng: &mut dyn RngCore) -> Result<AllocationDecision> {
        random_decision(self.arms, budget, rng)
    }

    fn observe(&mut self, _record: ObservationRecord) -> Result<()> {
        Ok(())
    }
}

/// Builds a fresh policy instance.
pub fn make_policy(id: PolicyId, arms: usize, config: &BoraConfig) -> Box<dyn Policy> {
    match id.bora_variant() {
        Some(variant) => Box::new(Bora::new(variant, arms, config.clone())),
        None if id == PolicyId::Sbf => Box::new(Sbf::new(arms)),
        None => Box::new(RandomPolicy::new(arms)),
    }
}
