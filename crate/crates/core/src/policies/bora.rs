use rand::{Rng, RngCore};

use super::{random_decision, ObservationRecord, Policy, PolicyId};
use crate::acquisition::{
    maximize_ucb_budget_with, maximize_ucb_simplex_with, sample_beta, BetaSchedule, SearchOptions,
};
use crate::error::{domain, Error, Result};
use crate::gp::{fit_gp_with, FitOptions, GpModel, KernelKind};
use crate::measures::{from_weight_vector, to_weight_vector, AllocationDecision, DEFAULT_WASSERSTEIN_P};

/// Which surrogate a BORA policy builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoraVariant {
    /// SE GP on raw allocations, UCB maximized on the budget hyperplane.
    Bora1,
    /// SE GP on weight vectors `x / b`, UCB maximized over the simplex.
    Bora2,
    /// As `Bora2` with the Wasserstein-SE kernel.
    Bora3,
}

impl BoraVariant {
    pub fn id(&self) -> PolicyId {
        match self {
            Self::Bora1 => PolicyId::Bora1,
            Self::Bora2 => PolicyId::Bora2,
            Self::Bora3 => PolicyId::Bora3,
        }
    }

    fn kernel(&self, p: f64) -> KernelKind {
        match self {
            Self::Bora1 | Self::Bora2 => KernelKind::SeAnisotropic,
            Self::Bora3 => KernelKind::WassersteinSe { p },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoraConfig {
    /// Random feasible decisions before the first GP fit.
    pub n_init: usize,
    pub beta: BetaSchedule,
    pub wasserstein_p: f64,
    pub fit: FitOptions,
    pub search: SearchOptions,
}

impl Default for BoraConfig {
    fn default() -> Self {
        Self {
            n_init: 3,
            beta: BetaSchedule::Randomized,
            wasserstein_p: DEFAULT_WASSERSTEIN_P,
            fit: FitOptions::default(),
            search: SearchOptions::default(),
        }
    }
}

/// Where a past decision lives in the surrogate's input space.
pub fn query_point(variant: BoraVariant, decision: &AllocationDecision) -> Result<Vec<f64>> {
    match variant {
        BoraVariant::Bora1 => Ok(decision.amounts().to_vec()),
        BoraVariant::Bora2 | BoraVariant::Bora3 => Ok(to_weight_vector(decision)?.into_inner()),
    }
}

/// Fits the variant's GP to `(decision, reward)` pairs. Per-arm outcomes are
/// never read.
pub fn fit_surrogate<R: Rng + ?Sized>(
    variant: BoraVariant,
    history: &[ObservationRecord],
    config: &BoraConfig,
    rng: &mut R,
) -> Result<GpModel> {
    let inputs = history.iter().map(|r| query_point(variant, &r.decision)).collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = history.iter().map(|r| r.reward).collect();
    fit_gp_with(&inputs, &targets, variant.kernel(config.wasserstein_p), &config.fit, rng)
}

/// One BORA step for `arms` arms under `budget`.
pub fn bora_decide<R: Rng + ?Sized>(
    variant: BoraVariant,
    history: &[ObservationRecord],
    arms: usize,
    budget: f64,
    config: &BoraConfig,
    rng: &mut R,
) -> Result<AllocationDecision> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(domain(format!("budget must be positive, got {budget}")));
    }
    if history.iter().any(|r| r.decision.dim() != arms) {
        return Err(domain("history decisions do not match the number of arms"));
    }
    if history.len() < config.n_init.max(2) {
        return random_decision(arms, budget, rng);
    }
    let model = match fit_surrogate(variant, history, config, rng) {
        Ok(model) => model,
        Err(Error::Fit(msg)) => {
            log::warn!("{:?}: GP fit failed ({msg}); falling back to a random allocation", variant);
            return random_decision(arms, budget, rng);
        }
        Err(e) => return Err(e),
    };
    let beta = sample_beta(history.len() + 1, &config.beta, rng);
    match variant {
        BoraVariant::Bora1 => maximize_ucb_budget_with(&model, budget, beta, &config.search, rng),
        BoraVariant::Bora2 | BoraVariant::Bora3 => {
            let a = maximize_ucb_simplex_with(&model, beta, &config.search, rng)?;
            from_weight_vector(&a, budget)
        }
    }
}

pub fn bora1_decide<R: Rng + ?Sized>(
    history: &[ObservationRecord],
    arms: usize,
    budget: f64,
    config: &BoraConfig,
    rng: &mut R,
) -> Result<AllocationDecision> {
    bora_decide(BoraVariant::Bora1, history, arms, budget, config, rng)
}

pub fn bora2_decide<R: Rng + ?Sized>(
    history: &[ObservationRecord],
    arms: usize,
    budget: f64,
    config: &BoraConfig,
    rng: &mut R,
) -> Result<AllocationDecision> {
    bora_decide(BoraVariant::Bora2, history, arms, budget, config, rng)
}

pub fn bora3_decide<R: Rng + ?Sized>(
    history: &[ObservationRecord],
    arms: usize,
    budget: f64,
    config: &BoraConfig,
    rng: &mut R,
) -> Result<AllocationDecision> {
    bora_decide(BoraVariant::Bora3, history, arms, budget, config, rng)
}

/// Stateful BORA policy accumulating its own history.
#[derive(Debug, Clone)]
pub struct Bora {
    variant: BoraVariant,
    arms: usize,
    config: BoraConfig,
    history: Vec<ObservationRecord>,
}

impl Bora {
    pub fn new(variant: BoraVariant, arms: usize, config: BoraConfig) -> Self {
        Self { variant, arms, config, history: Vec::new() }
    }

    pub fn history(&self) -> &[ObservationRecord] {
        &self.history
    }
}

impl Policy for Bora {
    fn id(&self) -> PolicyId {
        self.variant.id()
    }

    fn decide(&mut self, budget: f64, rng: &mut dyn RngCore) -> Result<AllocationDecision> {
        bora_decide(self.variant, &self.history, self.arms, budget, &self.config, rng)
    }

    fn observe(&mut self, record: ObservationRecord) -> Result<()> {
        // reward-only feedback: per-arm outcomes are dropped on entry
        self.history.push(ObservationRecord { per_arm_outcomes: None, ..record });
        Ok(())
    }
}
