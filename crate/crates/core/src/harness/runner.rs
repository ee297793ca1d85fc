//! Replicated policy-versus-environment runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::seed::{derive_rng, Stream};
use crate::environments::{BernoulliJobsEnv, BudgetProcess, CaseKind, LinearMarketingEnv};
use crate::error::{Error, Result};
use crate::measures::{AllocationDecision, SUM_TOLERANCE};
use crate::policies::{make_policy, ObservationRecord, PolicyId};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "BORA_WORKERS";

/// One step of one policy in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub budget: f64,
    pub amounts: Vec<f64>,
    pub reward: f64,
    pub cumulative_reward: f64,
    /// Expected reward of the decision under the true environment.
    pub expected_reward: f64,
    /// Best expected reward achievable at this step's budget.
    pub optimal_expected_reward: f64,
}

/// All steps of one policy in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub policy: PolicyId,
    pub run: usize,
    pub steps: Vec<StepRecord>,
}

impl RunTrace {
    pub fn final_cumulative(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cumulative_reward)
    }
}

enum Env {
    Jobs(BernoulliJobsEnv),
    Marketing(LinearMarketingEnv),
}

impl Env {
    fn build(config: &ExperimentConfig, run: usize, policy: PolicyId) -> Result<Self> {
        let rng = derive_rng(config.master_seed, run, Some(policy), Stream::Env);
        match config.case {
            CaseKind::BernoulliJobs => Ok(Self::Jobs(BernoulliJobsEnv::new(config.nu(), rng)?)),
            CaseKind::LinearMarketing => {
                let mut params = match config.env.eta_seed {
                    Some(seed) => ChaCha8Rng::seed_from_u64(seed),
                    None => derive_rng(config.master_seed, run, None, Stream::EnvParams),
                };
                let env = LinearMarketingEnv::draw_in(
                    config.m,
                    config.env.mu_range,
                    config.env.sigma_range,
                    &mut params,
                    rng,
                )?;
                Ok(Self::Marketing(env))
            }
        }
    }

    fn step(&mut self, x: &AllocationDecision) -> Result<(f64, Option<Vec<bool>>)> {
        match self {
            Self::Jobs(env) => {
                let (reward, outcomes) = env.step(x)?;
                Ok((reward as f64, Some(outcomes)))
            }
            Self::Marketing(env) => Ok((env.step(x)?, None)),
        }
    }

    fn expected(&self, x: &AllocationDecision) -> Result<f64> {
        match self {
            Self::Jobs(env) => env.expected_reward(x),
            Self::Marketing(env) => Ok(env.expected_returns().iter().zip(x.amounts()).map(|(e, v)| e * v).sum()),
        }
    }

    fn optimal(&self, budget: f64) -> f64 {
        match self {
            Self::Jobs(env) => env.optimal_expected_reward(budget),
            Self::Marketing(env) => budget * env.expected_returns().iter().fold(0.0, |m: f64, e| m.max(*e)),
        }
    }
}

/// Budget sequence shared by every policy of `run`.
pub fn budget_sequence(config: &ExperimentConfig, run: usize) -> Result<Vec<f64>> {
    let rng = derive_rng(config.master_seed, run, None, Stream::Budget);
    BudgetProcess::new(config.budget, rng)?.sequence(config.horizon)
}

/// Runs `policy` for the first `steps` budgets of `run` and returns its trace
/// together with the history the policy observed.
pub fn simulate(
    config: &ExperimentConfig,
    run: usize,
    policy: PolicyId,
    steps: usize,
) -> Result<(RunTrace, Vec<ObservationRecord>)> {
    let budgets = budget_sequence(config, run)?;
    let steps = steps.min(budgets.len());
    let mut env = Env::build(config, run, policy)?;
    let mut agent = make_policy(policy, config.m, &config.bora_config());
    let mut rng = derive_rng(config.master_seed, run, Some(policy), Stream::Policy);
    let mut history = Vec::with_capacity(steps);
    let mut records = Vec::with_capacity(steps);
    let mut cumulative = 0.0;
    for (i, &budget) in budgets[..steps].iter().enumerate() {
        let t = i + 1;
        let decision = agent.decide(budget, &mut rng)?;
        let (reward, outcomes) = env.step(&decision)?;
        cumulative += reward;
        records.push(StepRecord {
            t,
            budget,
            amounts: decision.amounts().to_vec(),
            reward,
            cumulative_reward: cumulative,
            expected_reward: env.expected(&decision)?,
            optimal_expected_reward: env.optimal(budget),
        });
        let observation = ObservationRecord::new(decision, reward, outcomes, t)?;
        agent.observe(observation.clone())?;
        history.push(observation);
    }
    Ok((RunTrace { policy, run, steps: records }, history))
}

/// Worker count from `BORA_WORKERS`, one when unset or invalid.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|n| *n >= 1).unwrap_or(1)
}

/// Runs every (policy, run) cell with the worker count from the environment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunTrace>> {
    run_experiment_with(config, workers_from_env())
}

/// Runs every (policy, run) cell on `workers` threads. Traces come back in
/// (policy, run) order whatever the worker count.
pub fn run_experiment_with(config: &ExperimentConfig, workers: usize) -> Result<Vec<RunTrace>> {
    config.validate()?;
    let cells: Vec<(PolicyId, usize)> =
        config.policies.iter().flat_map(|&p| (0..config.runs).map(move |r| (p, r))).collect();
    let run_cell = |&(policy, run): &(PolicyId, usize)| {
        log::info!("running {policy} run {run}");
        simulate(config, run, policy, config.horizon).map(|(trace, _)| trace)
    };
    let traces: Vec<RunTrace> = if workers <= 1 {
        cells.iter().map(run_cell).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run_cell).collect::<Result<_>>())?
    };
    audit(&traces)?;
    Ok(traces)
}

/// Checks budget equality, nonnegativity and the cumulative prefix sums of
/// every step.
pub fn audit(traces: &[RunTrace]) -> Result<()> {
    for trace in traces {
        let mut cumulative = 0.0;
        let mut previous = f64::NEG_INFINITY;
        for (i, s) in trace.steps.iter().enumerate() {
            let context = || format!("{} run {} step {}", trace.policy, trace.run, s.t);
            if s.t != i + 1 {
                return Err(Error::Invariant(format!("{}: steps out of order", context())));
            }
            if s.amounts.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Invariant(format!("{}: negative allocation", context())));
            }
            let total: f64 = s.amounts.iter().sum();
            if (total - s.budget).abs() > SUM_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "{}: allocations sum to {total}, budget {}",
                    context(),
                    s.budget
                )));
            }
            cumulative += s.reward;
            if (cumulative - s.cumulative_reward).abs() > SUM_TOLERANCE {
                return Err(Error::Invariant(format!("{}: cumulative reward is not the prefix sum", context())));
            }
            if s.cumulative_reward < previous {
                return Err(Error::Invariant(format!("{}: cumulative reward decreased", context())));
            }
            previous = s.cumulative_reward;
        }
    }
    Ok(())
}
