//! Simulated reward and budget processes.
//!
//! Environment parameters (`nu`, the return distributions) are private to
//! this module. Policies only ever see budgets and rewards through the
//! harness; the reference quantities exposed here (`expected_reward`,
//! `optimal_expected_reward`, [`oracle_best_static`]) exist for evaluation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::measures::AllocationDecision;

/// Jobs that complete with probability `min(1, x_i / nu_i)`.
#[derive(Debug, Clone)]
pub struct BernoulliJobsEnv {
    nu: Vec<f64>,
    rng: ChaCha8Rng,
}

impl BernoulliJobsEnv {
    pub fn new(nu: Vec<f64>, rng: ChaCha8Rng) -> Result<Self> {
        if nu.is_empty() || nu.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(domain("job difficulties must be positive"));
        }
        Ok(Self { nu, rng })
    }

    pub fn arms(&self) -> usize {
        self.nu.len()
    }

    /// Runs one step: returns the number of completed jobs and the per-job
    /// outcomes. Nothing carries over between steps.
    pub fn step(&mut self, x: &AllocationDecision) -> Result<(u32, Vec<bool>)> {
        self.check(x)?;
        let outcomes: Vec<bool> = x
            .amounts()
            .iter()
            .zip(&self.nu)
            .map(|(xi, nu)| {
                let p = (xi / nu).min(1.0);
                // p == 1 must always succeed; random() is in [0, 1)
                self.rng.random::<f64>() < p
            })
            .collect();
        Ok((outcomes.iter().filter(|o| **o).count() as u32, outcomes))
    }

    /// `sum_i min(1, x_i / nu_i)`.
    pub fn expected_reward(&self, x: &AllocationDecision) -> Result<f64> {
        self.check(x)?;
        Ok(x.amounts().iter().zip(&self.nu).map(|(xi, nu)| (xi / nu).min(1.0)).sum())
    }

    /// Best expected reward at `budget`: fill the easiest jobs first.
    pub fn optimal_expected_reward(&self, budget: f64) -> f64 {
        let mut nu = self.nu.clone();
        nu.sort_by(f64::total_cmp);
        let mut remaining = budget;
        let mut total = 0.0;
        for v in nu {
            let give = remaining.min(v);
            total += give / v;
            remaining -= give;
            if remaining <= 0.0 {
                break;
            }
        }
        total
    }

    fn check(&self, x: &AllocationDecision) -> Result<()> {
        if x.dim() != self.nu.len() {
            return Err(domain(format!("decision has {} arms, environment has {}", x.dim(), self.nu.len())));
        }
        Ok(())
    }
}

/// Channels returning `eta_i * x_i` with `eta_i = max(0, N(mu_i, sigma_i))`
/// drawn afresh every step.
#[derive(Debug, Clone)]
pub struct LinearMarketingEnv {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    rng: ChaCha8Rng,
}

impl LinearMarketingEnv {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, rng: ChaCha8Rng) -> Result<Self> {
        if mu.is_empty() || mu.len() != sigma.len() {
            return Err(domain("return means and deviations must have equal, nonzero length"));
        }
        if mu.iter().chain(&sigma).any(|v| !v.is_finite()) || sigma.iter().any(|s| *s < 0.0) {
            return Err(domain("return parameters must be finite with nonnegative deviations"));
        }
        Ok(Self { mu, sigma, rng })
    }

    /// Draws `mu_i ~ U(0, 1)` and `sigma_i ~ U(0, 0.2)` from `params_rng`.
    pub fn draw<R: Rng + ?Sized>(m: usize, params_rng: &mut R, rng: ChaCha8Rng) -> Result<Self> {
        Self::draw_in(m, (0.0, 1.0), (0.0, 0.2), params_rng, rng)
    }

    /// Draws `mu_i ~ U(mu_range)` and `sigma_i ~ U(sigma_range)`.
    pub fn draw_in<R: Rng + ?Sized>(
        m: usize,
        mu_range: (f64, f64),
        sigma_range: (f64, f64),
        params_rng: &mut R,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        let mu = (0..m).map(|_| uniform(params_rng, mu_range)).collect();
        let sigma = (0..m).map(|_| uniform(params_rng, sigma_range)).collect();
        Self::new(mu, sigma, rng)
    }

    pub fn arms(&self) -> usize {
        self.mu.len()
    }

    /// Draws this step's per-channel returns.
    pub fn draw_returns(&mut self) -> Vec<f64> {
        self.mu
            .iter()
            .zip(&self.sigma)
            .map(|(mu, sigma)| {
                let z: f64 = self.rng.sample(StandardNormal);
                (mu + sigma * z).max(0.0)
            })
            .collect()
    }

    pub fn step(&mut self, x: &AllocationDecision) -> Result<f64> {
        if x.dim() != self.mu.len() {
            return Err(domain(format!("decision has {} arms, environment has {}", x.dim(), self.mu.len())));
        }
        let eta = self.draw_returns();
        marketing_reward(&eta, x.amounts())
    }

    /// `E[max(0, N(mu_i, sigma_i))]` per channel.
    pub fn expected_returns(&self) -> Vec<f64> {
        self.mu.iter().zip(&self.sigma).map(|(&mu, &sigma)| rectified_normal_mean(mu, sigma)).collect()
    }
}

/// `sum_i eta_i x_i` for given per-channel returns.
pub fn marketing_reward(eta: &[f64], x: &[f64]) -> Result<f64> {
    if eta.len() != x.len() {
        return Err(domain("returns and allocation differ in length"));
    }
    Ok(eta.iter().zip(x).map(|(e, v)| e * v).sum())
}

/// Mean of `max(0, N(mu, sigma))`: `mu Phi(mu/sigma) + sigma phi(mu/sigma)`.
pub fn rectified_normal_mean(mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.max(0.0);
    }
    let std = Normal::standard();
    let z = mu / sigma;
    mu * std.cdf(z) + sigma * std.pdf(z)
}

/// Best single-channel static policy in expectation:
/// `sum_t b_t * E[eta_{i*}]`, lowest index on ties.
pub fn oracle_best_static(env: &LinearMarketingEnv, budgets: &[f64]) -> f64 {
    let returns = env.expected_returns();
    let best = returns.iter().fold(f64::NEG_INFINITY, |m, r| if *r > m { *r } else { m });
    budgets.iter().sum::<f64>() * best
}

/// Index of the channel picked by [`oracle_best_static`].
pub fn best_static_channel(env: &LinearMarketingEnv) -> usize {
    let returns = env.expected_returns();
    let mut best = 0;
    for (i, r) in returns.iter().enumerate() {
        if *r > returns[best] {
            best = i;
        }
    }
    best
}

/// Which reward process an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    BernoulliJobs,
    LinearMarketing,
}

/// Cumulative reward if every job completes at every step: `m, 2m, .., T m`.
pub fn utopic_cumulative(case: CaseKind, m: usize, horizon: usize) -> Result<Vec<f64>> {
    match case {
        CaseKind::BernoulliJobs => Ok((1..=horizon).map(|t| (t * m) as f64).collect()),
        CaseKind::LinearMarketing => Err(Error::Contract("no utopic curve is defined for the marketing case".into())),
    }
}

/// Budget generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BudgetMode {
    Constant(f64),
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Independent normal draws, resampled until above `floor`.
    Gaussian {
        mean: f64,
        sd: f64,
        floor: f64,
    },
    /// One floored normal draw at the first step, then held constant.
    GaussianHeld {
        mean: f64,
        sd: f64,
        floor: f64,
    },
}

impl BudgetMode {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            Self::Constant(b) if !(b > 0.0 && b.is_finite()) => {
                bad(format!("constant budget must be positive, got {b}"))
            }
            Self::Uniform { lo, hi } if !(lo > 0.0 && hi >= lo && hi.is_finite()) => {
                bad(format!("uniform budget needs 0 < lo <= hi, got [{lo}, {hi}]"))
            }
            Self::Gaussian { mean, sd, floor } | Self::GaussianHeld { mean, sd, floor }
                if !(sd >= 0.0 && sd.is_finite() && mean.is_finite() && floor >= 0.0) =>
            {
                bad(format!(
                    "gaussian budget needs finite mean, sd >= 0, floor >= 0 (mean {mean}, sd {sd}, floor {floor})"
                ))
            }
            Self::Gaussian { mean, sd, floor } | Self::GaussianHeld { mean, sd, floor }
                if sd == 0.0 && mean <= floor =>
            {
                bad(format!("degenerate gaussian budget {mean} never exceeds floor {floor}"))
            }
            _ => Ok(()),
        }
    }
}

/// Emits the budget for each step.
#[derive(Debug, Clone)]
pub struct BudgetProcess {
    mode: BudgetMode,
    rng: ChaCha8Rng,
    held: Option<f64>,
}

impl BudgetProcess {
    pub fn new(mode: BudgetMode, rng: ChaCha8Rng) -> Result<Self> {
        mode.validate()?;
        Ok(Self { mode, rng, held: None })
    }

    pub fn next_budget(&mut self, t: usize) -> Result<f64> {
        if t < 1 {
            return Err(domain("steps are numbered from 1"));
        }
        Ok(match self.mode {
            BudgetMode::Constant(b) => b,
            BudgetMode::Uniform { lo, hi } => {
                if hi > lo {
                    self.rng.random_range(lo..=hi)
                } else {
                    lo
                }
            }
            BudgetMode::Gaussian { mean, sd, floor } => self.floored_normal(mean, sd, floor),
            BudgetMode::GaussianHeld { mean, sd, floor } => match self.held {
                Some(b) => b,
                None => {
                    let b = self.floored_normal(mean, sd, floor);
                    self.held = Some(b);
                    b
                }
            },
        })
    }

    /// The first `horizon` budgets.
    pub fn sequence(&mut self, horizon: usize) -> Result<Vec<f64>> {
        (1..=horizon).map(|t| self.next_budget(t)).collect()
    }

    fn floored_normal(&mut self, mean: f64, sd: f64, floor: f64) -> f64 {
        loop {
            let z: f64 = self.rng.sample(StandardNormal);
            let b = mean + sd * z;
            if b > floor {
                return b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn alloc(x: &[f64]) -> AllocationDecision {
        AllocationDecision::new(x.to_vec(), x.iter().sum()).unwrap()
    }

    #[test]
    fn saturated_jobs_always_complete() {
        let mut env = BernoulliJobsEnv::new(vec![25.0, 50.0, 10.0], rng(1)).unwrap();
        for _ in 0..1000 {
            let (reward, outcomes) = env.step(&alloc(&[25.0, 50.0, 10.0])).unwrap();
            assert_eq!(reward, 3);
            assert!(outcomes.iter().all(|o| *o));
        }
        for _ in 0..1000 {
            let (_, outcomes) = env.step(&alloc(&[35.0, 0.0, 50.0])).unwrap();
            assert!(!outcomes[1]);
        }
        assert!(env.step(&alloc(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn bernoulli_mean_reward() {
        let mut env = BernoulliJobsEnv::new(vec![25.0, 50.0], rng(2)).unwrap();
        let x = alloc(&[25.0, 8.9]);
        let n = 100_000;
        let total: u64 = (0..n).map(|_| env.step(&x).unwrap().0 as u64).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 1.178).abs() < 0.01, "mean {mean}");
        assert!((env.expected_reward(&x).unwrap() - 1.178).abs() < 1e-12);
        assert!((env.optimal_expected_reward(33.9) - 1.178).abs() < 1e-12);
    }

    #[test]
    fn marketing_rewards() {
        let mut env = LinearMarketingEnv::new(vec![0.5, 0.1, 0.3], vec![0.0; 3], rng(3)).unwrap();
        assert_eq!(env.step(&alloc(&[10.0, 0.0, 0.0])).unwrap(), 5.0);
        let mut zero = LinearMarketingEnv::new(vec![0.0; 2], vec![0.0; 2], rng(3)).unwrap();
        assert_eq!(zero.step(&alloc(&[3.0, 4.0])).unwrap(), 0.0);
        assert!(env.step(&alloc(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn marketing_mean_matches_rectified_normal() {
        let mut env = LinearMarketingEnv::new(vec![0.5], vec![0.2], rng(4)).unwrap();
        let x = AllocationDecision::new(vec![10.0], 10.0).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| env.step(&x).unwrap()).sum::<f64>() / n as f64;

        // trapezoidal quadrature of max(0, v) * phi((v - 0.5) / 0.2) / 0.2
        let h = 1e-5;
        let density =
            |v: f64| (-0.5 * ((v - 0.5) / 0.2f64).powi(2)).exp() / (0.2 * (2.0 * std::f64::consts::PI).sqrt());
        let quad: f64 = (0..200_000)
            .map(|k| {
                let v0 = k as f64 * h;
                let v1 = v0 + h;
                0.5 * h * (v0 * density(v0) + v1 * density(v1))
            })
            .sum();
        assert!((rectified_normal_mean(0.5, 0.2) - quad).abs() < 1e-8);
        assert!((mean / (10.0 * quad) - 1.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn budgets() {
        let mut constant = BudgetProcess::new(BudgetMode::Constant(33.9), rng(5)).unwrap();
        assert!(constant.sequence(100).unwrap().iter().all(|b| *b == 33.9));

        let mut uniform = BudgetProcess::new(BudgetMode::Uniform { lo: 10.0, hi: 100.0 }, rng(6)).unwrap();
        let draws = uniform.sequence(10_000).unwrap();
        assert!(draws.iter().all(|b| (10.0..=100.0).contains(b)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 55.0).abs() < 1.0);

        let mut gauss = BudgetProcess::new(BudgetMode::Gaussian { mean: 50.0, sd: 10.0, floor: 1.0 }, rng(7)).unwrap();
        assert!(gauss.sequence(10_000).unwrap().iter().all(|b| *b > 1.0));
        // a floor far in the upper tail still only emits values above it
        let mut tail = BudgetProcess::new(BudgetMode::Gaussian { mean: 50.0, sd: 10.0, floor: 65.0 }, rng(7)).unwrap();
        assert!(tail.sequence(200).unwrap().iter().all(|b| *b > 65.0));

        let mut held =
            BudgetProcess::new(BudgetMode::GaussianHeld { mean: 50.0, sd: 10.0, floor: 1.0 }, rng(8)).unwrap();
        let seq = held.sequence(20).unwrap();
        assert!(seq.iter().all(|b| *b == seq[0]));

        assert!(BudgetProcess::new(BudgetMode::Uniform { lo: 10.0, hi: 5.0 }, rng(0)).is_err());
        assert!(BudgetProcess::new(BudgetMode::Gaussian { mean: 50.0, sd: -1.0, floor: 1.0 }, rng(0)).is_err());
        assert!(constant.next_budget(0).is_err());
    }

    #[test]
    fn seeded_budgets_reproduce() {
        let mode = BudgetMode::Uniform { lo: 10.0, hi: 100.0 };
        let a = BudgetProcess::new(mode, rng(9)).unwrap().sequence(50).unwrap();
        let b = BudgetProcess::new(mode, rng(9)).unwrap().sequence(50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn utopic_curves() {
        let u = utopic_cumulative(CaseKind::BernoulliJobs, 2, 100).unwrap();
        assert_eq!(*u.last().unwrap(), 200.0);
        assert!(u.windows(2).all(|w| w[1] - w[0] == 2.0));
        assert_eq!(*utopic_cumulative(CaseKind::BernoulliJobs, 20, 100).unwrap().last().unwrap(), 2000.0);
        assert!(matches!(utopic_cumulative(CaseKind::LinearMarketing, 15, 100), Err(Error::Contract(_))));
    }

    #[test]
    fn best_static_oracle() {
        let env = LinearMarketingEnv::new(vec![0.4], vec![0.1], rng(1)).unwrap();
        let budgets = [10.0, 20.0, 30.0];
        assert!((oracle_best_static(&env, &budgets) - 60.0 * rectified_normal_mean(0.4, 0.1)).abs() < 1e-12);

        let env = LinearMarketingEnv::new(vec![0.9, 0.1], vec![0.0, 0.0], rng(1)).unwrap();
        assert_eq!(best_static_channel(&env), 0);
        assert!((oracle_best_static(&env, &budgets) - 54.0).abs() < 1e-12);

        let tie = LinearMarketingEnv::new(vec![0.3, 0.3], vec![0.0, 0.0], rng(1)).unwrap();
        assert_eq!(best_static_channel(&tie), 0);
    }

    #[test]
    fn best_static_matches_monte_carlo() {
        let mut params = rng(21);
        let env = LinearMarketingEnv::draw(15, &mut params, rng(22)).unwrap();
        let budgets: Vec<f64> = (0..100).map(|t| 40.0 + (t % 7) as f64).collect();
        let oracle = oracle_best_static(&env, &budgets);
        let total_budget: f64 = budgets.iter().sum();
        // simulate every single-channel static policy for 10000 steps
        let mut sim = env.clone();
        let steps = 10_000;
        let mut best = f64::MIN;
        for i in 0..15 {
            let mut x = vec![0.0; 15];
            x[i] = 1.0;
            let x = AllocationDecision::new(x, 1.0).unwrap();
            let mean = (0..steps).map(|_| sim.step(&x).unwrap()).sum::<f64>() / steps as f64;
            best = best.max(mean * total_budget);
        }
        assert!((best / oracle - 1.0).abs() < 0.01, "mc {best} vs oracle {oracle}");
    }
}
