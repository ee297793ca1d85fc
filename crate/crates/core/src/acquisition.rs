//! GP-UCB scoring and its maximization over feasible allocations.
//!
//! The feasible set `{x >= 0, sum x = b}` is the probability simplex scaled by
//! `b`, so one derivative-free search serves both the raw-allocation model
//! and the simplex models: a sweep of uniform simplex samples (plus the
//! training inputs mapped onto the simplex), then coordinate-exchange
//! refinement of the best few candidates.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gp::GpModel;
use crate::measures::{
    from_weight_vector, project_to_simplex, sample_uniform_simplex, AllocationDecision, WeightVector,
};

/// How the exploration weight `beta` is chosen at each step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum BetaSchedule {
    Fixed(f64),
    /// Exponential draw with mean `2 ln(t + 1)`.
    #[default]
    Randomized,
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed(v) if !(v >= 0.0 && v.is_finite()) => {
                Err(domain(format!("fixed beta must be finite and >= 0, got {v}")))
            }
            _ => Ok(()),
        }
    }
}

/// Exploration weight for step `t` (1-based).
pub fn sample_beta<R: Rng + ?Sized>(t: usize, schedule: &BetaSchedule, rng: &mut R) -> f64 {
    match *schedule {
        BetaSchedule::Fixed(v) => v,
        BetaSchedule::Randomized => {
            let mean = 2.0 * ((t.max(1) + 1) as f64).ln();
            Exp::new(1.0 / mean).expect("positive rate").sample(rng)
        }
    }
}

/// `mu(x) + sqrt(beta) * sigma(x)`.
pub fn ucb(model: &GpModel, point: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let (mean, var) = model.posterior(point)?;
    Ok(mean + beta.sqrt() * var.sqrt())
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("beta must be finite and >= 0, got {beta}")))
    }
}

/// Tuning of the acquisition search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub candidates: usize,
    pub refine_top: usize,
    pub initial_step: f64,
    pub final_step: f64,
    /// Improvement sweeps over all coordinate pairs per step size.
    pub max_sweeps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { candidates: 2048, refine_top: 8, initial_step: 0.1, final_step: 1e-4, max_sweeps: 4 }
    }
}

/// Maximizes UCB over `{x >= 0, sum x = budget}` for a model trained on raw
/// allocations.
pub fn maximize_ucb_budget<R: Rng + ?Sized>(
    model: &GpModel,
    budget: f64,
    beta: f64,
    rng: &mut R,
) -> Result<AllocationDecision> {
    maximize_ucb_budget_with(model, budget, beta, &SearchOptions::default(), rng)
}

pub fn maximize_ucb_budget_with<R: Rng + ?Sized>(
    model: &GpModel,
    budget: f64,
    beta: f64,
    options: &SearchOptions,
    rng: &mut R,
) -> Result<AllocationDecision> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(domain(format!("budget must be positive, got {budget}")));
    }
    check_beta(beta)?;
    let seeds = model
        .inputs()
        .iter()
        .filter_map(|x| {
            let total: f64 = x.iter().sum();
            (total > 0.0).then(|| x.iter().map(|v| v / total).collect())
        })
        .collect();
    let (a, _) = search(model, budget, beta, seeds, options, rng)?;
    from_weight_vector(&a, budget)
}

/// Maximizes UCB over the probability simplex for a model trained on weight
/// vectors.
pub fn maximize_ucb_simplex<R: Rng + ?Sized>(model: &GpModel, beta: f64, rng: &mut R) -> Result<WeightVector> {
    maximize_ucb_simplex_with(model, beta, &SearchOptions::default(), rng)
}

pub fn maximize_ucb_simplex_with<R: Rng + ?Sized>(
    model: &GpModel,
    beta: f64,
    options: &SearchOptions,
    rng: &mut R,
) -> Result<WeightVector> {
    check_beta(beta)?;
    let seeds = model.inputs().to_vec();
    search(model, 1.0, beta, seeds, options, rng).map(|(a, _)| a)
}

/// Returns the best simplex point found and its UCB, where a point `a` is
/// scored at `scale * a`. Ties keep the first point evaluated.
fn search<R: Rng + ?Sized>(
    model: &GpModel,
    scale: f64,
    beta: f64,
    seeds: Vec<Vec<f64>>,
    options: &SearchOptions,
    rng: &mut R,
) -> Result<(WeightVector, f64)> {
    let m = model.dim();
    if m < 2 {
        return Err(domain(format!("allocation search needs m >= 2, got {m}")));
    }
    let root_beta = beta.sqrt();
    let score = |a: &[f64]| {
        let point: Vec<f64> = a.iter().map(|w| w * scale).collect();
        let (mean, var) = model.posterior_unchecked(&point);
        mean + root_beta * var.sqrt()
    };

    let mut candidates: Vec<WeightVector> = Vec::with_capacity(options.candidates + seeds.len());
    for _ in 0..options.candidates.max(1) {
        candidates.push(sample_uniform_simplex(m, rng)?);
    }
    for s in seeds.iter().filter(|s| s.len() == m) {
        candidates.push(project_to_simplex(s)?);
    }
    let values: Vec<f64> = candidates.iter().map(|a| score(a.as_slice())).collect();

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // stable: equal scores keep evaluation order
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut best = (candidates[order[0]].clone(), values[order[0]]);

    for &idx in order.iter().take(options.refine_top) {
        let (a, v) = refine(candidates[idx].clone(), values[idx], options, &score)?;
        if v > best.1 {
            best = (a, v);
        }
    }
    Ok(best)
}

/// Coordinate exchange: move `step` mass from arm `i` to arm `j` whenever that
/// raises the score, halving `step` once no pair improves.
fn refine(
    start: WeightVector,
    value: f64,
    options: &SearchOptions,
    score: &impl Fn(&[f64]) -> f64,
) -> Result<(WeightVector, f64)> {
    let m = start.dim();
    let mut a = start.into_inner();
    let mut best = value;
    let mut step = options.initial_step;
    while step >= options.final_step {
        for _ in 0..options.max_sweeps {
            let mut improved = false;
            for i in 0..m {
                for j in 0..m {
                    if i == j || a[i] <= 0.0 {
                        continue;
                    }
                    let delta = step.min(a[i]);
                    let mut trial = a.clone();
                    trial[i] -= delta;
                    trial[j] += delta;
                    let trial = project_to_simplex(&trial)?.into_inner();
                    let v = score(&trial);
                    if v > best {
                        a = trial;
                        best = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step *= 0.5;
    }
    Ok((WeightVector::new(a)?, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn model_2d() -> GpModel {
        let spec = KernelSpec::se_anisotropic(1.0, vec![8.0, 8.0], 0.01).unwrap();
        let inputs = vec![vec![5.0, 28.9], vec![12.0, 21.9], vec![20.0, 13.9], vec![25.0, 8.9], vec![31.0, 2.9]];
        GpModel::condition(spec, inputs, vec![0.8, 0.9, 1.1, 1.3, 0.9]).unwrap()
    }

    #[test]
    fn ucb_arithmetic() {
        let model = model_2d();
        let x = [17.0, 16.9];
        let (mean, var) = model.posterior(&x).unwrap();
        assert_eq!(ucb(&model, &x, 0.0).unwrap(), mean);
        assert!((ucb(&model, &x, 4.0).unwrap() - (mean + 2.0 * var.sqrt())).abs() < 1e-15);
        assert!(ucb(&model, &x, -1.0).is_err());
        let mut last = f64::MIN;
        for beta in [0.0, 0.5, 1.0, 4.0, 16.0] {
            let u = ucb(&model, &x, beta).unwrap();
            assert!(u >= last);
            last = u;
        }
    }

    #[test]
    fn ucb_with_known_moments() {
        // single noise-free observation queried at its own input: mu = 1, sigma ~ 0
        let spec = KernelSpec::se_isotropic(0.25, 1.0, 0.0).unwrap();
        let prior = GpModel::prior(spec.clone(), 1).unwrap();
        // prior: mu = 0, sigma = 0.5
        assert!((ucb(&prior, &[0.0], 4.0).unwrap() - 1.0).abs() < 1e-15);
        let m = GpModel::condition(spec, vec![vec![0.0]], vec![1.0]).unwrap();
        assert!((ucb(&m, &[0.0], 0.0).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn beta_sampling() {
        let mut r = rng(1);
        assert_eq!(sample_beta(5, &BetaSchedule::Fixed(2.0), &mut r), 2.0);
        let n = 10_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_beta(1, &BetaSchedule::Randomized, &mut r)).collect();
        assert!(draws.iter().all(|b| *b >= 0.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let expected = 2.0 * 2f64.ln();
        assert!((mean / expected - 1.0).abs() < 0.05, "mean {mean}");
        assert!(BetaSchedule::Fixed(-1.0).validate().is_err());
    }

    #[test]
    fn untrained_model_gives_feasible_point() {
        let spec = KernelSpec::se_anisotropic(1.0, vec![1.0; 3], 0.0).unwrap();
        let model = GpModel::prior(spec, 3).unwrap();
        let x = maximize_ucb_budget(&model, 9.0, 1.0, &mut rng(2)).unwrap();
        assert!((x.amounts().iter().sum::<f64>() - 9.0).abs() < 1e-9);
        assert!(x.amounts().iter().all(|v| *v >= 0.0));
        let a = maximize_ucb_simplex(&model, 1.0, &mut rng(2)).unwrap();
        assert!((a.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(maximize_ucb_budget(&model, 0.0, 1.0, &mut rng(2)).is_err());
    }

    #[test]
    fn budget_search_matches_segment_grid() {
        let model = model_2d();
        let budget = 33.9;
        for beta in [0.0, 1.0, 4.0] {
            let x = maximize_ucb_budget(&model, budget, beta, &mut rng(3)).unwrap();
            let found = ucb(&model, x.amounts(), beta).unwrap();
            let grid = (0..=33_900)
                .map(|k| {
                    let x1 = k as f64 * 1e-3;
                    ucb(&model, &[x1, budget - x1], beta).unwrap()
                })
                .fold(f64::MIN, f64::max);
            assert!(found >= grid - 1e-4, "beta {beta}: {found} vs grid {grid}");
        }
    }

    #[test]
    fn budget_search_finds_vertex_optimum() {
        let b = 40.0;
        let spec = KernelSpec::se_anisotropic(1.0, vec![15.0, 15.0], 1e-6).unwrap();
        let model = GpModel::condition(spec, vec![vec![b, 0.0], vec![0.0, b]], vec![5.0, -5.0]).unwrap();
        let x = maximize_ucb_budget(&model, b, 0.0, &mut rng(4)).unwrap();
        let grid_best = (0..=40_000)
            .map(|k| k as f64 * 1e-3)
            .max_by(|p, q| {
                let up = ucb(&model, &[*p, b - p], 0.0).unwrap();
                let uq = ucb(&model, &[*q, b - q], 0.0).unwrap();
                up.total_cmp(&uq)
            })
            .unwrap();
        assert!((grid_best - b).abs() < 1e-9);
        assert!((x.amounts()[0] - b).abs() < 1e-2, "{:?}", x.amounts());
    }

    #[test]
    fn simplex_search_matches_grid() {
        let spec = KernelSpec::se_anisotropic(1.0, vec![0.2, 0.2], 0.01).unwrap();
        let inputs = vec![vec![0.1, 0.9], vec![0.45, 0.55], vec![0.7, 0.3], vec![0.95, 0.05]];
        let model = GpModel::condition(spec, inputs, vec![0.2, 1.0, 0.6, -0.4]).unwrap();
        for beta in [0.0, 2.0] {
            let a = maximize_ucb_simplex(&model, beta, &mut rng(5)).unwrap();
            let found = ucb(&model, a.as_slice(), beta).unwrap();
            let grid = (0..=10_000)
                .map(|k| {
                    let t = k as f64 * 1e-4;
                    ucb(&model, &[t, 1.0 - t], beta).unwrap()
                })
                .fold(f64::MIN, f64::max);
            assert!(found >= grid - 1e-4);
        }
    }

    #[test]
    fn simplex_search_finds_interior_peak() {
        let c = 1.0 / 3.0;
        let spec = KernelSpec::se_isotropic(1.0, 0.3, 1e-6).unwrap();
        let inputs = vec![vec![c, c, c], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let model = GpModel::condition(spec, inputs, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let a = maximize_ucb_simplex(&model, 0.0, &mut rng(6)).unwrap();

        // dense Dirichlet oracle for the location of the peak
        let mut r = rng(60);
        let mut oracle = (vec![0.0; 3], f64::MIN);
        for _ in 0..1_000_000 {
            let s = sample_uniform_simplex(3, &mut r).unwrap();
            let u = model.posterior_unchecked(s.as_slice()).0;
            if u > oracle.1 {
                oracle = (s.into_inner(), u);
            }
        }
        let l1 = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>();
        assert!(l1(&oracle.0, &[c, c, c]) < 0.05);
        assert!(l1(a.as_slice(), &[c, c, c]) < 0.05, "{:?}", a.as_slice());
    }

    #[test]
    fn search_is_reproducible() {
        let model = model_2d();
        let x1 = maximize_ucb_budget(&model, 33.9, 2.0, &mut rng(8)).unwrap();
        let x2 = maximize_ucb_budget(&model, 33.9, 2.0, &mut rng(8)).unwrap();
        assert_eq!(x1, x2);
    }
}
