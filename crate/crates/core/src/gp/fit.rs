//! Type-II maximum likelihood for kernel hyperparameters.
//!
//! Multi-start compass (pattern) search over log-hyperparameters. Each start
//! polls `+/- step` along every coordinate, accepts the first improvement, and
//! halves the step after a full unsuccessful poll.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use std::f64::consts::PI;

use super::{GpModel, KernelKind, KernelSpec, JITTER_MAX, JITTER_START};
use crate::error::{domain, Error, Result};
use crate::measures::half_l1;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Total number of starts, the default initialization included.
    pub starts: usize,
    pub max_evals_per_start: usize,
    pub noise_floor: f64,
    /// Search stops once the log-space step falls below this.
    pub min_step: f64,
    /// Bounds on the signal variance of the standardized targets.
    pub signal_bounds: (f64, f64),
    /// Bounds on each lengthscale as multiples of the input range along it.
    pub lengthscale_bounds: (f64, f64),
    /// Upper bound on the noise variance of the standardized targets.
    pub noise_max: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            max_evals_per_start: 200,
            noise_floor: 1e-6,
            min_step: 1e-3,
            signal_bounds: (1e-3, 1e3),
            // shorter scales let the surrogate chase single noisy rewards
            lengthscale_bounds: (0.1, 10.0),
            noise_max: 1e2,
        }
    }
}

/// Fits kernel hyperparameters to `(inputs, targets)` by maximizing the log
/// marginal likelihood of the standardized targets, with default options.
pub fn fit_gp<R: Rng + ?Sized>(inputs: &[Vec<f64>], targets: &[f64], kind: KernelKind, rng: &mut R) -> Result<GpModel> {
    fit_gp_with(inputs, targets, kind, &FitOptions::default(), rng)
}

pub fn fit_gp_with<R: Rng + ?Sized>(
    inputs: &[Vec<f64>],
    targets: &[f64],
    kind: KernelKind,
    options: &FitOptions,
    rng: &mut R,
) -> Result<GpModel> {
    if inputs.len() < 2 {
        return Err(domain(format!("fitting needs >= 2 points, got {}", inputs.len())));
    }
    if inputs.len() != targets.len() {
        return Err(domain(format!("{} inputs but {} targets", inputs.len(), targets.len())));
    }
    if targets.iter().any(|y| !y.is_finite()) {
        return Err(domain("targets must be finite"));
    }
    let ordered = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi && hi.is_finite();
    if !(ordered(options.signal_bounds) && ordered(options.lengthscale_bounds) && options.noise_max > 0.0) {
        return Err(domain("hyperparameter bounds must be positive and ordered"));
    }
    let dim = inputs[0].len();
    if dim == 0 || inputs.iter().any(|x| x.len() != dim) {
        return Err(domain("training inputs have inconsistent dimensions"));
    }
    if matches!(kind, KernelKind::WassersteinSe { .. }) && dim < 2 {
        return Err(domain("Wasserstein kernel needs weight vectors of dimension >= 2"));
    }
    if let KernelKind::WassersteinSe { p } = kind {
        if !(p > 0.0 && p.is_finite()) {
            return Err(domain("Wasserstein order must be in (0, inf)"));
        }
    }

    let n = targets.len() as f64;
    let offset = targets.iter().sum::<f64>() / n;
    let sd = (targets.iter().map(|y| (y - offset).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 1e-12 { sd } else { 1.0 };
    let standardized: Vec<f64> = targets.iter().map(|y| (y - offset) / scale).collect();

    let objective = Objective::new(inputs, &standardized, kind);
    let ranges = objective.ranges();
    let floor = options.noise_floor.max(0.0);
    let noise_lo = floor.max(1e-12).ln();
    let mut lower = vec![options.signal_bounds.0.ln()];
    let mut upper = vec![options.signal_bounds.1.ln()];
    for r in &ranges {
        lower.push((options.lengthscale_bounds.0 * r).ln());
        upper.push((options.lengthscale_bounds.1 * r).ln());
    }
    lower.push(noise_lo);
    upper.push(options.noise_max.ln().max(noise_lo));

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in 0..options.starts.max(1) {
        let theta0: Vec<f64> = if start == 0 {
            let mut t = vec![0.0];
            t.extend(ranges.iter().map(|r| (0.2 * r).ln()));
            t.push(1e-4f64.max(floor).ln());
            t
        } else {
            let log_uniform = |rng: &mut R| rng.random_range(-2.0..2.0) * std::f64::consts::LN_10;
            let mut t = vec![log_uniform(rng)];
            t.extend(ranges.iter().map(|r| r.ln() + log_uniform(rng)));
            t.push(log_uniform(rng));
            t
        };
        let theta0: Vec<f64> =
            theta0.iter().zip(lower.iter().zip(&upper)).map(|(t, (lo, hi))| t.clamp(*lo, *hi)).collect();
        let (theta, value) = pattern_search(&objective, theta0, &lower, &upper, options);
        if value.is_finite() && best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((theta, value));
        }
    }

    let Some((theta, _)) = best else {
        return Err(Error::Fit("no hyperparameter setting gave a factorizable Gram matrix".into()));
    };
    let spec = objective.spec_from(&theta);
    GpModel::with_normalization(spec, inputs.to_vec(), targets.to_vec(), offset, scale)
}

fn pattern_search(
    objective: &Objective,
    mut theta: Vec<f64>,
    lower: &[f64],
    upper: &[f64],
    options: &FitOptions,
) -> (Vec<f64>, f64) {
    let mut value = objective.log_marginal(&theta);
    let mut evals = 1;
    let mut step = 1.0;
    while evals < options.max_evals_per_start && step >= options.min_step {
        let mut improved = false;
        'dims: for d in 0..theta.len() {
            for dir in [1.0, -1.0] {
                if evals >= options.max_evals_per_start {
                    break 'dims;
                }
                let moved = (theta[d] + dir * step).clamp(lower[d], upper[d]);
                if moved == theta[d] {
                    continue;
                }
                let mut candidate = theta.clone();
                candidate[d] = moved;
                let v = objective.log_marginal(&candidate);
                evals += 1;
                if v > value || (!value.is_finite() && v.is_finite()) {
                    theta = candidate;
                    value = v;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (theta, value)
}

/// Pairwise input geometry cached once per fit, so that each likelihood
/// evaluation only rescales and exponentiates.
struct Objective<'a> {
    kind: KernelKind,
    targets: &'a [f64],
    n: usize,
    /// Number of scale parameters.
    width: usize,
    /// Lower-triangle pairs `(i, j), j < i` in row order, `width` entries
    /// each: squared coordinate differences (anisotropic), squared distance
    /// (isotropic) or `W_p^2` (Wasserstein).
    pairs: Vec<f64>,
    ranges: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(inputs: &[Vec<f64>], targets: &'a [f64], kind: KernelKind) -> Self {
        let n = inputs.len();
        let dim = inputs[0].len();
        let width = if kind == KernelKind::SeAnisotropic { dim } else { 1 };
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2 * width);
        for i in 0..n {
            for j in 0..i {
                let (x, y) = (&inputs[i], &inputs[j]);
                match kind {
                    KernelKind::SeAnisotropic => pairs.extend(x.iter().zip(y).map(|(a, b)| (a - b).powi(2))),
                    KernelKind::SeIsotropic => pairs.push(x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum()),
                    KernelKind::WassersteinSe { p } => pairs.push(half_l1(x, y).powf(2.0 / p)),
                }
            }
        }

        let coord_range = |d: usize| {
            let (lo, hi) =
                inputs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[d]), hi.max(x[d])));
            hi - lo
        };
        let raw: Vec<f64> = match kind {
            KernelKind::SeAnisotropic => (0..dim).map(coord_range).collect(),
            KernelKind::SeIsotropic => vec![(0..dim).map(coord_range).fold(0.0, f64::max)],
            KernelKind::WassersteinSe { .. } => {
                vec![pairs.iter().fold(0.0f64, |m, w2| m.max(w2.sqrt()))]
            }
        };
        let ranges = raw.into_iter().map(|r| if r > 1e-12 { r } else { 1.0 }).collect();
        Self { kind, targets, n, width, pairs, ranges }
    }

    fn ranges(&self) -> Vec<f64> {
        self.ranges.clone()
    }

    fn spec_from(&self, theta: &[f64]) -> KernelSpec {
        KernelSpec {
            kind: self.kind,
            signal_variance: theta[0].exp(),
            lengthscales: theta[1..1 + self.width].iter().map(|l| l.exp()).collect(),
            noise_variance: theta[1 + self.width].exp(),
        }
    }

    /// Log marginal likelihood at log-hyperparameters `theta`; `-inf` if the
    /// Gram matrix cannot be factorized.
    fn log_marginal(&self, theta: &[f64]) -> f64 {
        let sf = theta[0].exp();
        let inv_l2: Vec<f64> = theta[1..1 + self.width].iter().map(|l| (-2.0 * l).exp()).collect();
        let noise = theta[1 + self.width].exp();
        let n = self.n;
        let mut gram = DMatrix::zeros(n, n);
        let mut pair = 0;
        for i in 0..n {
            gram[(i, i)] = sf + noise;
            for j in 0..i {
                let entries = &self.pairs[pair * self.width..(pair + 1) * self.width];
                let e: f64 = entries.iter().zip(&inv_l2).map(|(d, w)| d * w).sum();
                let k = sf * (-0.5 * e).exp();
                gram[(i, j)] = k;
                gram[(j, i)] = k;
                pair += 1;
            }
        }
        let mut jitter = JITTER_START;
        loop {
            let mut m = gram.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(m) {
                let l = chol.l_dirty();
                let mut z = vec![0.0; n];
                let mut log_det_half = 0.0;
                for i in 0..n {
                    let mut s = self.targets[i];
                    for j in 0..i {
                        s -= l[(i, j)] * z[j];
                    }
                    z[i] = s / l[(i, i)];
                    log_det_half += l[(i, i)].ln();
                }
                return -0.5 * z.iter().map(|v| v * v).sum::<f64>() - log_det_half - 0.5 * n as f64 * (2.0 * PI).ln();
            }
            if jitter >= JITTER_MAX {
                return f64::NEG_INFINITY;
            }
            jitter *= 10.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_targets_are_interpolated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random(), rng.random()]).collect();
        let model = fit_gp(&inputs, &[3.25; 6], KernelKind::SeAnisotropic, &mut rng).unwrap();
        for x in &inputs {
            let (mean, _) = model.posterior(x).unwrap();
            assert!((mean - 3.25).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_improves_on_default_initialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(0.0..4.0)]).collect();
        let targets: Vec<f64> = inputs.iter().map(|x| (2.0 * x[0]).sin()).collect();
        let model = fit_gp(&inputs, &targets, KernelKind::SeIsotropic, &mut rng).unwrap();

        let mean = targets.iter().sum::<f64>() / 5.0;
        let sd = (targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 5.0).sqrt();
        let (lo, hi) = inputs.iter().fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x[0]), b.max(x[0])));
        let default = KernelSpec::se_isotropic(1.0, 0.2 * (hi - lo), 1e-4).unwrap();
        let baseline = GpModel::with_normalization(default, inputs.clone(), targets.clone(), mean, sd).unwrap();
        assert!(model.log_marginal_likelihood() >= baseline.log_marginal_likelihood());
    }

    #[test]
    fn recovers_lengthscale_of_generating_process() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let inputs: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random::<f64>()]).collect();
        let truth = KernelSpec::se_isotropic(1.0, 0.3, 1e-4).unwrap();
        let gram = super::super::gram_matrix(&truth, &inputs);
        let (factor, _) = super::super::factorize(gram, truth.noise_variance).unwrap();
        let z: Vec<f64> = (0..30).map(|_| rng.sample(StandardNormal)).collect();
        let targets: Vec<f64> = (0..30).map(|i| (0..=i).map(|j| factor[(i, j)] * z[j]).sum()).collect();
        let model = fit_gp(&inputs, &targets, KernelKind::SeIsotropic, &mut rng).unwrap();
        let l = model.spec().lengthscales[0];
        assert!(l > 0.15 && l < 0.6, "recovered lengthscale {l}");
    }

    #[test]
    fn rejects_tiny_training_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(fit_gp(&[vec![0.0]], &[1.0], KernelKind::SeIsotropic, &mut rng), Err(Error::Domain(_))));
        assert!(fit_gp(&[vec![0.0], vec![1.0]], &[1.0, f64::INFINITY], KernelKind::SeIsotropic, &mut rng).is_err());
    }

    #[test]
    fn colliding_weight_vectors_fit_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = vec![5.0 / 9.0, 1.0 / 3.0, 1.0 / 9.0];
        let inputs = vec![a.clone(), a, vec![0.2, 0.2, 0.6]];
        let targets = [1.0, 2.0, 0.0];
        for kind in [KernelKind::SeAnisotropic, KernelKind::WassersteinSe { p: 1.0 }] {
            let model = fit_gp(&inputs, &targets, kind, &mut rng).unwrap();
            assert!(model.spec().noise_variance >= 1e-6);
            assert!(model.log_marginal_likelihood().is_finite());
        }
    }
}
