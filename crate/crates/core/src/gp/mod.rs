//! Gaussian-process regression with a zero-mean prior.
//!
//! Posterior mean and variance at a query `x` given training data `(X, y)`:
//!
//! ```text
//! mu(x)      = k(x, X) [K + s2 I]^-1 y
//! sigma2(x)  = k(x, x) - k(x, X) [K + s2 I]^-1 k(X, x)
//! ```
//!
//! The regularized Gram matrix is factorized once (Cholesky, with jitter
//! escalation when it is numerically singular) and reused by every query.

mod fit;
mod kernel;

pub use fit::{fit_gp, fit_gp_with, FitOptions};
pub use kernel::{se_kernel, wse_kernel, KernelKind, KernelSpec};

use nalgebra::{Cholesky, DMatrix};
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// First jitter added to the Gram diagonal.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter tried before a fit is declared singular.
pub const JITTER_MAX: f64 = 1e-4;

/// A conditioned Gaussian process.
///
/// Targets may be standardized internally (`offset`, `scale`); every public
/// quantity is reported on the original target scale, except the log
/// marginal likelihood, which is that of the standardized targets.
#[derive(Debug, Clone)]
pub struct GpModel {
    spec: KernelSpec,
    dim: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    offset: f64,
    scale: f64,
    jitter: f64,
    /// Transposed Cholesky factor of `K + (s2 + jitter) I`, so that row `i`
    /// of the lower factor is contiguous.
    factor_t: DMatrix<f64>,
    alpha: Vec<f64>,
    log_marginal: f64,
}

impl GpModel {
    /// A GP with no observations over inputs of dimension `dim`.
    pub fn prior(spec: KernelSpec, dim: usize) -> Result<Self> {
        spec.validate()?;
        spec.check_dim(dim)?;
        Ok(Self {
            spec,
            dim,
            inputs: Vec::new(),
            targets: Vec::new(),
            offset: 0.0,
            scale: 1.0,
            jitter: 0.0,
            factor_t: DMatrix::zeros(0, 0),
            alpha: Vec::new(),
            log_marginal: 0.0,
        })
    }

    /// Conditions the GP on `(inputs, targets)` with fixed hyperparameters
    /// and no target standardization.
    pub fn condition(spec: KernelSpec, inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        Self::with_normalization(spec, inputs, targets, 0.0, 1.0)
    }

    pub(crate) fn with_normalization(
        spec: KernelSpec,
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        offset: f64,
        scale: f64,
    ) -> Result<Self> {
        spec.validate()?;
        if inputs.is_empty() {
            return Err(domain("conditioning needs at least one observation"));
        }
        if inputs.len() != targets.len() {
            return Err(domain(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        let dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != dim) {
            return Err(domain("training inputs have inconsistent dimensions"));
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(domain("targets must be finite"));
        }
        spec.check_dim(dim)?;

        let gram = gram_matrix(&spec, &inputs);
        let (factor, jitter) = factorize(gram, spec.noise_variance)?;
        let factor_t = factor.transpose();
        let standardized: Vec<f64> = targets.iter().map(|y| (y - offset) / scale).collect();
        let z = forward_solve(&factor_t, &standardized);
        let alpha = backward_solve(&factor_t, &z);
        let n = targets.len();
        let log_det_half: f64 = (0..n).map(|i| factor_t[(i, i)].ln()).sum();
        let log_marginal =
            -0.5 * z.iter().map(|v| v * v).sum::<f64>() - log_det_half - 0.5 * n as f64 * (2.0 * PI).ln();
        Ok(Self { spec, dim, inputs, targets, offset, scale, jitter, factor_t, alpha, log_marginal })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Jitter that was needed on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Log marginal likelihood of the (standardized) training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal
    }

    /// Posterior `(mean, variance)` of the latent function at `query`.
    pub fn posterior(&self, query: &[f64]) -> Result<(f64, f64)> {
        if query.len() != self.dim {
            return Err(domain(format!("query has dimension {}, model expects {}", query.len(), self.dim)));
        }
        Ok(self.posterior_unchecked(query))
    }

    pub(crate) fn posterior_unchecked(&self, query: &[f64]) -> (f64, f64) {
        let prior_var = self.spec.signal_variance;
        if self.inputs.is_empty() {
            return (self.offset, self.scale * self.scale * prior_var);
        }
        let kstar: Vec<f64> = self.inputs.iter().map(|x| self.spec.eval(query, x)).collect();
        let mean: f64 = kstar.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let v = forward_solve(&self.factor_t, &kstar);
        let var = (prior_var - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (self.offset + self.scale * mean, self.scale * self.scale * var)
    }
}

/// Free-function form of [`GpModel::posterior`].
pub fn posterior(model: &GpModel, query: &[f64]) -> Result<(f64, f64)> {
    model.posterior(query)
}

/// Free-function form of [`GpModel::log_marginal_likelihood`].
pub fn log_marginal_likelihood(model: &GpModel) -> f64 {
    model.log_marginal_likelihood()
}

/// Noise-free Gram matrix `K_ij = k(x_i, x_j)`.
pub fn gram_matrix(spec: &KernelSpec, inputs: &[Vec<f64>]) -> DMatrix<f64> {
    let n = inputs.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        gram[(i, i)] = spec.signal_variance;
        for j in 0..i {
            let k = spec.eval(&inputs[i], &inputs[j]);
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }
    gram
}

/// Cholesky factor of `gram + (noise + jitter) I` with jitter escalating from
/// [`JITTER_START`] by factors of ten up to [`JITTER_MAX`]. Returns the lower
/// factor and the jitter used.
pub(crate) fn factorize(gram: DMatrix<f64>, noise: f64) -> Result<(DMatrix<f64>, f64)> {
    let mut jitter = JITTER_START;
    loop {
        let mut m = gram.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += noise + jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol.unpack(), jitter));
        }
        if jitter >= JITTER_MAX {
            return Err(Error::Fit(format!("Gram matrix is not positive definite even with jitter {JITTER_MAX}")));
        }
        jitter *= 10.0;
    }
}

/// Solves `L z = b` given `factor_t = L^T`.
pub(crate) fn forward_solve(factor_t: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let data = factor_t.as_slice();
    let mut z = vec![0.0; n];
    for i in 0..n {
        // column i of L^T holds row i of L
        let row = &data[i * n..i * n + i];
        let s: f64 = row.iter().zip(&z[..i]).map(|(l, v)| l * v).sum();
        z[i] = (b[i] - s) / data[i * n + i];
    }
    z
}

/// Solves `L^T x = z` given `factor_t = L^T`.
pub(crate) fn backward_solve(factor_t: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let data = factor_t.as_slice();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for j in i + 1..n {
            // (L^T)[i, j] = L[j, i], stored in column j of L^T
            s -= data[j * n + i] * x[j];
        }
        x[i] = s / data[i * n + i];
    }
    x
}
