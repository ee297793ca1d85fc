use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::measures::{half_l1, WeightVector};

/// Covariance family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    /// Squared exponential with one shared lengthscale.
    SeIsotropic,
    /// Squared exponential with a lengthscale per input dimension.
    SeAnisotropic,
    /// Squared exponential in the closed-form Wasserstein distance of order `p`
    /// between weight vectors.
    WassersteinSe { p: f64 },
}

/// Kernel family together with its hyperparameters.
///
/// `signal_variance` multiplies the exponential directly, so `k(x, x)` equals
/// it. Isotropic and Wasserstein kernels carry exactly one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelSpec {
    pub fn se_isotropic(signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Result<Self> {
        Self::new(KernelKind::SeIsotropic, signal_variance, vec![lengthscale], noise_variance)
    }

    pub fn se_anisotropic(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        Self::new(KernelKind::SeAnisotropic, signal_variance, lengthscales, noise_variance)
    }

    pub fn wasserstein_se(signal_variance: f64, lambda: f64, p: f64, noise_variance: f64) -> Result<Self> {
        Self::new(KernelKind::WassersteinSe { p }, signal_variance, vec![lambda], noise_variance)
    }

    pub fn new(kind: KernelKind, signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let spec = Self { kind, signal_variance, lengthscales, noise_variance };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(domain("signal variance must be positive"));
        }
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(domain("lengthscales must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(domain("noise variance must be nonnegative"));
        }
        match self.kind {
            KernelKind::SeIsotropic | KernelKind::WassersteinSe { .. } if self.lengthscales.len() != 1 => {
                Err(domain("isotropic and Wasserstein kernels take exactly one scale"))
            }
            KernelKind::WassersteinSe { p } if !(p > 0.0 && p.is_finite()) => {
                Err(domain("Wasserstein order must be in (0, inf)"))
            }
            _ => Ok(()),
        }
    }

    /// Checks that inputs of dimension `dim` are admissible for this kernel.
    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        match self.kind {
            KernelKind::SeAnisotropic if self.lengthscales.len() != dim => {
                Err(domain(format!("kernel has {} lengthscales, inputs have dimension {dim}", self.lengthscales.len())))
            }
            KernelKind::WassersteinSe { .. } if dim < 2 => {
                Err(domain("Wasserstein kernel needs weight vectors of dimension >= 2"))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value for same-length inputs; no validation.
    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let exponent = match self.kind {
            KernelKind::SeIsotropic => {
                let l = self.lengthscales[0];
                x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (l * l)
            }
            KernelKind::SeAnisotropic => {
                x.iter().zip(y).zip(&self.lengthscales).map(|((a, b), l)| ((a - b) / l).powi(2)).sum()
            }
            KernelKind::WassersteinSe { p } => {
                let l = self.lengthscales[0];
                half_l1(x, y).powf(2.0 / p) / (l * l)
            }
        };
        self.signal_variance * (-0.5 * exponent).exp()
    }
}

/// Squared-exponential covariance `sf * exp(-1/2 sum_i (x_i - x2_i)^2 / l_i^2)`.
pub fn se_kernel(x: &[f64], x2: &[f64], spec: &KernelSpec) -> Result<f64> {
    if matches!(spec.kind, KernelKind::WassersteinSe { .. }) {
        return Err(domain("se_kernel called with a Wasserstein kernel spec"));
    }
    if x.len() != x2.len() {
        return Err(domain(format!("dimension mismatch: {} vs {}", x.len(), x2.len())));
    }
    spec.check_dim(x.len())?;
    Ok(spec.eval(x, x2))
}

/// Wasserstein squared-exponential covariance `sf * exp(-1/2 W_p^2 / lambda^2)`.
pub fn wse_kernel(a: &WeightVector, a2: &WeightVector, spec: &KernelSpec) -> Result<f64> {
    let KernelKind::WassersteinSe { p } = spec.kind else {
        return Err(domain("wse_kernel needs a Wasserstein-SE kernel spec"));
    };
    let w = crate::measures::wasserstein_p(a, a2, p)?;
    let lambda = spec.lengthscales[0];
    Ok(spec.signal_variance * (-0.5 * w * w / (lambda * lambda)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn se_examples() {
        let spec = KernelSpec::se_isotropic(1.0, 1.0, 0.0).unwrap();
        assert_eq!(se_kernel(&[0.3, 0.1], &[0.3, 0.1], &spec).unwrap(), 1.0);
        let v = se_kernel(&[0.0, 0.0], &[0.6, 0.8], &spec).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);

        let spec = KernelSpec::se_anisotropic(2.0, vec![1.0, 2.0], 0.0).unwrap();
        // exponent: (1/1)^2 + (2/2)^2 = 2
        let v = se_kernel(&[1.0, 2.0], &[0.0, 0.0], &spec).unwrap();
        assert!((v - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(se_kernel(&[1.0], &[0.0, 0.0], &spec).is_err());
        assert!(se_kernel(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], &spec).is_err());
    }

    #[test]
    fn wse_examples() {
        let spec = KernelSpec::wasserstein_se(1.0, 1.0, 1.0, 0.0).unwrap();
        let e1 = WeightVector::vertex(2, 0).unwrap();
        let e2 = WeightVector::vertex(2, 1).unwrap();
        assert_eq!(wse_kernel(&e1, &e1, &spec).unwrap(), 1.0);
        assert!((wse_kernel(&e1, &e2, &spec).unwrap() - (-0.5f64).exp()).abs() < 1e-15);

        let spec = KernelSpec::wasserstein_se(1.0, 0.5, 1.0, 0.0).unwrap();
        let a = WeightVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        let b = WeightVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let w = crate::testing::transport_cost_binary(a.as_slice(), b.as_slice());
        let expected = (-0.5 * w * w / 0.25).exp();
        assert!((wse_kernel(&a, &b, &spec).unwrap() - expected).abs() < 1e-12);
        assert!((expected - (-0.5f64 * 0.09 / 0.25).exp()).abs() < 1e-12);

        let c = WeightVector::uniform(4).unwrap();
        assert!(wse_kernel(&a, &c, &spec).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::se_isotropic(0.0, 1.0, 0.0).is_err());
        assert!(KernelSpec::se_isotropic(1.0, -1.0, 0.0).is_err());
        assert!(KernelSpec::se_isotropic(1.0, 1.0, -1e-3).is_err());
        assert!(KernelSpec::new(KernelKind::WassersteinSe { p: 1.0 }, 1.0, vec![1.0, 2.0], 0.0).is_err());
        assert!(KernelSpec::wasserstein_se(1.0, 1.0, 0.0, 0.0).is_err());
    }
}
