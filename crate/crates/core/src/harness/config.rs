//! Experiment configuration files (TOML).

use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::acquisition::BetaSchedule;
use crate::environments::{BudgetMode, CaseKind};
use crate::error::{Error, Result};
use crate::measures::DEFAULT_WASSERSTEIN_P;
use crate::policies::{BoraConfig, PolicyId};

/// Job difficulty of the hardest job when `env.nu` is not given.
pub const DEFAULT_MAX_NU: f64 = 50.0;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    case: CaseKind,
    m: usize,
    #[serde(rename = "T", alias = "horizon")]
    horizon: usize,
    runs: usize,
    master_seed: u64,
    policies: Vec<String>,
    #[serde(default)]
    wasserstein_p: Option<f64>,
    #[serde(default)]
    n_init: Option<usize>,
    out_dir: Option<PathBuf>,
    budget: RawBudget,
    #[serde(default)]
    env: RawEnv,
    #[serde(default)]
    beta: BetaSchedule,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
enum RawBudget {
    Constant {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gaussian {
        mean: f64,
        sd: f64,
        #[serde(default = "default_floor")]
        floor: f64,
    },
    GaussianHeld {
        mean: f64,
        sd: f64,
        #[serde(default = "default_floor")]
        floor: f64,
    },
}

fn default_floor() -> f64 {
    1.0
}

impl From<RawBudget> for BudgetMode {
    fn from(raw: RawBudget) -> Self {
        match raw {
            RawBudget::Constant { value } => Self::Constant(value),
            RawBudget::Uniform { lo, hi } => Self::Uniform { lo, hi },
            RawBudget::Gaussian { mean, sd, floor } => Self::Gaussian { mean, sd, floor },
            RawBudget::GaussianHeld { mean, sd, floor } => Self::GaussianHeld { mean, sd, floor },
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    nu: Option<Vec<f64>>,
    eta_seed: Option<u64>,
    mu_range: Option<[f64; 2]>,
    sigma_range: Option<[f64; 2]>,
}

/// Environment parameters beyond the case kind.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    /// Job difficulties (jobs case). Defaults to `50 i / m` for `i = 1..m`.
    pub nu: Option<Vec<f64>>,
    /// Seed for the channel return parameters (marketing case). When set,
    /// every run shares one parameter draw; otherwise each run draws its own.
    pub eta_seed: Option<u64>,
    /// Range of the uniform draw of each channel's mean return.
    pub mu_range: (f64, f64),
    /// Range of the uniform draw of each channel's return deviation.
    pub sigma_range: (f64, f64),
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self { nu: None, eta_seed: None, mu_range: (0.0, 1.0), sigma_range: (0.0, 0.2) }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub case: CaseKind,
    pub m: usize,
    pub horizon: usize,
    pub runs: usize,
    pub master_seed: u64,
    pub budget: BudgetMode,
    pub env: EnvSpec,
    pub policies: Vec<PolicyId>,
    pub beta: BetaSchedule,
    pub wasserstein_p: f64,
    pub n_init: usize,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let policies = raw.policies.iter().map(|p| p.parse::<PolicyId>()).collect::<Result<Vec<_>>>()?;
        let config = Self {
            case: raw.case,
            m: raw.m,
            horizon: raw.horizon,
            runs: raw.runs,
            master_seed: raw.master_seed,
            budget: raw.budget.into(),
            env: EnvSpec {
                nu: raw.env.nu,
                eta_seed: raw.env.eta_seed,
                mu_range: raw.env.mu_range.map_or(EnvSpec::default().mu_range, |[a, b]| (a, b)),
                sigma_range: raw.env.sigma_range.map_or(EnvSpec::default().sigma_range, |[a, b]| (a, b)),
            },
            policies,
            beta: raw.beta,
            wasserstein_p: raw.wasserstein_p.unwrap_or(DEFAULT_WASSERSTEIN_P),
            n_init: raw.n_init.unwrap_or(BoraConfig::default().n_init),
            out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
        };
        let marketing_keys =
            raw.env.mu_range.is_some() || raw.env.sigma_range.is_some() || config.env.eta_seed.is_some();
        if marketing_keys && config.case != CaseKind::LinearMarketing {
            return Err(Error::Config(
                "env.eta_seed, env.mu_range and env.sigma_range apply only to case linear_marketing".into(),
            ));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m < 2 {
            return bad(format!("m must be at least 2, got {}", self.m));
        }
        if self.horizon < 1 {
            return bad("T must be at least 1".into());
        }
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        for (i, p) in self.policies.iter().enumerate() {
            if self.policies[..i].contains(p) {
                return bad(format!("policy '{p}' listed twice"));
            }
        }
        if self.case == CaseKind::LinearMarketing && self.policies.contains(&PolicyId::Sbf) {
            return bad("sbf needs per-arm job outcomes and cannot be used with case linear_marketing".into());
        }
        if !(self.wasserstein_p > 0.0 && self.wasserstein_p.is_finite()) {
            return bad(format!("wasserstein_p must be positive, got {}", self.wasserstein_p));
        }
        self.beta.validate().map_err(|e| Error::Config(format!("beta: {e}")))?;
        self.budget.validate()?;
        match (&self.env.nu, self.case) {
            (Some(_), CaseKind::LinearMarketing) => {
                return bad("env.nu applies only to case bernoulli_jobs".into());
            }
            (Some(nu), CaseKind::BernoulliJobs) => {
                if nu.len() != self.m {
                    return bad(format!("env.nu has {} entries but m = {}", nu.len(), self.m));
                }
                if nu.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return bad("env.nu entries must be positive".into());
                }
            }
            (None, _) => {}
        }
        let (mu_lo, mu_hi) = self.env.mu_range;
        if !(mu_lo.is_finite() && mu_hi.is_finite() && mu_lo <= mu_hi) {
            return bad(format!("env.mu_range [{mu_lo}, {mu_hi}] is not an interval"));
        }
        let (s_lo, s_hi) = self.env.sigma_range;
        if !(s_lo >= 0.0 && s_hi.is_finite() && s_lo <= s_hi) {
            return bad(format!("env.sigma_range [{s_lo}, {s_hi}] must be a nonnegative interval"));
        }
        Ok(())
    }

    /// Job difficulties for the jobs case.
    pub fn nu(&self) -> Vec<f64> {
        self.env.nu.clone().unwrap_or_else(|| (1..=self.m).map(|i| DEFAULT_MAX_NU * i as f64 / self.m as f64).collect())
    }

    pub fn bora_config(&self) -> BoraConfig {
        BoraConfig { n_init: self.n_init, beta: self.beta, wasserstein_p: self.wasserstein_p, ..BoraConfig::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE_1A: &str = r#"
        case = "bernoulli_jobs"
        m = 2
        T = 100
        runs = 5
        master_seed = 1
        policies = ["bora1", "bora2", "bora3", "sbf"]
        out_dir = "out/case1a"

        [budget]
        mode = "constant"
        value = 33.9

        [env]
        nu = [25.0, 50.0]
    "#;

    fn edit(from: &str, to: &str) -> String {
        assert!(CASE_1A.contains(from));
        CASE_1A.replace(from, to)
    }

    #[test]
    fn parses_a_full_config() {
        let c = ExperimentConfig::from_toml_str(CASE_1A).unwrap();
        assert_eq!(c.case, CaseKind::BernoulliJobs);
        assert_eq!((c.m, c.horizon, c.runs), (2, 100, 5));
        assert_eq!(c.budget, BudgetMode::Constant(33.9));
        assert_eq!(c.nu(), vec![25.0, 50.0]);
        assert_eq!(c.beta, BetaSchedule::Randomized);
        assert_eq!(c.wasserstein_p, 1.0);
        assert_eq!(c.policies.len(), 4);
    }

    #[test]
    fn default_difficulties() {
        let c = ExperimentConfig::from_toml_str(&edit("nu = [25.0, 50.0]", "")).unwrap();
        assert_eq!(c.nu(), vec![25.0, 50.0]);
        let c = ExperimentConfig::from_toml_str(&edit("m = 2", "m = 20").replace("nu = [25.0, 50.0]", "")).unwrap();
        assert_eq!(c.nu().len(), 20);
        assert_eq!(c.nu()[19], 50.0);
        assert_eq!(c.nu()[0], 2.5);
    }

    #[test]
    fn budget_and_beta_tables() {
        let text = edit(
            "mode = \"constant\"\n        value = 33.9",
            "mode = \"gaussian\"\n        mean = 50\n        sd = 10",
        ) + "\n[beta]\nmode = \"fixed\"\nvalue = 2.0\n";
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.budget, BudgetMode::Gaussian { mean: 50.0, sd: 10.0, floor: 1.0 });
        assert_eq!(c.beta, BetaSchedule::Fixed(2.0));
    }

    #[test]
    fn rejects_invalid_configs() {
        let cases = [
            edit("m = 2", "m = 3"),
            edit("m = 2", "m = 1").replace("nu = [25.0, 50.0]", ""),
            edit("runs = 5", "runs = 0"),
            edit("T = 100", "T = 0"),
            edit("\"sbf\"]", "\"sbf\", \"ucb\"]"),
            edit("\"sbf\"]", "\"sbf\", \"sbf\"]"),
            edit("value = 33.9", "value = -1.0"),
            edit("nu = [25.0, 50.0]", "nu = [25.0, 0.0]"),
            edit("master_seed = 1", "master_seed = 1\nbogus = 3"),
            edit("case = \"bernoulli_jobs\"", "case = \"linear_marketing\"").replace("nu = [25.0, 50.0]", ""),
            edit("nu = [25.0, 50.0]", "eta_seed = 3"),
            edit("runs = 5", ""),
        ];
        for text in &cases {
            assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))), "accepted:\n{text}");
        }
    }

    #[test]
    fn sbf_on_marketing_names_the_reason() {
        let text = edit("case = \"bernoulli_jobs\"", "case = \"linear_marketing\"").replace("nu = [25.0, 50.0]", "");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("sbf"), "{err}");
    }
}
