//! Aggregation across runs and CSV emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::runner::RunTrace;
use crate::error::{domain, Result};
use crate::policies::PolicyId;

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_HEADER: &str = "policy,run,t,budget,reward,cumulative_reward,amounts";
pub const SUMMARY_HEADER: &str = "policy,t,mean_cumulative,sd_cumulative";

/// Per-step mean and sample standard deviation of one policy's cumulative
/// reward across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: PolicyId,
    pub runs: usize,
    pub mean_cumulative: Vec<f64>,
    pub sd_cumulative: Vec<f64>,
}

impl PolicySummary {
    pub fn final_mean(&self) -> f64 {
        self.mean_cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Aggregates traces per policy, in order of first appearance. Runs are
/// combined in run-index order, so the result does not depend on the order
/// of `traces`.
pub fn aggregate(traces: &[RunTrace]) -> Result<Vec<PolicySummary>> {
    if traces.is_empty() {
        return Err(domain("no traces to aggregate"));
    }
    let mut policies: Vec<PolicyId> = Vec::new();
    for t in traces {
        if !policies.contains(&t.policy) {
            policies.push(t.policy);
        }
    }
    policies
        .into_iter()
        .map(|policy| {
            let mut runs: Vec<&RunTrace> = traces.iter().filter(|t| t.policy == policy).collect();
            runs.sort_by_key(|t| t.run);
            let horizon = runs[0].steps.len();
            if runs.iter().any(|t| t.steps.len() != horizon) {
                return Err(domain(format!("runs of {policy} have different lengths")));
            }
            let n = runs.len() as f64;
            let mut mean = Vec::with_capacity(horizon);
            let mut sd = Vec::with_capacity(horizon);
            for i in 0..horizon {
                let values: Vec<f64> = runs.iter().map(|t| t.steps[i].cumulative_reward).collect();
                let mu = values.iter().sum::<f64>() / n;
                let var =
                    if runs.len() > 1 { values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
                mean.push(mu);
                sd.push(var.sqrt());
            }
            Ok(PolicySummary { policy, runs: runs.len(), mean_cumulative: mean, sd_cumulative: sd })
        })
        .collect()
}

/// Fixed-point rendering with eight decimals.
pub fn format_fixed(v: f64) -> String {
    format!("{v:.8}")
}

/// Plain decimal rendering with `digits` significant digits.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".to_string() } else { v.to_string() };
    }
    let render = |exponent: i32| {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        format!("{v:.decimals$}")
    };
    let exponent = v.abs().log10().floor() as i32;
    let text = render(exponent);
    // rounding can carry into a new leading digit, e.g. 9.9999999999 -> 10.0000000
    match text.trim_start_matches('-').parse::<f64>() {
        Ok(r) if r != 0.0 && r.log10().floor() as i32 > exponent => render(exponent + 1),
        _ => text,
    }
}

pub fn trace_csv(traces: &[RunTrace]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for trace in traces {
        for s in &trace.steps {
            let amounts: Vec<String> = s.amounts.iter().map(|v| format_significant(*v, 9)).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                trace.policy,
                trace.run,
                s.t,
                format_fixed(s.budget),
                format_fixed(s.reward),
                format_fixed(s.cumulative_reward),
                amounts.join(";")
            );
        }
    }
    out
}

pub fn summary_csv(summaries: &[PolicySummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        for (i, (mean, sd)) in s.mean_cumulative.iter().zip(&s.sd_cumulative).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", s.policy, i + 1, format_fixed(*mean), format_fixed(*sd));
        }
    }
    out
}

/// Writes `trace.csv` and `summary.csv` into `out_dir`, creating it if needed.
pub fn emit_csv(traces: &[RunTrace], summaries: &[PolicySummary], out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir)?;
    let trace_path = out_dir.join(TRACE_FILE);
    let summary_path = out_dir.join(SUMMARY_FILE);
    fs::write(&trace_path, trace_csv(traces))?;
    fs::write(&summary_path, summary_csv(summaries))?;
    Ok((trace_path, summary_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::runner::StepRecord;

    fn trace(policy: PolicyId, run: usize, rewards: &[f64]) -> RunTrace {
        let mut cumulative = 0.0;
        let steps = rewards
            .iter()
            .enumerate()
            .map(|(i, r)| {
                cumulative += r;
                StepRecord {
                    t: i + 1,
                    budget: 33.9,
                    amounts: vec![25.0, 8.9],
                    reward: *r,
                    cumulative_reward: cumulative,
                    expected_reward: 1.178,
                    optimal_expected_reward: 1.178,
                }
            })
            .collect();
        RunTrace { policy, run, steps }
    }

    #[test]
    fn sample_standard_deviation() {
        let s = aggregate(&[trace(PolicyId::Bora1, 0, &[10.0]), trace(PolicyId::Bora1, 1, &[20.0])]).unwrap();
        assert_eq!(s[0].mean_cumulative, vec![15.0]);
        assert!((s[0].sd_cumulative[0] - 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_run_has_zero_sd() {
        let s = aggregate(&[trace(PolicyId::Sbf, 0, &[1.0, 0.0, 2.0])]).unwrap();
        assert_eq!(s[0].sd_cumulative, vec![0.0; 3]);
        assert_eq!(s[0].mean_cumulative, vec![1.0, 1.0, 3.0]);
    }

    #[test]
    fn aggregate_ignores_run_order() {
        let a = trace(PolicyId::Bora1, 0, &[0.1, 0.7, 0.3]);
        let b = trace(PolicyId::Bora1, 1, &[0.2, 0.9, 0.4]);
        let c = trace(PolicyId::Bora1, 2, &[0.3, 0.11, 0.5]);
        let forward = aggregate(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let backward = aggregate(&[c, a, b]).unwrap();
        assert_eq!(forward, backward);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn fixed_and_significant_formats() {
        assert_eq!(format_fixed(1.178), "1.17800000");
        assert_eq!(format_fixed(0.0), "0.00000000");
        assert_eq!(format_significant(25.0, 9), "25.0000000");
        assert_eq!(format_significant(8.9, 9), "8.90000000");
        assert_eq!(format_significant(0.0001, 9), "0.000100000000");
        assert_eq!(format_significant(0.0, 9), "0");
        assert_eq!(format_significant(9.9999999999, 9), "10.0000000");
        assert_eq!(format_significant(123456.789012, 9), "123456.789");
    }

    #[test]
    fn csv_layout() {
        let traces = vec![trace(PolicyId::Bora2, 0, &[1.178])];
        let text = trace_csv(&traces);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines[1], "bora2,0,1,33.90000000,1.17800000,1.17800000,25.0000000;8.90000000");
        assert!(!text.contains('\r'));
        assert_eq!(trace_csv(&[]), format!("{TRACE_HEADER}\n"));
        assert_eq!(summary_csv(&[]), format!("{SUMMARY_HEADER}\n"));
    }
}
