//! Experiment harness: configuration, replicated runs, aggregation, CSV and
//! SVG output.

mod chart;
mod config;
mod report;
mod runner;
mod seed;

pub use chart::{emit_chart, render_chart, render_slice, ChartOptions, SliceData};
pub use config::{EnvSpec, ExperimentConfig, DEFAULT_MAX_NU};
pub use report::{
    aggregate, emit_csv, format_fixed, format_significant, summary_csv, trace_csv, PolicySummary, SUMMARY_FILE,
    SUMMARY_HEADER, TRACE_FILE, TRACE_HEADER,
};
pub use runner::{
    audit, budget_sequence, run_experiment, run_experiment_with, simulate, workers_from_env, RunTrace, StepRecord,
    WORKERS_ENV,
};
pub use seed::{derive_rng, derive_seed, Stream};

use std::path::{Path, PathBuf};

use crate::environments::{utopic_cumulative, CaseKind};
use crate::error::{Error, Result};
use crate::policies::{fit_surrogate, query_point, PolicyId};

/// Files written by [`run_and_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub chart: PathBuf,
}

/// Runs the experiment and writes `trace.csv`, `summary.csv` and the
/// cumulative reward chart into `out_dir`.
pub fn run_and_report(config: &ExperimentConfig, out_dir: &Path) -> Result<(Vec<RunTrace>, ReportPaths)> {
    let traces = run_experiment(config)?;
    let summaries = aggregate(&traces)?;
    let (trace, summary) = emit_csv(&traces, &summaries, out_dir)?;
    let mut options = ChartOptions::new(chart_title(config));
    if config.case == CaseKind::BernoulliJobs {
        options.reference = Some(utopic_cumulative(config.case, config.m, config.horizon)?);
    }
    let chart = emit_chart(&summaries, &options, out_dir)?;
    Ok((traces, ReportPaths { trace, summary, chart }))
}

fn chart_title(config: &ExperimentConfig) -> String {
    let case = match config.case {
        CaseKind::BernoulliJobs => "Bernoulli jobs",
        CaseKind::LinearMarketing => "linear marketing",
    };
    format!("{case}, m = {}, {} runs", config.m, config.runs)
}

/// Posterior of `policy`'s surrogate after `t` steps of the first run, along
/// the budget segment of the following step. Only two-arm BORA experiments
/// can be sliced.
pub fn gp_slice(config: &ExperimentConfig, policy: PolicyId, t: usize, points: usize) -> Result<SliceData> {
    let variant =
        policy.bora_variant().ok_or_else(|| Error::Config(format!("gp-slice needs a BORA policy, got '{policy}'")))?;
    if config.m != 2 {
        return Err(Error::Config(format!("gp-slice needs m = 2, got m = {}", config.m)));
    }
    if t < 2 || t > config.horizon {
        return Err(Error::Config(format!("gp-slice needs 2 <= t <= T = {}, got {t}", config.horizon)));
    }
    let (_, history) = simulate(config, 0, policy, t)?;
    let budgets = budget_sequence(config, 0)?;
    let budget = budgets[t.min(budgets.len() - 1)];
    let mut rng = derive_rng(config.master_seed, 0, Some(policy), Stream::Policy);
    let model = fit_surrogate(variant, &history, &config.bora_config(), &mut rng)?;

    let points = points.max(2);
    let mut x1 = Vec::with_capacity(points);
    let mut mean = Vec::with_capacity(points);
    let mut sd = Vec::with_capacity(points);
    for k in 0..points {
        let x = budget * k as f64 / (points - 1) as f64;
        let decision = crate::measures::AllocationDecision::new(vec![x, budget - x], budget)?;
        let (mu, var) = model.posterior(&query_point(variant, &decision)?)?;
        x1.push(x);
        mean.push(mu);
        sd.push(var.sqrt());
    }
    let markers = history.iter().map(|r| (r.decision.amounts()[0] / r.decision.budget() * budget, r.reward)).collect();
    Ok(SliceData {
        title: format!("{policy} surrogate after t = {t} on x1 + x2 = {}", format_significant(budget, 6)),
        budget,
        x1,
        mean,
        sd,
        markers,
    })
}
