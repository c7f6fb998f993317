use serde::{Deserialize, Serialize};

use super::{run_condition, Condition, Experiment, RunError, RunResult};
use crate::control::{closed_loop_update, ControlConfig, ControlDecision};
use crate::stats::{mean, sample_sd};

pub const RISK_VALUES: [f64; 2] = [0.30, 0.50];
pub const PRIORITY_VALUES: [f64; 2] = [0.65, 0.85];
pub const CAP_VALUES: [f64; 2] = [0.03, 0.08];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    /// `baseline`, `risk_threshold`, `priority_threshold` or `update_cap`.
    pub parameter: String,
    pub value: Option<f64>,
    pub mean: f64,
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
    /// Change of the mean relative to the baseline row, in percent.
    pub delta_pct: f64,
    /// The variant's controller reproduces every decision of the baseline
    /// runs when replayed on their recorded statistics.
    pub replay_identical: bool,
    pub finals: Vec<f64>,
}

fn same_effect(a: &ControlDecision, b: &ControlDecision) -> bool {
    a.delta_theta_s == b.delta_theta_s
        && a.delta_theta_t == b.delta_theta_t
        && a.delta_theta_p == b.delta_theta_p
        && a.new_params == b.new_params
        && a.fired_rules
            .iter()
            .map(|f| f.rule)
            .eq(b.fired_rules.iter().map(|f| f.rule))
}

/// True when `variant` fires the same rules with the same effect on every
/// recorded cycle of `runs`.
pub fn replays_identically(runs: &[RunResult], variant: &ControlConfig) -> bool {
    runs.iter().flat_map(|r| r.audit.iter()).all(|rec| {
        same_effect(
            &closed_loop_update(&rec.macro_stats, &rec.prior_params, variant),
            &rec.decision,
        )
    })
}

fn row(
    parameter: &str,
    value: Option<f64>,
    runs: &[RunResult],
    base_mean: Option<f64>,
    identical: bool,
) -> SensitivityRow {
    let finals: Vec<f64> = runs.iter().map(|r| r.final_mean_loneliness).collect();
    let m = mean(&finals);
    SensitivityRow {
        parameter: parameter.into(),
        value,
        mean: m,
        sd: sample_sd(&finals),
        min: finals.iter().copied().fold(f64::INFINITY, f64::min),
        max: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        delta_pct: base_mean.map_or(0.0, |b| (m - b) / b * 100.0),
        replay_identical: identical,
        finals,
    }
}

/// One-factor-at-a-time sweep of the closed-loop thresholds and cap around
/// `base`. Returns the baseline row followed by two rows per factor.
pub fn sensitivity_sweep(
    base: &ControlConfig,
    seeds: &[u64],
    exp: &Experiment,
) -> Result<Vec<SensitivityRow>, RunError> {
    if seeds.is_empty() {
        return Err(RunError::Invalid("sensitivity sweep needs at least one seed".into()));
    }
    let run_all = |control: ControlConfig| -> Result<Vec<RunResult>, RunError> {
        let e = Experiment { control, ..exp.clone() };
        seeds
            .iter()
            .map(|&s| run_condition(Condition::ClosedLoop, s, &e))
            .collect()
    };

    let base_runs = run_all(*base)?;
    let base_row = row("baseline", None, &base_runs, None, true);
    let base_mean = base_row.mean;

    let variants = RISK_VALUES
        .iter()
        .map(|&v| {
            (
                "risk_threshold",
                v,
                ControlConfig {
                    risk_threshold: v,
                    ..*base
                },
            )
        })
        .chain(PRIORITY_VALUES.iter().map(|&v| {
            (
                "priority_threshold",
                v,
                ControlConfig {
                    priority_threshold: v,
                    ..*base
                },
            )
        }))
        .chain(CAP_VALUES.iter().map(|&v| ("update_cap", v, base.with_cap(v))));

    let mut rows = vec![base_row];
    for (name, value, control) in variants {
        let runs = run_all(control)?;
        let identical = replays_identically(&base_runs, &control);
        rows.push(row(name, Some(value), &runs, Some(base_mean), identical));
    }
    Ok(rows)
}
