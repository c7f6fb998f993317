use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{seed_split, Condition, ConditionSummary, PairwiseComparison, RunResult, SensitivityRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub condition: Condition,
    pub seed: u64,
    pub final_mean_loneliness: f64,
    pub visits: usize,
    pub llm_calls: usize,
    /// `train`, `holdout` or `other`.
    #[serde(default)]
    pub split: String,
}

impl From<&RunResult> for ResultRow {
    fn from(r: &RunResult) -> Self {
        ResultRow {
            condition: r.condition,
            seed: r.seed,
            final_mean_loneliness: r.final_mean_loneliness,
            visits: r.visit_count,
            llm_calls: r.llm_call_count,
            split: seed_split(r.seed).to_string(),
        }
    }
}

pub fn write_results_csv<W: Write>(runs: &[RunResult], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in runs {
        out.serialize(ResultRow::from(r))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(r: R) -> csv::Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// One row per day: `day, mean_loneliness, theta_s, theta_t, theta_p,
/// visits_today, high_risk_count`.
pub fn write_trajectory_csv<W: Write>(run: &RunResult, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "day",
        "mean_loneliness",
        "theta_s",
        "theta_t",
        "theta_p",
        "visits_today",
        "high_risk_count",
    ])?;
    for (day, mean) in run.daily_means.iter().enumerate() {
        let p = run.param_history[day];
        out.write_record([
            day.to_string(),
            mean.to_string(),
            p.theta_s.to_string(),
            p.theta_t.to_string(),
            p.theta_p.to_string(),
            run.visits_per_day[day].to_string(),
            run.high_risk_per_day[day].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_json<W: Write>(summary: &[ConditionSummary], w: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(w, summary)
}

pub fn write_pairwise_json<W: Write>(pairs: &[PairwiseComparison], w: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(w, pairs)
}

pub fn write_sensitivity_csv<W: Write>(rows: &[SensitivityRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "parameter",
        "value",
        "mean",
        "sd",
        "min",
        "max",
        "delta_pct",
        "replay_identical",
    ])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.parameter.clone(),
            opt(r.value),
            r.mean.to_string(),
            opt(r.sd),
            r.min.to_string(),
            r.max.to_string(),
            r.delta_pct.to_string(),
            r.replay_identical.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
