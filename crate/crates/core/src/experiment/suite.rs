use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_condition, Condition, Experiment, RunError, RunResult};
use crate::diagnosis::DiagnosisError;
use crate::stats::{cohens_d, mean, sample_sd, t_test_two_sample, TTestKind};

/// Comparisons reported by default, as `(a, b)`: negative differences mean
/// `a` ends less lonely than `b`.
pub const DEFAULT_COMPARISONS: [(Condition, Condition); 6] = [
    (Condition::ClosedLoop, Condition::LlmMapping),
    (Condition::ClosedLoop, Condition::BlackBox),
    (Condition::ClosedLoop, Condition::FixedPolicy),
    (Condition::BlackBox, Condition::FixedPolicy),
    (Condition::LlmMapping, Condition::FixedPolicy),
    (Condition::ClosedLoop, Condition::Baseline),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub condition: Condition,
    pub seed: u64,
    pub error: String,
    /// The model backend could not be reached at all.
    pub backend_unavailable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    /// Successful runs ordered by condition, then seed, as requested.
    pub runs: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
}

impl SuiteResult {
    pub fn finals(&self, condition: Condition) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.condition == condition)
            .map(|r| r.final_mean_loneliness)
            .collect()
    }
}

/// Runs every condition × seed pair in parallel.
pub fn run_suite(conditions: &[Condition], seeds: &[u64], exp: &Experiment) -> SuiteResult {
    let jobs: Vec<(Condition, u64)> = conditions
        .iter()
        .flat_map(|&c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(c, s)| (c, s, run_condition(c, s, exp)))
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (condition, seed, outcome) in outcomes {
        match outcome {
            Ok(r) => runs.push(r),
            Err(e) => {
                log::error!("{condition} seed {seed} failed: {e}");
                let backend_unavailable = matches!(
                    e,
                    RunError::Backend {
                        source: DiagnosisError::BackendUnavailable { .. },
                        ..
                    }
                );
                failures.push(RunFailure {
                    condition,
                    seed,
                    error: e.to_string(),
                    backend_unavailable,
                });
            }
        }
    }
    SuiteResult { runs, failures }
}

/// Cross-seed summary of one condition's final mean loneliness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub n: usize,
    pub mean: f64,
    /// Absent for a single seed.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn summarize_groups(groups: &[(Condition, Vec<f64>)]) -> Vec<ConditionSummary> {
    groups
        .iter()
        .filter(|(_, xs)| !xs.is_empty())
        .map(|(condition, xs)| ConditionSummary {
            condition: *condition,
            n: xs.len(),
            mean: mean(xs),
            sd: sample_sd(xs),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

fn groups(suite: &SuiteResult) -> Vec<(Condition, Vec<f64>)> {
    Condition::ALL.iter().map(|&c| (c, suite.finals(c))).collect()
}

pub fn summarize(suite: &SuiteResult) -> Vec<ConditionSummary> {
    summarize_groups(&groups(suite))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: Condition,
    pub b: Condition,
    /// `mean(a) - mean(b)`.
    pub mean_diff: f64,
    /// `|mean_diff| / mean(b) * 100`, reported only when `a` improves on `b`.
    pub improvement_pct: Option<f64>,
    pub cohens_d: Option<f64>,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    pub n_per_group: usize,
}

/// Compares `a` with `b`. Effect size and test are absent when either group
/// has fewer than two observations.
pub fn compare(a: Condition, xs: &[f64], b: Condition, ys: &[f64], kind: TTestKind) -> PairwiseComparison {
    let mean_diff = mean(xs) - mean(ys);
    let test = t_test_two_sample(xs, ys, kind).ok();
    PairwiseComparison {
        a,
        b,
        mean_diff,
        improvement_pct: (mean_diff < 0.0).then(|| mean_diff.abs() / mean(ys) * 100.0),
        cohens_d: cohens_d(xs, ys).ok(),
        t: test.map(|t| t.t),
        df: test.map(|t| t.df),
        p_value: test.map(|t| t.p_value),
        n_per_group: xs.len().min(ys.len()),
    }
}

pub fn pairwise_from_groups(
    groups: &[(Condition, Vec<f64>)],
    comparisons: &[(Condition, Condition)],
    kind: TTestKind,
) -> Vec<PairwiseComparison> {
    let find = |c: Condition| {
        groups
            .iter()
            .find(|(g, xs)| *g == c && !xs.is_empty())
            .map(|(_, xs)| xs)
    };
    comparisons
        .iter()
        .filter_map(|&(a, b)| Some(compare(a, find(a)?, b, find(b)?, kind)))
        .collect()
}

pub fn pairwise(suite: &SuiteResult, kind: TTestKind) -> Vec<PairwiseComparison> {
    pairwise_from_groups(&groups(suite), &DEFAULT_COMPARISONS, kind)
}
