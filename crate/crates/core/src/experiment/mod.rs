//! Runs conditions over seeds and summarises the outcomes.

mod output;
mod sensitivity;
mod suite;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audit::{config_hash, AuditError, AuditLog, AuditRecord};
use crate::control::{
    black_box_update, closed_loop_update, llm_mapping_decision, proposal_template_hash, ControlConfig,
    ControlConfigError,
};
use crate::diagnosis::{
    diagnose_population, prompt_template_hash, BackendKind, DiagnosisBackend, DiagnosisError, DIAGNOSIS_THRESHOLD,
};
use crate::sim::{DynamicsConfig, SimError, World};
use crate::PolicyParams;

pub use output::{
    read_results_csv, write_pairwise_json, write_results_csv, write_sensitivity_csv, write_summary_json,
    write_trajectory_csv, ResultRow,
};
pub use sensitivity::{
    replays_identically, sensitivity_sweep, SensitivityRow, CAP_VALUES, PRIORITY_VALUES, RISK_VALUES,
};
pub use suite::{
    pairwise, pairwise_from_groups, run_suite, summarize, summarize_groups, ConditionSummary, PairwiseComparison,
    RunFailure, SuiteResult, DEFAULT_COMPARISONS,
};

pub const HOLDOUT_SEEDS: [u64; 4] = [300, 400, 500, 600];
pub const TRAIN_SEEDS: [u64; 3] = [42, 100, 200];
/// Labels a seed for reporting: development seeds are `train`.
pub fn seed_split(seed: u64) -> &'static str {
    if TRAIN_SEEDS.contains(&seed) {
        "train"
    } else if HOLDOUT_SEEDS.contains(&seed) {
        "holdout"
    } else {
        "other"
    }
}

/// Days between diagnosis cycles (and network updates).
pub const CYCLE_DAYS: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    FixedPolicy,
    LlmMapping,
    ClosedLoop,
    BlackBox,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Baseline,
        Condition::FixedPolicy,
        Condition::LlmMapping,
        Condition::ClosedLoop,
        Condition::BlackBox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Baseline => "baseline",
            Condition::FixedPolicy => "fixed_policy",
            Condition::LlmMapping => "llm_mapping",
            Condition::ClosedLoop => "closed_loop",
            Condition::BlackBox => "black_box",
        }
    }

    pub fn intervenes(self) -> bool {
        self != Condition::Baseline
    }

    pub fn uses_diagnosis(self) -> bool {
        matches!(
            self,
            Condition::LlmMapping | Condition::ClosedLoop | Condition::BlackBox
        )
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "baseline" => Ok(Condition::Baseline),
            "fixed" | "fixed_policy" => Ok(Condition::FixedPolicy),
            "mapping" | "llm_mapping" => Ok(Condition::LlmMapping),
            "closed" | "closed_loop" => Ok(Condition::ClosedLoop),
            "black_box" | "blackbox" => Ok(Condition::BlackBox),
            other => Err(format!("unknown condition `{other}`")),
        }
    }
}

/// Everything a run needs besides its condition and seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub n_agents: usize,
    pub days: u32,
    pub dynamics: DynamicsConfig,
    pub control: ControlConfig,
    pub backend: DiagnosisBackend,
    /// Where audit logs go; `None` keeps them in memory only.
    pub audit_dir: Option<PathBuf>,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            n_agents: 30,
            days: 200,
            dynamics: DynamicsConfig::default(),
            control: ControlConfig::default(),
            backend: DiagnosisBackend::heuristic(),
            audit_dir: None,
        }
    }
}

impl Experiment {
    pub fn audit_path(&self, condition: Condition, seed: u64) -> Option<PathBuf> {
        self.audit_dir
            .as_ref()
            .map(|d| d.join(format!("audit_{condition}_{seed}.ndjson")))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Control(#[from] ControlConfigError),
    #[error("{condition} seed {seed} aborted on day {day}: {source}")]
    Backend {
        condition: Condition,
        seed: u64,
        day: u32,
        source: DiagnosisError,
    },
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub condition: Condition,
    pub final_mean_loneliness: f64,
    /// Day 0 through day T.
    pub daily_means: Vec<f64>,
    /// Parameters in force at the end of each day, day 0 through T. For the
    /// baseline these are the unused defaults.
    pub param_history: Vec<PolicyParams>,
    pub visits_per_day: Vec<usize>,
    /// Agents above the diagnosis cutoff at the end of each day.
    pub high_risk_per_day: Vec<usize>,
    pub visit_count: usize,
    pub llm_call_count: usize,
    pub audit_path: Option<PathBuf>,
    pub audit: Vec<AuditRecord>,
}

/// Runs one condition for one seed.
///
/// Every seventh day the network grows and, for conditions with diagnosis,
/// the population is diagnosed, the condition's controller updates the
/// parameters, and an audit record is appended.
pub fn run_condition(condition: Condition, seed: u64, exp: &Experiment) -> Result<RunResult, RunError> {
    exp.control.validate()?;
    exp.backend
        .config
        .validate()
        .map_err(|e| RunError::Invalid(e.to_string()))?;
    let mut world = World::new(seed, exp.n_agents, exp.dynamics)?;
    let mut params = PolicyParams::fixed();
    let mut log = match exp.audit_path(condition, seed).filter(|_| condition.uses_diagnosis()) {
        Some(p) => AuditLog::create(p)?,
        None => AuditLog::in_memory(),
    };
    let cfg_hash = config_hash(&exp.control, &exp.dynamics);
    let llm = exp.backend.kind() == BackendKind::Llm;
    let prompt_hash = llm.then(|| match condition {
        Condition::BlackBox => format!("{}+{}", prompt_template_hash(), proposal_template_hash()),
        _ => prompt_template_hash(),
    });

    let high_risk = |w: &World| w.agents().iter().filter(|a| a.loneliness > DIAGNOSIS_THRESHOLD).count();
    let cap = exp.days as usize + 1;
    let mut daily_means = Vec::with_capacity(cap);
    let mut param_history = Vec::with_capacity(cap);
    let mut visits_per_day = Vec::with_capacity(cap);
    let mut high_risk_per_day = Vec::with_capacity(cap);
    daily_means.push(world.mean_loneliness());
    param_history.push(params);
    visits_per_day.push(0);
    high_risk_per_day.push(high_risk(&world));
    let mut llm_calls = 0;

    for _ in 0..exp.days {
        let report = world.step_day(condition.intervenes().then_some(&params));
        let day = world.day();
        if day % CYCLE_DAYS == 0 {
            world.update_network();
            if condition.uses_diagnosis() {
                let abort = |source| RunError::Backend {
                    condition,
                    seed,
                    day,
                    source,
                };
                let cycle = diagnose_population(&world, &exp.backend).map_err(abort)?;
                llm_calls += cycle.llm_calls;
                let mut raw = cycle.raw_responses;
                let decision = match condition {
                    Condition::ClosedLoop => closed_loop_update(&cycle.stats, &params, &exp.control),
                    Condition::LlmMapping => llm_mapping_decision(&cycle.stats, &params),
                    Condition::BlackBox => {
                        let out = black_box_update(&cycle.stats, &params, &exp.backend, &exp.control.bounds)
                            .map_err(abort)?;
                        llm_calls += out.llm_calls;
                        raw.extend(out.raw_responses);
                        out.decision
                    }
                    Condition::Baseline | Condition::FixedPolicy => unreachable!("no diagnosis in {condition}"),
                };
                let new_params = decision.new_params;
                log.append(AuditRecord {
                    day,
                    condition,
                    macro_stats: cycle.stats,
                    prior_params: params,
                    decision,
                    backend_kind: exp.backend.kind(),
                    prompt_hash: prompt_hash.clone(),
                    raw_responses: (llm && exp.backend.config.store_raw_responses).then_some(raw),
                    config_hash: cfg_hash.clone(),
                })?;
                params = new_params;
            }
        }
        daily_means.push(world.mean_loneliness());
        param_history.push(params);
        visits_per_day.push(report.visits_made);
        high_risk_per_day.push(high_risk(&world));
    }

    Ok(RunResult {
        seed,
        condition,
        final_mean_loneliness: *daily_means.last().expect("day 0 is always recorded"),
        visit_count: visits_per_day.iter().sum(),
        daily_means,
        param_history,
        visits_per_day,
        high_risk_per_day,
        llm_call_count: llm_calls,
        audit_path: log.path().map(|p| p.to_path_buf()),
        audit: log.into_records(),
    })
}
