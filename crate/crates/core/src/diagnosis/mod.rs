//! Per-agent risk assessment and its aggregation to macro statistics.
//!
//! Only [`MacroStats`] leaves a diagnosis cycle; the individual
//! [`Diagnosis`] values stay inside [`diagnose_population`].

mod heuristic;
mod llm;
mod parse;
mod prompt;

use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sim::World;

pub use heuristic::heuristic_diagnose;
pub use llm::{llm_diagnose, LlmDiagnosis, OllamaClient, TextGenerator, TransportError};
pub use parse::{extract_first_object, parse_response, SchemaViolation, REQUIRED_FIELDS};
pub use prompt::{build_prompt, prompt_template_hash, PROMPT_TEMPLATE, PROMPT_TEMPLATE_VERSION};

/// Assessed risk above this is "High" and counts toward `r`.
pub const HIGH_RISK: f64 = 0.6;
/// Assessed risk above this (and not High) is "Medium".
pub const MEDIUM_RISK: f64 = 0.4;
/// Agents with loneliness above this are sent for diagnosis.
pub const DIAGNOSIS_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskLabel {
    Low,
    Medium,
    High,
}

impl RiskLabel {
    pub fn from_score(score: f64) -> Self {
        if score > HIGH_RISK {
            RiskLabel::High
        } else if score > MEDIUM_RISK {
            RiskLabel::Medium
        } else {
            RiskLabel::Low
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Some(RiskLabel::Low),
            "medium" => Some(RiskLabel::Medium),
            "high" => Some(RiskLabel::High),
            _ => None,
        }
    }
}

/// Structured assessment of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub agent_id: usize,
    pub risk_loneliness: f64,
    pub risk_label: RiskLabel,
    pub risk_frailty_label: RiskLabel,
    pub primary_driver: String,
    pub priority_social: f64,
    pub priority_visit: f64,
}

/// Population-level signal handed to the controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroStats {
    /// Share of the whole population assessed High.
    pub r: f64,
    /// Mean social priority over diagnosed agents.
    pub p_s: f64,
    /// Mean visit priority over diagnosed agents.
    pub p_v: f64,
    pub n_diagnosed: usize,
    pub day: u32,
}

impl MacroStats {
    pub fn new(r: f64, p_s: f64, p_v: f64) -> Self {
        MacroStats {
            r,
            p_s,
            p_v,
            n_diagnosed: 0,
            day: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Heuristic,
    Llm,
}

/// What to do with an agent whose model output never validates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    SkipAgent,
    UseHeuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Ollama-compatible generate endpoint.
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub fallback: Fallback,
    /// Diagnose every agent instead of only those above the loneliness cutoff.
    pub diagnose_all: bool,
    /// Keep raw model responses in the audit log.
    pub store_raw_responses: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Heuristic,
            endpoint_url: "http://localhost:11434/api/generate".into(),
            model_name: "llama3:8b".into(),
            temperature: 0.1,
            timeout_ms: 60_000,
            max_retries: 2,
            fallback: Fallback::SkipAgent,
            diagnose_all: false,
            store_raw_responses: true,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), DiagnosisError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(DiagnosisError::InvalidArgument(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.kind == BackendKind::Llm && self.endpoint_url.trim().is_empty() {
            return Err(DiagnosisError::InvalidArgument(
                "LLM backend needs an endpoint_url".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DiagnosisError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("diagnosis backend unavailable after {attempts} attempt(s): {reason}")]
    BackendUnavailable { attempts: usize, reason: String },
}

/// A configured backend, optionally with the text generator it talks to.
#[derive(Clone)]
pub struct DiagnosisBackend {
    pub config: BackendConfig,
    generator: Option<Arc<dyn TextGenerator>>,
}

impl std::fmt::Debug for DiagnosisBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiagnosisBackend")
            .field("config", &self.config)
            .field("has_generator", &self.generator.is_some())
            .finish()
    }
}

impl DiagnosisBackend {
    pub fn heuristic() -> Self {
        DiagnosisBackend {
            config: BackendConfig::default(),
            generator: None,
        }
    }

    /// Heuristic configs need no generator; LLM configs get an
    /// [`OllamaClient`] for `endpoint_url`.
    pub fn from_config(config: BackendConfig) -> Result<Self, DiagnosisError> {
        config.validate()?;
        let generator: Option<Arc<dyn TextGenerator>> = match config.kind {
            BackendKind::Heuristic => None,
            BackendKind::Llm => Some(Arc::new(OllamaClient::new(&config))),
        };
        Ok(DiagnosisBackend { config, generator })
    }

    /// Uses `generator` in place of an HTTP client (stub servers, scripts).
    pub fn with_generator(config: BackendConfig, generator: Arc<dyn TextGenerator>) -> Self {
        DiagnosisBackend {
            config,
            generator: Some(generator),
        }
    }

    pub fn kind(&self) -> BackendKind {
        self.config.kind
    }

    pub fn generator(&self) -> Option<&dyn TextGenerator> {
        self.generator.as_deref()
    }
}

/// Ids sent for diagnosis: loneliness above [`DIAGNOSIS_THRESHOLD`], or
/// everyone when `diagnose_all` is set. Ascending.
pub fn select_diagnosable(world: &World, diagnose_all: bool) -> Vec<usize> {
    world
        .agents()
        .iter()
        .filter(|a| diagnose_all || a.loneliness > DIAGNOSIS_THRESHOLD)
        .map(|a| a.id)
        .collect()
}

/// Reduces a cycle's diagnoses to [`MacroStats`].
///
/// `r` divides by the whole population; the priorities average over the
/// diagnosed set, and are zero when nobody was diagnosed.
pub fn aggregate(diagnoses: &[Diagnosis], population_size: usize, day: u32) -> Result<MacroStats, DiagnosisError> {
    if population_size < 1 {
        return Err(DiagnosisError::InvalidArgument("population_size must be >= 1".into()));
    }
    let n = diagnoses.len();
    if n == 0 {
        return Ok(MacroStats {
            r: 0.0,
            p_s: 0.0,
            p_v: 0.0,
            n_diagnosed: 0,
            day,
        });
    }
    let high = diagnoses.iter().filter(|d| d.risk_loneliness > HIGH_RISK).count();
    // summed in sorted order so the result does not depend on list order
    let sorted_mean = |f: fn(&Diagnosis) -> f64| {
        let mut xs: Vec<f64> = diagnoses.iter().map(f).collect();
        xs.sort_by(f64::total_cmp);
        xs.iter().sum::<f64>() / n as f64
    };
    let p_s = sorted_mean(|d| d.priority_social);
    let p_v = sorted_mean(|d| d.priority_visit);
    Ok(MacroStats {
        r: (high as f64 / population_size as f64).min(1.0),
        p_s,
        p_v,
        n_diagnosed: n,
        day,
    })
}

/// Outcome of one diagnosis cycle, minus the individual diagnoses.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub stats: MacroStats,
    pub llm_calls: usize,
    pub raw_responses: Vec<String>,
    /// Agents dropped after schema failures (SkipAgent fallback).
    pub skipped: Vec<usize>,
    /// Agents assessed by the heuristic after model failures.
    pub fell_back: Vec<usize>,
    pub median_latency: Option<Duration>,
}

/// Selects, diagnoses and aggregates the current population.
pub fn diagnose_population(world: &World, backend: &DiagnosisBackend) -> Result<CycleReport, DiagnosisError> {
    let ids = select_diagnosable(world, backend.config.diagnose_all);
    let agents = world.agents();
    match (backend.kind(), backend.generator()) {
        (BackendKind::Heuristic, _) => {
            let diagnoses: Vec<Diagnosis> = ids
                .iter()
                .map(|&i| heuristic_diagnose(&agents[i], world.degree(i)))
                .collect();
            Ok(CycleReport {
                stats: aggregate(&diagnoses, world.len(), world.day())?,
                llm_calls: 0,
                raw_responses: Vec::new(),
                skipped: Vec::new(),
                fell_back: Vec::new(),
                median_latency: None,
            })
        }
        (BackendKind::Llm, None) => Err(DiagnosisError::BackendUnavailable {
            attempts: 0,
            reason: "no text generator configured".into(),
        }),
        (BackendKind::Llm, Some(generator)) => {
            let outcomes: Vec<Result<LlmDiagnosis, DiagnosisError>> = ids
                .par_iter()
                .map(|&i| {
                    llm_diagnose(
                        &agents[i],
                        &world.interaction_history(i),
                        world.degree(i),
                        generator,
                        &backend.config,
                    )
                })
                .collect();

            let mut report = CycleReport {
                stats: MacroStats::new(0.0, 0.0, 0.0),
                llm_calls: 0,
                raw_responses: Vec::new(),
                skipped: Vec::new(),
                fell_back: Vec::new(),
                median_latency: None,
            };
            let mut diagnoses = Vec::with_capacity(ids.len());
            let mut latencies = Vec::new();
            for (&id, outcome) in ids.iter().zip(outcomes) {
                let out = outcome?;
                report.llm_calls += out.calls;
                latencies.extend(out.latencies.iter().copied());
                if backend.config.store_raw_responses {
                    report.raw_responses.extend(out.raw_responses);
                }
                match out.diagnosis {
                    Some(d) => {
                        if out.fell_back {
                            report.fell_back.push(id);
                        }
                        diagnoses.push(d);
                    }
                    None => report.skipped.push(id),
                }
            }
            latencies.sort();
            report.median_latency = latencies.get(latencies.len() / 2).copied();
            if let Some(m) = report.median_latency {
                log::info!(
                    "day {}: {} model call(s), median latency {:?}",
                    world.day(),
                    report.llm_calls,
                    m
                );
            }
            report.stats = aggregate(&diagnoses, world.len(), world.day())?;
            Ok(report)
        }
    }
}
