use std::time::{Duration, Instant};

use serde::Serialize;

use super::{build_prompt, heuristic_diagnose, parse_response, BackendConfig, Diagnosis, DiagnosisError, Fallback};
use crate::sim::AgentState;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("transport error: {0}")]
pub struct TransportError(pub String);

/// Anything that turns a prompt into model text.
pub trait TextGenerator: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, TransportError>;
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    stream: bool,
    options: GenerateOptions,
}

#[derive(Serialize)]
struct GenerateOptions {
    temperature: f64,
}

/// Blocking client for an Ollama-compatible `/api/generate` endpoint.
pub struct OllamaClient {
    agent: ureq::Agent,
    url: String,
    model: String,
    temperature: f64,
}

impl OllamaClient {
    pub fn new(config: &BackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        OllamaClient {
            agent,
            url: config.endpoint_url.clone(),
            model: config.model_name.clone(),
            temperature: config.temperature,
        }
    }
}

/// Pulls the generated text out of an Ollama response envelope. Bodies that
/// are not an envelope are passed through untouched.
fn response_text(body: String) -> String {
    match serde_json::from_str::<serde_json::Value>(&body) {
        Ok(serde_json::Value::Object(map)) => match map.get("response") {
            Some(serde_json::Value::String(s)) => s.clone(),
            _ => body,
        },
        _ => body,
    }
}

impl TextGenerator for OllamaClient {
    fn generate(&self, prompt: &str) -> Result<String, TransportError> {
        let request = GenerateRequest {
            model: &self.model,
            prompt,
            stream: false,
            options: GenerateOptions {
                temperature: self.temperature,
            },
        };
        let body = self
            .agent
            .post(&self.url)
            .send_json(&request)
            .map_err(|e| TransportError(e.to_string()))?
            .into_body()
            .read_to_string()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(response_text(body))
    }
}

/// Result of diagnosing one agent through a model.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmDiagnosis {
    /// `None` when the agent was skipped.
    pub diagnosis: Option<Diagnosis>,
    pub fell_back: bool,
    pub calls: usize,
    pub raw_responses: Vec<String>,
    pub violations: Vec<String>,
    pub latencies: Vec<Duration>,
}

/// Diagnoses `agent` through `generator`, retrying failed attempts up to
/// `max_retries` times.
///
/// When no attempt validates: `UseHeuristic` substitutes
/// [`heuristic_diagnose`]; `SkipAgent` omits the agent after schema
/// failures and reports the backend unavailable when no attempt got a
/// response at all.
pub fn llm_diagnose(
    agent: &AgentState,
    history: &[u32],
    degree: usize,
    generator: &dyn TextGenerator,
    config: &BackendConfig,
) -> Result<LlmDiagnosis, DiagnosisError> {
    let prompt = build_prompt(agent, history, degree);
    let attempts = config.max_retries as usize + 1;
    let mut out = LlmDiagnosis {
        diagnosis: None,
        fell_back: false,
        calls: 0,
        raw_responses: Vec::new(),
        violations: Vec::new(),
        latencies: Vec::new(),
    };
    let mut last_transport: Option<TransportError> = None;

    for _ in 0..attempts {
        out.calls += 1;
        let started = Instant::now();
        let text = match generator.generate(&prompt) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("agent {}: {e}", agent.id);
                last_transport = Some(e);
                continue;
            }
        };
        out.latencies.push(started.elapsed());
        out.raw_responses.push(text.clone());
        match parse_response(&text) {
            Ok(d) if d.agent_id == agent.id => {
                out.diagnosis = Some(d);
                return Ok(out);
            }
            Ok(d) => out
                .violations
                .push(format!("agent_id {} does not match {}", d.agent_id, agent.id)),
            Err(v) => out.violations.push(v.reason),
        }
    }

    match config.fallback {
        Fallback::UseHeuristic => {
            out.diagnosis = Some(heuristic_diagnose(agent, degree));
            out.fell_back = true;
            Ok(out)
        }
        Fallback::SkipAgent if out.raw_responses.is_empty() => Err(DiagnosisError::BackendUnavailable {
            attempts,
            reason: last_transport.map(|e| e.0).unwrap_or_else(|| "no response".into()),
        }),
        Fallback::SkipAgent => Ok(out),
    }
}
