//! Controllers that turn [`MacroStats`] into policy parameter updates.
//!
//! [`closed_loop_update`] is the bounded rule set; [`llm_mapping_update`]
//! the fixed switching rule; [`black_box_update`] lets a model (or its
//! deterministic stand-in) propose parameters directly, with bounds but no
//! step cap.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnosis::{extract_first_object, BackendKind, DiagnosisBackend, DiagnosisError, MacroStats};
use crate::policy::{snap, ParamBounds};
use crate::PolicyParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// `r` must exceed this for social escalation.
    pub risk_threshold: f64,
    /// `p_s` (social) and `p_v` (visits) must exceed this.
    pub priority_threshold: f64,
    /// Largest change any single parameter may take in one cycle.
    pub update_cap: f64,
    pub theta_t_step: f64,
    pub theta_p_step: f64,
    pub social_gain: f64,
    pub bounds: ParamBounds,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            risk_threshold: 0.40,
            priority_threshold: 0.75,
            update_cap: 0.05,
            theta_t_step: 0.02,
            theta_p_step: 0.05,
            social_gain: 0.1,
            bounds: ParamBounds::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid control configuration: {0}")]
pub struct ControlConfigError(pub String);

impl ControlConfig {
    pub fn validate(&self) -> Result<(), ControlConfigError> {
        let open_unit = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(ControlConfigError(format!("{name} = {x} must lie in (0, 1)")))
            }
        };
        open_unit("risk_threshold", self.risk_threshold)?;
        open_unit("priority_threshold", self.priority_threshold)?;
        if !(self.update_cap > 0.0 && self.update_cap.is_finite()) {
            return Err(ControlConfigError(format!(
                "update_cap = {} must be > 0",
                self.update_cap
            )));
        }
        for (name, step) in [("theta_t_step", self.theta_t_step), ("theta_p_step", self.theta_p_step)] {
            if !(step >= 0.0 && step <= self.update_cap) {
                return Err(ControlConfigError(format!(
                    "{name} = {step} must lie in [0, update_cap = {}]",
                    self.update_cap
                )));
            }
        }
        if !(self.social_gain >= 0.0 && self.social_gain.is_finite()) {
            return Err(ControlConfigError(format!(
                "social_gain = {} must be >= 0",
                self.social_gain
            )));
        }
        if !self.bounds.is_valid() {
            return Err(ControlConfigError(
                "parameter bounds must nest inside the hard ranges".into(),
            ));
        }
        Ok(())
    }

    /// Same config with a different cap; steps larger than the cap are
    /// lowered to it so the config stays valid.
    pub fn with_cap(self, cap: f64) -> Self {
        ControlConfig {
            update_cap: cap,
            theta_t_step: self.theta_t_step.min(cap),
            theta_p_step: self.theta_p_step.min(cap),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    SocialEscalation,
    VisitThresholdRelax,
    VisitProbabilityRaise,
    LlmMapping,
    BlackBoxProposal,
    BlackBoxRejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lever {
    ThetaS,
    ThetaT,
    ThetaP,
}

impl Rule {
    /// Parameters this rule is allowed to move.
    pub fn levers(self) -> &'static [Lever] {
        match self {
            Rule::SocialEscalation => &[Lever::ThetaS],
            Rule::VisitThresholdRelax => &[Lever::ThetaT],
            Rule::VisitProbabilityRaise => &[Lever::ThetaP],
            Rule::LlmMapping | Rule::BlackBoxProposal => &[Lever::ThetaS, Lever::ThetaT, Lever::ThetaP],
            Rule::BlackBoxRejected => &[],
        }
    }
}

/// One inequality as it was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: String,
    pub value: f64,
    pub op: String,
    pub threshold: f64,
    pub holds: bool,
}

impl Comparison {
    fn gt(quantity: &str, value: f64, threshold: f64) -> Self {
        Comparison {
            quantity: quantity.into(),
            value,
            op: ">".into(),
            threshold,
            holds: value > threshold,
        }
    }

    fn lt(quantity: &str, value: f64, threshold: f64) -> Self {
        Comparison {
            quantity: quantity.into(),
            value,
            op: "<".into(),
            threshold,
            holds: value < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFiring {
    pub rule: Rule,
    pub conditions: Vec<Comparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlDecision {
    pub delta_theta_s: f64,
    pub delta_theta_t: f64,
    pub delta_theta_p: f64,
    pub fired_rules: Vec<RuleFiring>,
    pub new_params: PolicyParams,
}

impl ControlDecision {
    fn between(prior: &PolicyParams, new_params: PolicyParams, fired_rules: Vec<RuleFiring>) -> Self {
        ControlDecision {
            delta_theta_s: snap(new_params.theta_s - prior.theta_s),
            delta_theta_t: snap(new_params.theta_t - prior.theta_t),
            delta_theta_p: snap(new_params.theta_p - prior.theta_p),
            fired_rules,
            new_params,
        }
    }

    pub fn unchanged(prior: &PolicyParams, fired_rules: Vec<RuleFiring>) -> Self {
        Self::between(prior, *prior, fired_rules)
    }

    pub fn is_zero(&self) -> bool {
        self.delta_theta_s == 0.0 && self.delta_theta_t == 0.0 && self.delta_theta_p == 0.0
    }

    pub fn max_abs_delta(&self) -> f64 {
        self.delta_theta_s
            .abs()
            .max(self.delta_theta_t.abs())
            .max(self.delta_theta_p.abs())
    }

    /// Every parameter that moved is covered by a fired rule allowed to move it.
    pub fn is_attributed(&self) -> bool {
        let covered = |lever: Lever| self.fired_rules.iter().any(|f| f.rule.levers().contains(&lever));
        [
            (self.delta_theta_s, Lever::ThetaS),
            (self.delta_theta_t, Lever::ThetaT),
            (self.delta_theta_p, Lever::ThetaP),
        ]
        .into_iter()
        .all(|(delta, lever)| delta == 0.0 || covered(lever))
    }
}

/// The bounded deterministic rule set.
///
/// - social: `+min(cap, gain * p_s)` when `r > risk_threshold` and
///   `p_s > priority_threshold`;
/// - visit threshold: `-theta_t_step` when `p_v > priority_threshold` and
///   `theta_t` is above its floor;
/// - visit probability: `+theta_p_step` when `p_v > priority_threshold` and
///   `theta_p` is below its ceiling.
///
/// Each change is capped at `update_cap` and the result clipped into bounds.
pub fn closed_loop_update(stats: &MacroStats, params: &PolicyParams, config: &ControlConfig) -> ControlDecision {
    let cap = config.update_cap;
    let thr = config.priority_threshold;
    let b = &config.bounds;
    let mut fired = Vec::new();
    let (mut ds, mut dt, mut dp) = (0.0, 0.0, 0.0);

    let risk = Comparison::gt("r", stats.r, config.risk_threshold);
    let social = Comparison::gt("p_s", stats.p_s, thr);
    if risk.holds && social.holds {
        ds = cap.min(config.social_gain * stats.p_s);
        fired.push(RuleFiring {
            rule: Rule::SocialEscalation,
            conditions: vec![risk, social],
            detail: None,
        });
    }

    let visit = Comparison::gt("p_v", stats.p_v, thr);
    let floor = Comparison::gt("theta_t", params.theta_t, b.theta_t.0);
    if visit.holds && floor.holds {
        dt = -config.theta_t_step;
        fired.push(RuleFiring {
            rule: Rule::VisitThresholdRelax,
            conditions: vec![visit.clone(), floor],
            detail: None,
        });
    }
    let ceiling = Comparison::lt("theta_p", params.theta_p, b.theta_p.1);
    if visit.holds && ceiling.holds {
        dp = config.theta_p_step;
        fired.push(RuleFiring {
            rule: Rule::VisitProbabilityRaise,
            conditions: vec![visit, ceiling],
            detail: None,
        });
    }

    let capped = |d: f64| d.clamp(-cap, cap);
    let new_params = PolicyParams::within(
        params.theta_s + capped(ds),
        params.theta_t + capped(dt),
        params.theta_p + capped(dp),
        b,
    );
    ControlDecision::between(params, new_params, fired)
}

/// Fixed switching rule: intensity 1.2 when `r > 0.4`, else 1.0; visits
/// stay at threshold 0.6 and probability 0.3.
pub fn llm_mapping_update(stats: &MacroStats) -> PolicyParams {
    let theta_s = if stats.r > 0.4 { 1.2 } else { 1.0 };
    PolicyParams::new(theta_s, 0.6, 0.3)
}

/// [`llm_mapping_update`] wrapped as an auditable decision.
pub fn llm_mapping_decision(stats: &MacroStats, prior: &PolicyParams) -> ControlDecision {
    let firing = RuleFiring {
        rule: Rule::LlmMapping,
        conditions: vec![Comparison::gt("r", stats.r, 0.4)],
        detail: None,
    };
    ControlDecision::between(prior, llm_mapping_update(stats), vec![firing])
}

pub const PROPOSAL_TEMPLATE_VERSION: &str = "proposal-v1";

pub const PROPOSAL_TEMPLATE: &str = "\
You set intervention policy for an elderly-care facility with the goal of
reducing residents' loneliness.

Latest population assessment:
- share of residents at high loneliness risk (r): {r}
- mean priority for social events (p_s): {p_s}
- mean priority for home visits (p_v): {p_v}

Current parameters:
- theta_s (social event intensity, range 0.8 to 1.5): {theta_s}
- theta_t (home-visit eligibility threshold on loneliness, range 0.4 to 0.6): {theta_t}
- theta_p (home-visit success probability, range 0.15 to 0.5): {theta_p}

Choose the parameters for the next week. Reply with only a JSON object and
no other text: {\"theta_s\": <number>, \"theta_t\": <number>, \"theta_p\": <number>}
";

pub fn proposal_template_hash() -> String {
    hex::encode(Sha256::digest(PROPOSAL_TEMPLATE.as_bytes()))
}

pub fn build_proposal_prompt(stats: &MacroStats, params: &PolicyParams) -> String {
    PROPOSAL_TEMPLATE
        .replace("{r}", &format!("{:.2}", stats.r))
        .replace("{p_s}", &format!("{:.2}", stats.p_s))
        .replace("{p_v}", &format!("{:.2}", stats.p_v))
        .replace("{theta_s}", &format!("{:.2}", params.theta_s))
        .replace("{theta_t}", &format!("{:.2}", params.theta_t))
        .replace("{theta_p}", &format!("{:.2}", params.theta_p))
}

/// Reads `(theta_s, theta_t, theta_p)` from a proposal response.
pub fn parse_proposal(text: &str) -> Result<(f64, f64, f64), String> {
    let obj = extract_first_object(text).ok_or("no JSON object found")?;
    let get = |k: &str| -> Result<f64, String> {
        obj.get(k)
            .and_then(|v| v.as_f64())
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("`{k}` missing or not a number"))
    };
    Ok((get("theta_s")?, get("theta_t")?, get("theta_p")?))
}

/// Deterministic stand-in for a model proposer: maps the priorities straight
/// onto the parameter ranges, with no memory of the current values.
pub fn heuristic_proposal(stats: &MacroStats) -> (f64, f64, f64) {
    (0.8 + 0.7 * stats.p_s, 0.6 - 0.2 * stats.p_v, 0.15 + 0.35 * stats.p_v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlackBoxOutcome {
    pub decision: ControlDecision,
    pub llm_calls: usize,
    pub raw_responses: Vec<String>,
}

/// Direct parameter proposal, clipped into bounds without a step cap.
///
/// A response that never validates leaves the parameters unchanged and is
/// recorded as [`Rule::BlackBoxRejected`]. Transport failure on every
/// attempt is an error.
pub fn black_box_update(
    stats: &MacroStats,
    params: &PolicyParams,
    backend: &DiagnosisBackend,
    bounds: &ParamBounds,
) -> Result<BlackBoxOutcome, DiagnosisError> {
    let accept = |raw: String, (s, t, p): (f64, f64, f64)| {
        let new_params = PolicyParams::within(s, t, p, bounds);
        let firing = RuleFiring {
            rule: Rule::BlackBoxProposal,
            conditions: Vec::new(),
            detail: Some(raw),
        };
        ControlDecision::between(params, new_params, vec![firing])
    };

    let generator = match (backend.kind(), backend.generator()) {
        (BackendKind::Heuristic, _) => {
            let proposal = heuristic_proposal(stats);
            let raw =
                serde_json::json!({"theta_s": proposal.0, "theta_t": proposal.1, "theta_p": proposal.2}).to_string();
            return Ok(BlackBoxOutcome {
                decision: accept(raw, proposal),
                llm_calls: 0,
                raw_responses: Vec::new(),
            });
        }
        (BackendKind::Llm, None) => {
            return Err(DiagnosisError::BackendUnavailable {
                attempts: 0,
                reason: "no text generator configured".into(),
            })
        }
        (BackendKind::Llm, Some(g)) => g,
    };

    let prompt = build_proposal_prompt(stats, params);
    let attempts = backend.config.max_retries as usize + 1;
    let mut raw_responses = Vec::new();
    let mut violations = Vec::new();
    let mut last_transport = None;
    for _ in 0..attempts {
        match generator.generate(&prompt) {
            Ok(text) => {
                raw_responses.push(text.clone());
                match parse_proposal(&text) {
                    Ok(p) => {
                        let decision = accept(text, p);
                        return Ok(BlackBoxOutcome {
                            decision,
                            llm_calls: raw_responses.len(),
                            raw_responses,
                        });
                    }
                    Err(v) => violations.push(v),
                }
            }
            Err(e) => last_transport = Some(e),
        }
    }
    if raw_responses.is_empty() {
        return Err(DiagnosisError::BackendUnavailable {
            attempts,
            reason: last_transport.map(|e| e.0).unwrap_or_default(),
        });
    }
    let firing = RuleFiring {
        rule: Rule::BlackBoxRejected,
        conditions: Vec::new(),
        detail: Some(format!("{}; raw: {}", violations.join("; "), raw_responses.join(" | "))),
    };
    Ok(BlackBoxOutcome {
        decision: ControlDecision::unchanged(params, vec![firing]),
        llm_calls: attempts,
        raw_responses,
    })
}
