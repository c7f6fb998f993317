use sha2::{Digest, Sha256};

use crate::sim::AgentState;

pub const PROMPT_TEMPLATE_VERSION: &str = "diagnosis-v1";

/// Diagnosis prompt. Placeholders are `{name}`; state values are rendered
/// with two decimals.
pub const PROMPT_TEMPLATE: &str = "\
You are assessing a resident of an elderly-care facility for loneliness risk.

Resident id: {agent_id}
Current state (0 = none, 1 = maximal):
- loneliness: {loneliness}
- frailty: {frailty}
- stress: {stress}
- energy: {energy}
Social interactions in the last {window} day(s): {interactions}
Number of social ties in the facility network: {degree}

Assess the resident's risk of loneliness, the level of their frailty, the main
driver of their current state, and how strongly each intervention is needed:
social events (priority_social) and home visits (priority_visit).

Reply with only a JSON object and no other text, with exactly these fields:
{\"agent_id\": {agent_id}, \"risk_loneliness\": <number in [0,1]>, \
\"risk_label\": \"Low\" | \"Medium\" | \"High\", \
\"risk_frailty_label\": \"Low\" | \"Medium\" | \"High\", \
\"primary_driver\": <short text>, \
\"priority_social\": <number in [0,1]>, \"priority_visit\": <number in [0,1]>}
";

/// SHA-256 of the template, recorded with every model-backed cycle.
pub fn prompt_template_hash() -> String {
    hex::encode(Sha256::digest(PROMPT_TEMPLATE.as_bytes()))
}

/// Renders the diagnosis prompt for one agent. `history` holds the daily
/// interaction counts of the retained window (at most seven days).
pub fn build_prompt(agent: &AgentState, history: &[u32], degree: usize) -> String {
    let total: u32 = history.iter().sum();
    PROMPT_TEMPLATE
        .replace("{agent_id}", &agent.id.to_string())
        .replace("{loneliness}", &format!("{:.2}", agent.loneliness))
        .replace("{frailty}", &format!("{:.2}", agent.frailty))
        .replace("{stress}", &format!("{:.2}", agent.stress))
        .replace("{energy}", &format!("{:.2}", agent.energy))
        .replace("{window}", &history.len().to_string())
        .replace("{interactions}", &total.to_string())
        .replace("{degree}", &degree.to_string())
}
