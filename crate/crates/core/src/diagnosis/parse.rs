use serde_json::{Map, Value};

use super::{Diagnosis, RiskLabel};

/// Fields a model response must carry.
pub const REQUIRED_FIELDS: [&str; 7] = [
    "agent_id",
    "risk_loneliness",
    "risk_label",
    "risk_frailty_label",
    "primary_driver",
    "priority_social",
    "priority_visit",
];

/// A model response that does not satisfy the diagnosis schema. Carries the
/// raw text so it can be written to the audit log.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("schema violation: {reason}")]
pub struct SchemaViolation {
    pub reason: String,
    pub raw: String,
}

/// Returns the first complete JSON object embedded in `text`, if any.
pub fn extract_first_object(text: &str) -> Option<Map<String, Value>> {
    text.char_indices().filter(|&(_, c)| c == '{').find_map(|(pos, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

/// Parses and validates a model response.
///
/// Accepts surrounding prose or code fences. The label is checked to be a
/// known level but is then recomputed from the numeric risk.
pub fn parse_response(text: &str) -> Result<Diagnosis, SchemaViolation> {
    let fail = |reason: String| SchemaViolation {
        reason,
        raw: text.to_string(),
    };
    let obj = extract_first_object(text).ok_or_else(|| fail("no JSON object found".into()))?;

    for field in REQUIRED_FIELDS {
        if !obj.contains_key(field) {
            return Err(fail(format!("missing field `{field}`")));
        }
    }

    let agent_id = obj["agent_id"].as_u64().ok_or_else(|| {
        fail(format!(
            "`agent_id` must be a non-negative integer, got {}",
            obj["agent_id"]
        ))
    })?;
    let unit = |field: &str| -> Result<f64, SchemaViolation> {
        let x = obj[field]
            .as_f64()
            .ok_or_else(|| fail(format!("`{field}` must be a number, got {}", obj[field])))?;
        if !(0.0..=1.0).contains(&x) {
            return Err(fail(format!("`{field}` = {x} is outside [0, 1]")));
        }
        Ok(x)
    };
    let label = |field: &str| -> Result<RiskLabel, SchemaViolation> {
        obj[field]
            .as_str()
            .and_then(RiskLabel::parse)
            .ok_or_else(|| fail(format!("`{field}` must be one of Low/Medium/High, got {}", obj[field])))
    };

    let risk_loneliness = unit("risk_loneliness")?;
    let priority_social = unit("priority_social")?;
    let priority_visit = unit("priority_visit")?;
    label("risk_label")?;
    let risk_frailty_label = label("risk_frailty_label")?;
    let primary_driver = match obj["primary_driver"].as_str().map(str::trim) {
        Some(s) if !s.is_empty() => s.to_string(),
        _ => return Err(fail("`primary_driver` must be non-empty text".into())),
    };

    Ok(Diagnosis {
        agent_id: agent_id as usize,
        risk_loneliness,
        risk_label: RiskLabel::from_score(risk_loneliness),
        risk_frailty_label,
        primary_driver,
        priority_social,
        priority_visit,
    })
}
