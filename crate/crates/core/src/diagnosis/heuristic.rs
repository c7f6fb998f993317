use super::{Diagnosis, RiskLabel};
use crate::sim::AgentState;

// indexed by the argmax of (loneliness, frailty, stress)
const DRIVERS: [&str; 3] = ["social isolation", "physical frailty", "psychological stress"];

/// Deterministic stand-in for the model backend.
///
/// Risk is `0.5 l + 0.3 f + 0.2 s`; social priority mixes loneliness with
/// a deficit of ties relative to six; visit priority averages loneliness and
/// frailty. Everything is clipped to `[0, 1]`.
pub fn heuristic_diagnose(agent: &AgentState, degree: usize) -> Diagnosis {
    let (l, f, s) = (agent.loneliness, agent.frailty, agent.stress);
    let risk = (0.5 * l + 0.3 * f + 0.2 * s).clamp(0.0, 1.0);
    let isolation = (1.0 - degree as f64 / 6.0).max(0.0);
    let priority_social = (0.6 * l + 0.4 * isolation).clamp(0.0, 1.0);
    let priority_visit = (0.5 * l + 0.5 * f).clamp(0.0, 1.0);

    let mut driver = 0;
    for (i, v) in [l, f, s].into_iter().enumerate() {
        if v > [l, f, s][driver] {
            driver = i;
        }
    }

    Diagnosis {
        agent_id: agent.id,
        risk_loneliness: risk,
        risk_label: RiskLabel::from_score(risk),
        risk_frailty_label: RiskLabel::from_score(f),
        primary_driver: DRIVERS[driver].to_string(),
        priority_social,
        priority_visit,
    }
}
