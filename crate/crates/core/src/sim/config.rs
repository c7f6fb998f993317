use serde::{Deserialize, Serialize};

use super::SimError;

/// Coefficients of the daily dynamics.
///
/// Every field has a default, so a config file only needs the keys it
/// changes. `init_edge_prob = None` means `4 / (N - 1)`, i.e. an expected
/// initial degree of four.
///
/// The defaults are calibrated so that the fixed policy alone leaves a
/// core of lonely, increasingly frail residents; visit priority among them
/// crosses the escalation threshold in the second half of a 200-day run.
/// Intervention effects are small per event and per visit because events
/// reach nearly everyone and visits recur daily.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Daily reversion rate of loneliness toward the agent's baseline.
    pub alpha_l: f64,
    /// Loneliness reduction per activated tie.
    pub beta_l: f64,
    /// Daily activation probability of each tie.
    pub interaction_prob: f64,
    /// Days between social events.
    pub event_period: u32,
    pub event_effect: f64,
    pub visit_loneliness_effect: f64,
    pub visit_stress_effect: f64,
    pub frailty_drift: f64,
    pub frailty_stress_coeff: f64,
    /// Stress change per day per unit of loneliness above 0.5.
    pub stress_coupling: f64,
    pub energy_recovery: f64,
    pub event_energy_cost: f64,
    /// Agents need energy strictly above this to attend an event.
    pub event_energy_gate: f64,
    pub tie_formation_rate: f64,
    pub degree_saturation: f64,
    pub candidate_pairs_per_week: u32,
    pub init_edge_prob: Option<f64>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            alpha_l: 0.05,
            beta_l: 0.001,
            interaction_prob: 0.3,
            event_period: 3,
            event_effect: 0.0015,
            visit_loneliness_effect: 0.015,
            visit_stress_effect: 0.03,
            frailty_drift: 0.002,
            frailty_stress_coeff: 0.002,
            stress_coupling: 0.02,
            energy_recovery: 0.02,
            event_energy_cost: 0.05,
            event_energy_gate: 0.2,
            tie_formation_rate: 0.2,
            degree_saturation: 6.0,
            candidate_pairs_per_week: 10,
            init_edge_prob: None,
        }
    }
}

impl DynamicsConfig {
    pub fn edge_prob_for(&self, n_agents: usize) -> f64 {
        match self.init_edge_prob {
            Some(p) => p,
            None if n_agents > 1 => (4.0 / (n_agents - 1) as f64).min(1.0),
            None => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            ("interaction_prob", self.interaction_prob),
            ("event_energy_gate", self.event_energy_gate),
            ("tie_formation_rate", self.tie_formation_rate),
        ];
        for (name, p) in probs
            .into_iter()
            .chain(self.init_edge_prob.map(|p| ("init_edge_prob", p)))
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidConfig(format!("{name} = {p} is not a probability")));
            }
        }
        let rates = [
            ("alpha_l", self.alpha_l),
            ("beta_l", self.beta_l),
            ("event_effect", self.event_effect),
            ("visit_loneliness_effect", self.visit_loneliness_effect),
            ("visit_stress_effect", self.visit_stress_effect),
            ("frailty_drift", self.frailty_drift),
            ("frailty_stress_coeff", self.frailty_stress_coeff),
            ("stress_coupling", self.stress_coupling),
            ("energy_recovery", self.energy_recovery),
            ("event_energy_cost", self.event_energy_cost),
        ];
        for (name, r) in rates {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} = {r} must be a finite rate >= 0"
                )));
            }
        }
        if self.alpha_l > 1.0 {
            return Err(SimError::InvalidConfig(format!("alpha_l = {} exceeds 1", self.alpha_l)));
        }
        if self.event_period < 1 {
            return Err(SimError::InvalidConfig("event_period must be >= 1".into()));
        }
        if self.degree_saturation.is_nan() || self.degree_saturation <= 0.0 {
            return Err(SimError::InvalidConfig("degree_saturation must be > 0".into()));
        }
        Ok(())
    }
}
