use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DynamicsConfig, SimError, SocialNetwork};
use crate::PolicyParams;

/// Days of interaction history kept per agent.
pub const HISTORY_DAYS: usize = 7;

const AGE_RANGE: (f64, f64) = (65.0, 95.0);
const BASELINE_RANGE: (f64, f64) = (0.5, 0.9);
const INITIAL_OFFSET: f64 = 0.1;
const STRESS_RANGE: (f64, f64) = (0.2, 0.5);
const ENERGY_RANGE: (f64, f64) = (0.5, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub loneliness: f64,
    pub frailty: f64,
    pub stress: f64,
    pub energy: f64,
    pub baseline_loneliness: f64,
    pub age: f64,
}

impl AgentState {
    fn clip(&mut self) {
        self.loneliness = self.loneliness.clamp(0.0, 1.0);
        self.frailty = self.frailty.clamp(0.0, 1.0);
        self.stress = self.stress.clamp(0.0, 1.0);
        self.energy = self.energy.clamp(0.0, 1.0);
    }

    pub fn is_bounded(&self) -> bool {
        [self.loneliness, self.frailty, self.stress, self.energy]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }
}

/// What happened during one call to [`World::step_day`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DayReport {
    pub interactions: usize,
    pub event_participants: usize,
    pub visits_attempted: usize,
    pub visits_made: usize,
}

/// Facility state plus the run's single random generator.
///
/// All randomness of a run is drawn from `rng` in a fixed order, so two
/// worlds built from the same seed and config stay equal day by day.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    day: u32,
    agents: Vec<AgentState>,
    network: SocialNetwork,
    rng: ChaCha8Rng,
    interaction_log: VecDeque<Vec<u32>>,
    dynamics: DynamicsConfig,
}

/// Probability that an unlinked pair forms a tie in a weekly update.
pub fn tie_probability(l_i: f64, l_j: f64, k_i: usize, k_j: usize, dynamics: &DynamicsConfig) -> f64 {
    let similarity = 1.0 - (l_i - l_j).abs();
    let saturation = (-((k_i + k_j) as f64) / (2.0 * dynamics.degree_saturation)).exp();
    (dynamics.tie_formation_rate * similarity * saturation).clamp(0.0, 1.0)
}

impl World {
    /// Builds the initial population and network.
    ///
    /// Draw order: for each agent by ascending id, age, baseline loneliness,
    /// initial loneliness offset, frailty noise, stress, energy; then one
    /// draw per pair `(i, j)`, `i < j`, in lexicographic order for the
    /// initial ties.
    pub fn new(seed: u64, n_agents: usize, dynamics: DynamicsConfig) -> Result<Self, SimError> {
        if n_agents < 2 {
            return Err(SimError::InvalidConfig(format!(
                "need at least 2 agents, got {n_agents}"
            )));
        }
        dynamics.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let agents = (0..n_agents)
            .map(|id| {
                let age = rng.random_range(AGE_RANGE.0..AGE_RANGE.1);
                let baseline = rng.random_range(BASELINE_RANGE.0..BASELINE_RANGE.1);
                let loneliness = baseline + rng.random_range(-INITIAL_OFFSET..INITIAL_OFFSET);
                // older residents start frailer
                let age_frac = (age - AGE_RANGE.0) / (AGE_RANGE.1 - AGE_RANGE.0);
                let frailty = 0.3 + 0.4 * age_frac + rng.random_range(-0.1..0.1);
                let stress = rng.random_range(STRESS_RANGE.0..STRESS_RANGE.1);
                let energy = rng.random_range(ENERGY_RANGE.0..ENERGY_RANGE.1);
                let mut a = AgentState {
                    id,
                    loneliness,
                    frailty,
                    stress,
                    energy,
                    baseline_loneliness: baseline,
                    age,
                };
                a.clip();
                a
            })
            .collect();

        let p = dynamics.edge_prob_for(n_agents);
        let mut network = SocialNetwork::empty(n_agents);
        for i in 0..n_agents {
            for j in i + 1..n_agents {
                if rng.random::<f64>() < p {
                    network.add_edge(i, j);
                }
            }
        }

        Ok(World {
            day: 0,
            agents,
            network,
            rng,
            interaction_log: VecDeque::new(),
            dynamics,
        })
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    /// Direct state access for tests and scripted scenarios.
    pub fn agents_mut(&mut self) -> &mut [AgentState] {
        &mut self.agents
    }

    pub fn network(&self) -> &SocialNetwork {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut SocialNetwork {
        &mut self.network
    }

    pub fn dynamics(&self) -> &DynamicsConfig {
        &self.dynamics
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn degree(&self, id: usize) -> usize {
        self.network.degree(id)
    }

    /// Interaction counts of one agent over the retained window, oldest first.
    pub fn interaction_history(&self, id: usize) -> Vec<u32> {
        self.interaction_log.iter().map(|day| day[id]).collect()
    }

    pub fn history_len(&self) -> usize {
        self.interaction_log.len()
    }

    pub fn mean_loneliness(&self) -> f64 {
        self.agents.iter().map(|a| a.loneliness).sum::<f64>() / self.agents.len() as f64
    }

    /// Advances one day. `policy = None` runs without any intervention.
    pub fn step_day(&mut self, policy: Option<&PolicyParams>) -> DayReport {
        let d = self.dynamics;
        let mut report = DayReport::default();

        let mut counts = vec![0u32; self.agents.len()];
        let edges: Vec<(usize, usize)> = self.network.edges().collect();
        for (i, j) in edges {
            if self.rng.random::<f64>() < d.interaction_prob {
                for k in [i, j] {
                    self.agents[k].loneliness -= d.beta_l;
                    self.agents[k].stress -= d.beta_l / 2.0;
                    counts[k] += 1;
                }
                report.interactions += 1;
            }
        }

        for a in &mut self.agents {
            a.loneliness += d.alpha_l * (a.baseline_loneliness - a.loneliness);
            a.stress += d.stress_coupling * (a.loneliness - 0.5);
            a.frailty += d.frailty_drift + d.frailty_stress_coeff * a.stress;
            a.energy += d.energy_recovery;
        }

        if let Some(p) = policy {
            if self.day.is_multiple_of(d.event_period) {
                report.event_participants = self.apply_social_event(p.theta_s);
            }
            let (attempted, made) = self.apply_home_visits(p.theta_t, p.theta_p);
            report.visits_attempted = attempted;
            report.visits_made = made;
        }

        for a in &mut self.agents {
            a.clip();
        }

        self.interaction_log.push_back(counts);
        while self.interaction_log.len() > HISTORY_DAYS {
            self.interaction_log.pop_front();
        }
        self.day += 1;
        report
    }

    /// Agents with energy above the gate attend; each loses
    /// `event_effect * theta_s` loneliness and pays the energy cost.
    /// Returns the number of participants.
    pub fn apply_social_event(&mut self, theta_s: f64) -> usize {
        let d = self.dynamics;
        let mut participants = 0;
        for a in self.agents.iter_mut().filter(|a| a.energy > d.event_energy_gate) {
            a.loneliness = (a.loneliness - d.event_effect * theta_s).clamp(0.0, 1.0);
            a.energy = (a.energy - d.event_energy_cost).clamp(0.0, 1.0);
            participants += 1;
        }
        participants
    }

    /// One draw per eligible agent (`loneliness > theta_t`) in id order; a
    /// draw below `theta_p` is a successful visit. Returns
    /// `(eligible, successful)`.
    pub fn apply_home_visits(&mut self, theta_t: f64, theta_p: f64) -> (usize, usize) {
        let d = self.dynamics;
        let mut attempted = 0;
        let mut made = 0;
        for a in &mut self.agents {
            if a.loneliness > theta_t {
                attempted += 1;
                if self.rng.random::<f64>() < theta_p {
                    a.loneliness = (a.loneliness - d.visit_loneliness_effect).clamp(0.0, 1.0);
                    a.stress = (a.stress - d.visit_stress_effect).clamp(0.0, 1.0);
                    made += 1;
                }
            }
        }
        (attempted, made)
    }

    /// Weekly homophilous tie formation. Samples up to
    /// `candidate_pairs_per_week` distinct unlinked pairs; each links with
    /// [`tie_probability`] evaluated on current degrees. Ties never
    /// dissolve. Returns the number of new ties.
    pub fn update_network(&mut self) -> usize {
        let d = self.dynamics;
        let candidates = self.network.non_edges();
        let k = (d.candidate_pairs_per_week as usize).min(candidates.len());
        if k == 0 {
            return 0;
        }
        let picks = rand::seq::index::sample(&mut self.rng, candidates.len(), k);
        let mut formed = 0;
        for idx in picks.iter() {
            let (i, j) = candidates[idx];
            let p = tie_probability(
                self.agents[i].loneliness,
                self.agents[j].loneliness,
                self.network.degree(i),
                self.network.degree(j),
                &d,
            );
            if self.rng.random::<f64>() < p {
                self.network.add_edge(i, j);
                formed += 1;
            }
        }
        formed
    }
}
