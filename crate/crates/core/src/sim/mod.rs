//! Seeded daily-timestep model of the facility population.

mod config;
mod network;
mod world;

pub use config::DynamicsConfig;
pub use network::SocialNetwork;
pub use world::{tie_probability, AgentState, DayReport, World, HISTORY_DAYS};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
