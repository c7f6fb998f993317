//! Agent-based simulation of an elderly-care facility with auditable,
//! closed-loop adaptation of intervention policy.
//!
//! The crate is organised around three layers:
//!
//! - [`sim`]: the seeded daily-timestep agent model (loneliness, frailty,
//!   stress, energy, a homophilous social network, social events and home
//!   visits).
//! - [`diagnosis`]: per-agent structured risk assessment, either from a
//!   deterministic heuristic or from an Ollama-compatible model, aggregated
//!   to population-level [`diagnosis::MacroStats`].
//! - [`control`]: bounded deterministic parameter updates driven only by
//!   those macro statistics, plus the two comparison controllers.
//!
//! [`audit`] records every control cycle as newline-delimited JSON and can
//! replay a log against the controller. [`experiment`] and [`stats`] run the
//! five-condition ablation, the sensitivity sweep and the pairwise
//! statistics.

pub mod audit;
pub mod config;
pub mod control;
pub mod diagnosis;
pub mod experiment;
pub mod policy;
pub mod sim;
pub mod stats;

pub use policy::PolicyParams;
