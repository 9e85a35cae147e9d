//! Scenario-file front end for the agentmix library: a versioned TOML
//! schema for declaring spaces, agents, environments, measures, and checks,
//! plus the `agentmix` binary that runs them.

pub mod expr;
pub mod reports;
pub mod run;
pub mod scenario;

pub use run::run_cli;
pub use scenario::{parse_doc, parse_scenario, serialize_doc, Doc, Scenario, ScenarioError};
