//! Scenario configuration, the simulation loop, metrics and experiment drivers.

pub mod config;
pub mod experiments;
pub mod metrics;
pub mod output;
pub mod sim;
pub mod stats;

pub use config::{Ablation, BeliefConfig, CoordinationConfig, CostWeights, LedgerConfig, ScenarioConfig, VerificationConfig};
pub use metrics::{Components, Decomposition, RunMetrics};
pub use sim::{audit_alerts, run_label, run_scenario, RunOutput};
pub use stats::{mean_std, paired_t_test, PairedTest};
