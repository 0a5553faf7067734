//! Alert gate, human review, severity and dissemination.

pub mod dissemination;
pub mod gate;
pub mod oracle;
pub mod severity;

pub use dissemination::{AlertAuthority, AlertPayload, ChannelParams, DeliveryReport, Disseminator, Enforcement};
pub use gate::{evaluate_alert_gate, valid_votes, GateDecision, GatePolicy, GovernanceContract};
pub use oracle::{binomial_tail, HumanOracle, OracleParams, Review};
pub use severity::{assign_severity, propose_severity, Severity, SeverityParams};
