//! Scenario configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::AttackPlan;
use crate::belief::{Likelihoods, RiskWeights};
use crate::coordination::{Policy, UavParams};
use crate::crypto::Scheme;
use crate::error::{Error, Result};
use crate::governance::{ChannelParams, GatePolicy, OracleParams, SeverityParams};
use crate::ledger::ConsensusParams;
use crate::sensing::SensingParams;
use crate::verification::{Stage1Params, ThresholdParams};
use crate::world::{AnomalySchedule, WorldParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeliefConfig {
    pub likelihoods: Likelihoods,
    pub risk: RiskWeights,
    /// Drift target for unobserved cells is `prior_floor + prior_scale * risk`.
    pub prior_floor: f64,
    pub prior_scale: f64,
    /// Fraction of the gap to the prior closed per unobserved step.
    pub drift: f64,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        BeliefConfig {
            likelihoods: Likelihoods::default(),
            risk: RiskWeights::default(),
            prior_floor: 0.005,
            prior_scale: 0.02,
            drift: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoordinationConfig {
    pub uav: UavParams,
    /// Side of the square patrol zones.
    pub zone_tile: u32,
    /// Staleness rate in the coverage gain `1 - exp(-lambda * dt)`.
    pub lambda: f64,
    /// Controller-to-UAV commands (zone assignments and verification
    /// dispatches) per step; 0 means unbounded. Commands over the budget
    /// wait for a later step.
    pub message_budget: u32,
}

impl Default for CoordinationConfig {
    fn default() -> Self {
        CoordinationConfig { uav: UavParams::default(), zone_tile: 10, lambda: 0.05, message_budget: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationConfig {
    pub stage1: Stage1Params,
    pub thresholds: ThresholdParams,
    /// Verification samples required before stage 2 runs.
    pub v_min: usize,
    /// New events within this Chebyshev radius of an active lineage are folded into it.
    pub suppression_radius: u32,
    /// Steps a dismissed or rejected lineage stays quiet before re-escalating.
    pub cooldown: u64,
    /// Further escalations allowed per lineage after the first.
    pub max_reescalations: u32,
    /// A lineage with no open event and no stage-1 trigger for this many
    /// steps is retired, so a later fire at the same place is a new event.
    pub rearm_after: u64,
    /// Steps an event may wait for verification before it is dropped.
    pub verify_timeout: u64,
    /// Half-width of the alert boundary around the event cell.
    pub boundary_radius: u32,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            stage1: Stage1Params::default(),
            thresholds: ThresholdParams::default(),
            v_min: 3,
            suppression_radius: 4,
            cooldown: 30,
            max_reescalations: 3,
            rearm_after: 60,
            verify_timeout: 150,
            boundary_radius: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LedgerConfig {
    pub validators: usize,
    pub consensus: ConsensusParams,
    pub scheme: Scheme,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig { validators: 7, consensus: ConsensusParams::default(), scheme: Scheme::Ed25519 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { alpha: 1.0, beta: 100.0, gamma: 0.0001 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    /// Fixed lawnmower routes with opportunistic verification instead of
    /// risk-weighted allocation and dispatch.
    pub no_coordination: bool,
    /// Gate without the human term.
    pub no_hitl: bool,
    /// No ledger: the gate is evaluated locally and nothing enforces it at
    /// broadcast time.
    pub no_blockchain: bool,
}

impl Ablation {
    pub fn label(&self) -> &'static str {
        match (self.no_coordination, self.no_hitl, self.no_blockchain) {
            (false, false, false) => "full",
            (true, false, false) => "no-coordination",
            (false, true, false) => "no-hitl",
            (false, false, true) => "no-blockchain",
            _ => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub policy: Policy,
    pub ablation: Ablation,
    pub world: WorldParams,
    pub anomalies: AnomalySchedule,
    pub sensing: SensingParams,
    pub belief: BeliefConfig,
    pub coordination: CoordinationConfig,
    pub verification: VerificationConfig,
    pub ledger: LedgerConfig,
    pub gate: GatePolicy,
    pub oracle: OracleParams,
    pub severity: SeverityParams,
    pub channels: ChannelParams,
    pub cost: CostWeights,
    /// Slack factor applied to the latency bound check.
    pub bound_slack: f64,
    pub attacks: Vec<AttackPlan>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            horizon: 3000,
            seeds: (1..=20).collect(),
            policy: Policy::Proposed,
            ablation: Ablation::default(),
            world: WorldParams::default(),
            anomalies: AnomalySchedule::default(),
            sensing: SensingParams::default(),
            belief: BeliefConfig::default(),
            coordination: CoordinationConfig::default(),
            verification: VerificationConfig::default(),
            ledger: LedgerConfig::default(),
            gate: GatePolicy::default(),
            oracle: OracleParams::default(),
            severity: SeverityParams::default(),
            channels: ChannelParams::default(),
            cost: CostWeights::default(),
            bound_slack: 1.0,
            attacks: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::config("toml", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn governed(&self) -> bool {
        self.policy == Policy::Proposed
    }

    pub fn uses_ledger(&self) -> bool {
        self.governed() && !self.ablation.no_blockchain
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be > 0"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.world.width == 0 || self.world.height == 0 {
            return Err(Error::config("world", "grid dimensions must be positive"));
        }
        if self.uses_ledger() && 3 * self.ledger.consensus.f >= self.ledger.validators {
            return Err(Error::config(
                "ledger.validators",
                format!("need f < k/3, got f={} k={}", self.ledger.consensus.f, self.ledger.validators),
            ));
        }
        if self.coordination.zone_tile == 0 {
            return Err(Error::config("coordination.zone_tile", "must be > 0"));
        }
        if !(self.coordination.lambda > 0.0) {
            return Err(Error::config("coordination.lambda", "must be > 0"));
        }
        if self.verification.v_min == 0 {
            return Err(Error::config("verification.v_min", "must be >= 1"));
        }
        if self.verification.rearm_after == 0 {
            return Err(Error::config("verification.rearm_after", "must be >= 1"));
        }
        let b = &self.belief;
        if !(0.0..=1.0).contains(&b.drift) {
            return Err(Error::config("belief.drift", "must lie in [0, 1]"));
        }
        if !(b.prior_floor >= 0.0 && b.prior_scale >= 0.0 && b.prior_floor + b.prior_scale <= 1.0) {
            return Err(Error::config("belief.prior_floor", "prior must stay within [0, 1]"));
        }
        b.likelihoods.validate()?;
        self.verification.thresholds.validate()?;
        if self.gate.tau < self.verification.thresholds.tau1_base {
            return Err(Error::config("gate.tau", "must not be below the stage-1 threshold"));
        }
        self.gate.validate()?;
        self.oracle.validate()?;
        self.severity.validate()?;
        self.channels.validate()?;
        for (i, a) in self.attacks.iter().enumerate() {
            a.validate(self.horizon).map_err(|e| Error::config("attacks", format!("plan {i}: {e}")))?;
        }
        Ok(())
    }
}
