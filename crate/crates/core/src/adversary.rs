//! Attack plans and their recorded outcomes.
//!
//! A plan is data: what to do, when, and against which targets. The
//! simulation loop applies it at fixed points of the step (sensor spoofing
//! during sensing, network conditions during the ledger round, everything
//! else in the attack phase) and logs one outcome row per attempt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::Behavior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Replace ground sensor readings with an attacker-chosen value.
    SensorSpoof,
    /// Modify transactions in transit (pre-commit) or a replica of the
    /// committed chain (post-commit).
    DataTamper,
    /// Push fabricated alerts at the dissemination layer.
    AlertInject,
    /// Drop and delay consensus messages.
    Dos,
    /// Switch validators to Byzantine behaviours.
    ByzantineMix,
    /// Resubmit every captured transaction and delivered alert.
    Replay,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::SensorSpoof => "sensor-spoof",
            AttackKind::DataTamper => "data-tamper",
            AttackKind::AlertInject => "alert-inject",
            AttackKind::Dos => "dos",
            AttackKind::ByzantineMix => "byzantine-mix",
            AttackKind::Replay => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackPlan {
    pub kind: AttackKind,
    /// Active on steps `start <= t < end` with `(t - start) % every == 0`.
    pub start: u64,
    pub end: u64,
    #[serde(default = "one")]
    pub every: u64,
    /// Ground sensor ids (spoofing) or validator indices (Byzantine mix).
    #[serde(default)]
    pub targets: Vec<u32>,
    /// UAV ids whose thermal readings are spoofed. Only honoured when UAV
    /// links are configured as unauthenticated.
    #[serde(default)]
    pub uav_targets: Vec<u32>,
    /// Spoofed reading.
    #[serde(default = "hot")]
    pub reading: f64,
    /// Behaviour per target validator; the last entry repeats.
    #[serde(default)]
    pub behaviors: Vec<Behavior>,
    #[serde(default)]
    pub drop_prob: f64,
    #[serde(default)]
    pub added_delay: u64,
    #[serde(default = "unit")]
    pub delay_multiplier: f64,
    /// Tamper with the committed chain instead of in-flight transactions.
    #[serde(default)]
    pub post_commit: bool,
    /// Validators colluding in a post-commit rewrite. More than `f` exceeds
    /// the fault model.
    #[serde(default)]
    pub colluders: usize,
}

fn one() -> u64 {
    1
}
fn hot() -> f64 {
    85.0
}
fn unit() -> f64 {
    1.0
}

impl AttackPlan {
    pub fn new(kind: AttackKind, start: u64, end: u64, every: u64) -> Self {
        AttackPlan {
            kind,
            start,
            end,
            every,
            targets: Vec::new(),
            uav_targets: Vec::new(),
            reading: hot(),
            behaviors: Vec::new(),
            drop_prob: 0.0,
            added_delay: 0,
            delay_multiplier: 1.0,
            post_commit: false,
            colluders: 0,
        }
    }

    pub fn active_at(&self, t: u64) -> bool {
        t >= self.start && t < self.end && (t - self.start).is_multiple_of(self.every)
    }

    /// Behaviour assigned to the i-th target.
    pub fn behavior_for(&self, i: usize) -> Behavior {
        self.behaviors.get(i).or(self.behaviors.last()).copied().unwrap_or(Behavior::Censor)
    }

    pub fn validate(&self, horizon: u64) -> Result<()> {
        if self.every == 0 {
            return Err(Error::config("every", "must be >= 1"));
        }
        if self.start >= self.end {
            return Err(Error::config("start", "window must be non-empty"));
        }
        if self.start >= horizon {
            return Err(Error::config("start", "window starts after the horizon"));
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::config("drop_prob", "must lie in [0, 1]"));
        }
        if !(self.delay_multiplier >= 1.0 && self.delay_multiplier.is_finite()) {
            return Err(Error::config("delay_multiplier", "must be finite and >= 1"));
        }
        if !self.reading.is_finite() {
            return Err(Error::config("reading", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Refused by a signature, nonce, quorum, gate or enforcement check.
    Rejected,
    /// Accepted as input but without effect on any guarantee.
    Absorbed,
    /// A guarantee did not hold. Only expected when the plan deliberately
    /// exceeds the fault model or a protection is ablated.
    GuaranteeViolated,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Rejected => "rejected",
            Outcome::Absorbed => "absorbed",
            Outcome::GuaranteeViolated => "guarantee-violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackOutcome {
    pub plan: usize,
    pub kind: AttackKind,
    pub step: u64,
    pub target: String,
    pub outcome: Outcome,
    pub detail: String,
}

/// File format for `attack --plan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub attacks: Vec<AttackPlan>,
}

impl PlanFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("attacks", e.message().to_string()))
    }
}

/// In-model plans covering every attack kind, keyed by name. Byzantine
/// validators never exceed `f`.
pub fn standard_matrix(horizon: u64, f: usize) -> Vec<(String, AttackPlan)> {
    let h = horizon.max(2);
    let window = |a: u64, b: u64| (h * a / 10, (h * b / 10).max(h * a / 10 + 1));
    let mut out = Vec::new();

    let (s, e) = window(1, 9);
    let mut spoof = AttackPlan::new(AttackKind::SensorSpoof, s, e, 1);
    spoof.targets = vec![0, 7, 12];
    out.push(("sensor-spoof".to_string(), spoof));

    let (s, e) = window(1, 9);
    out.push(("tamper-in-flight".to_string(), AttackPlan::new(AttackKind::DataTamper, s, e, 25)));
    let mut post = AttackPlan::new(AttackKind::DataTamper, s, e, 250);
    post.post_commit = true;
    post.colluders = f;
    out.push(("tamper-committed".to_string(), post));

    let (s, e) = window(1, 10);
    out.push(("alert-inject".to_string(), AttackPlan::new(AttackKind::AlertInject, s, e, 50)));

    let (s, e) = window(3, 6);
    let mut dos = AttackPlan::new(AttackKind::Dos, s, e, 1);
    dos.drop_prob = 0.3;
    dos.added_delay = 2;
    dos.delay_multiplier = 2.0;
    out.push(("dos".to_string(), dos));

    let (s, e) = window(0, 10);
    let mut byz = AttackPlan::new(AttackKind::ByzantineMix, s, e, 1);
    byz.targets = (0..f as u32).collect();
    byz.behaviors = vec![Behavior::ForgeApprove, Behavior::Equivocate];
    out.push(("byzantine-mix".to_string(), byz));

    let (s, e) = window(3, 10);
    out.push(("replay".to_string(), AttackPlan::new(AttackKind::Replay, s, e, (h / 5).max(1))));
    out
}
