//! Two-stage anomaly verification.
//!
//! Stage 1 blends the cell posterior with the risk map through a logistic
//! link. Stage 2 treats the stage-1 score as a prior and folds in dedicated
//! verification samples with the thermal likelihood. Both thresholds rise
//! affinely with recent temperature volatility.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::belief::{bayes_update, Likelihood};
use crate::coordination::{Uav, VerifyTask};
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::sensing::{Observation, Target};
use crate::world::logistic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage1Params {
    pub belief_gain: f64,
    pub belief_mid: f64,
    pub risk_gain: f64,
    pub risk_mid: f64,
}

impl Default for Stage1Params {
    fn default() -> Self {
        Stage1Params { belief_gain: 10.0, belief_mid: 0.5, risk_gain: 4.0, risk_mid: 0.3 }
    }
}

impl Stage1Params {
    /// Smallest belief that can clear `tau` for any consistency in [0, 1].
    pub fn belief_floor(&self, tau: f64) -> f64 {
        let logit = (tau / (1.0 - tau)).ln();
        self.belief_mid + (logit - self.risk_gain * (1.0 - self.risk_mid)) / self.belief_gain
    }
}

/// `logistic(belief_gain * (belief - belief_mid) + risk_gain * (consistency - risk_mid))`.
pub fn stage1_confidence(belief: f64, consistency: f64, p: &Stage1Params) -> f64 {
    logistic(p.belief_gain * (belief - p.belief_mid) + p.risk_gain * (consistency - p.risk_mid)).clamp(0.0, 1.0)
}

/// Bayesian odds update of the stage-1 score with verification samples.
pub fn stage2_confidence(conf1: f64, samples: &[bool], lik: Likelihood, v_min: usize) -> Result<f64> {
    if samples.len() < v_min {
        return Err(Error::InsufficientSamples { have: samples.len(), need: v_min });
    }
    Ok(samples.iter().fold(conf1, |p, &d| bayes_update(p, lik, d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdParams {
    pub tau1_base: f64,
    pub tau1_max: f64,
    pub tau2_base: f64,
    pub tau2_max: f64,
    /// Volatility at which thresholds reach their maxima.
    pub volatility_cap: f64,
    pub window: usize,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams {
            tau1_base: 0.6,
            tau1_max: 0.7,
            tau2_base: 0.8,
            tau2_max: 0.9,
            volatility_cap: 4.0,
            window: 30,
        }
    }
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        let in01 = |v: f64| v > 0.0 && v < 1.0;
        if ![self.tau1_base, self.tau1_max, self.tau2_base, self.tau2_max].into_iter().all(in01) {
            return Err(Error::config("thresholds", "all thresholds must lie in (0,1)"));
        }
        if self.tau1_max < self.tau1_base || self.tau2_max < self.tau2_base {
            return Err(Error::config("thresholds", "maxima must not be below base values"));
        }
        if !(self.tau2_base > self.tau1_base && self.tau2_max > self.tau1_max) {
            return Err(Error::config("thresholds", "tau2 must exceed tau1 at both ends"));
        }
        if !(self.volatility_cap > 0.0) {
            return Err(Error::config("thresholds.volatility_cap", "must be positive"));
        }
        Ok(())
    }
}

/// Thresholds for a given volatility. Both are affine in the clamped
/// volatility fraction, so `tau2 > tau1` holds whenever it holds at both
/// endpoints.
pub fn adapt_thresholds(volatility: f64, p: &ThresholdParams) -> (f64, f64) {
    let frac = (volatility / p.volatility_cap).clamp(0.0, 1.0);
    let frac = if frac.is_nan() { 0.0 } else { frac };
    (
        p.tau1_base + frac * (p.tau1_max - p.tau1_base),
        p.tau2_base + frac * (p.tau2_max - p.tau2_base),
    )
}

/// Rolling variance of a scalar signal.
#[derive(Debug, Clone)]
pub struct VolatilityTracker {
    window: usize,
    values: VecDeque<f64>,
}

impl VolatilityTracker {
    pub fn new(window: usize) -> Self {
        VolatilityTracker { window: window.max(1), values: VecDeque::new() }
    }

    pub fn push(&mut self, v: f64) {
        if self.values.len() == self.window {
            self.values.pop_front();
        }
        self.values.push_back(v);
    }

    pub fn variance(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.values.iter().sum::<f64>() / n as f64;
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
    }
}

/// SHA-256 over a fixed little-endian encoding of an observation.
pub fn evidence_digest(o: &Observation) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([o.modality.index() as u8]);
    h.update(o.sensor_id.to_le_bytes());
    match o.target {
        Target::Cell(c) => {
            h.update([0u8]);
            h.update(c.x.to_le_bytes());
            h.update(c.y.to_le_bytes());
        }
        Target::Region(r) => {
            h.update([1u8]);
            for v in [r.x0, r.y0, r.x1, r.y1] {
                h.update(v.to_le_bytes());
            }
        }
    }
    h.update(o.reading.to_bits().to_le_bytes());
    h.update([o.detection as u8]);
    h.update(o.emitted.to_le_bytes());
    h.update(o.delivered.to_le_bytes());
    h.finalize().into()
}

/// Digest over an ordered list of evidence digests.
pub fn evidence_root(digests: &[[u8; 32]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((digests.len() as u64).to_le_bytes());
    for d in digests {
        h.update(d);
    }
    h.finalize().into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventStatus {
    /// Awaiting a verification UAV.
    Pending,
    Verifying,
    /// Ungoverned pipelines: watching for the release threshold.
    Monitoring,
    /// Passed stage 2; waiting on the ledger and human review.
    Escalated,
    Alerted,
    /// Returned to monitoring (stage 2 negative, release never reached, or
    /// human rejection).
    Dismissed,
    Rejected,
}

impl EventStatus {
    pub fn is_open(self) -> bool {
        matches!(self, EventStatus::Pending | EventStatus::Verifying | EventStatus::Monitoring | EventStatus::Escalated)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventStatus::Pending => "pending",
            EventStatus::Verifying => "verifying",
            EventStatus::Monitoring => "monitoring",
            EventStatus::Escalated => "escalated",
            EventStatus::Alerted => "alerted",
            EventStatus::Dismissed => "dismissed",
            EventStatus::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub created: u64,
    pub dispatched: Option<u64>,
    pub verified: Option<u64>,
    pub submitted: Option<u64>,
    pub committed: Option<u64>,
    pub approved: Option<u64>,
    pub authorized: Option<u64>,
    pub delivered: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub id: u64,
    pub cell: Cell,
    pub conf1: f64,
    pub conf_final: Option<f64>,
    pub samples: Vec<bool>,
    pub evidence: Vec<[u8; 32]>,
    pub truth_fire: bool,
    pub fire_id: Option<u32>,
    pub escalation: u32,
    pub status: EventStatus,
    pub time: Timeline,
}

impl AnomalyEvent {
    pub fn new(id: u64, cell: Cell, step: u64, conf1: f64) -> Self {
        AnomalyEvent {
            id,
            cell,
            conf1,
            conf_final: None,
            samples: Vec::new(),
            evidence: Vec::new(),
            truth_fire: false,
            fire_id: None,
            escalation: 0,
            status: EventStatus::Pending,
            time: Timeline { created: step, ..Default::default() },
        }
    }

    /// Run stage 2 and record the result.
    pub fn finalize(&mut self, lik: Likelihood, v_min: usize) -> Result<f64> {
        let f = stage2_confidence(self.conf1, &self.samples, lik, v_min)?;
        self.conf_final = Some(f);
        Ok(f)
    }
}

/// Match pending events to available UAVs, closest pair first. Ties break
/// on event id, then UAV id. Unmatched events stay queued.
pub fn dispatch_verification(
    pending: &[(u64, Cell)],
    uavs: &[Uav],
    reserve: f64,
    step: u64,
) -> Vec<(u32, VerifyTask)> {
    let mut free: Vec<&Uav> = uavs.iter().filter(|u| u.available_for_verification(reserve)).collect();
    let mut queue: Vec<(u64, Cell)> = pending.to_vec();
    let mut out = Vec::new();
    while !free.is_empty() && !queue.is_empty() {
        let mut best: Option<(u32, u64, u32, usize, usize)> = None;
        for (ei, &(eid, cell)) in queue.iter().enumerate() {
            for (ui, u) in free.iter().enumerate() {
                let key = (u.pos.chebyshev(cell), eid, u.id, ei, ui);
                if best.is_none_or(|b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                    best = Some(key);
                }
            }
        }
        let (_, eid, _, ei, ui) = best.expect("non-empty");
        let u = free.remove(ui);
        let (_, cell) = queue.remove(ei);
        out.push((u.id, VerifyTask { event_id: eid, target: cell, dispatched: step }));
    }
    out
}

/// Steps for a UAV at `from` to reach `to` at `speed` cells per step.
pub fn arrival_steps(from: Cell, to: Cell, speed: u32) -> Option<u64> {
    if speed == 0 {
        return if from == to { Some(0) } else { None };
    }
    Some((from.chebyshev(to) as u64).div_ceil(speed as u64))
}
