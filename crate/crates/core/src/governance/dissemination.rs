//! Geo-fenced alert broadcast over redundant channels.

use rand::Rng;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Dims;
use crate::ledger::{Contract, GateOutcome, Ledger, Receipt};
use crate::rng::SimRng;
use crate::sensing::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub channels: u32,
    pub p_fail: f64,
    /// Steps from a successful broadcast to delivery.
    pub delay: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams { channels: 3, p_fail: 0.1, delay: 1 }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::config("channels.channels", "need at least one channel"));
        }
        if !(0.0..=1.0).contains(&self.p_fail) {
            return Err(Error::config("channels.p_fail", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertPayload {
    pub event_id: u64,
    pub boundary: Rect,
    pub severity: u8,
    pub advisory: String,
}

impl AlertPayload {
    pub fn new(event_id: u64, boundary: Rect, severity: u8) -> Self {
        let advisory = format!("Wildfire warning level {severity} for area {boundary}");
        AlertPayload { event_id, boundary, severity, advisory }
    }

    pub fn validate(&self, dims: Dims, levels: u8) -> Result<()> {
        let b = self.boundary;
        if b.x0 > b.x1 || b.y0 > b.y1 || b.x1 >= dims.width || b.y1 >= dims.height {
            return Err(Error::config("payload.boundary", format!("{b} outside grid")));
        }
        if !(1..=levels).contains(&self.severity) {
            return Err(Error::config("payload.severity", format!("{} not in 1..={levels}", self.severity)));
        }
        Ok(())
    }
}

/// Source of broadcast authorizations.
pub trait AlertAuthority {
    /// Committed Alert=1 decision for the event, if any.
    fn authorization(&self, event_id: u64) -> Option<&Receipt>;
}

impl<C: Contract> AlertAuthority for Ledger<C> {
    fn authorization(&self, event_id: u64) -> Option<&Receipt> {
        self.receipt(event_id).filter(|r| r.outcome == GateOutcome::Alert)
    }
}

/// Whether broadcasts must be backed by the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enforcement {
    Chain,
    /// No ledger in the loop; anything submitted is broadcast.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryReport {
    pub event_id: u64,
    pub decision_step: u64,
    pub attempt_step: u64,
    pub delivery_step: Option<u64>,
    pub severity: u8,
    pub boundary: Rect,
    pub channels_ok: Vec<bool>,
    /// Backed by an on-chain decision.
    pub authorized: bool,
}

impl DeliveryReport {
    pub fn delivered(&self) -> bool {
        self.delivery_step.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionAttempt {
    pub step: u64,
    pub event_id: u64,
}

#[derive(Debug, Clone)]
pub struct Disseminator {
    pub params: ChannelParams,
    pub enforcement: Enforcement,
    pub blocked: Vec<InjectionAttempt>,
    /// Events already delivered; a second broadcast is refused.
    delivered: BTreeSet<u64>,
}

impl Disseminator {
    pub fn new(params: ChannelParams, enforcement: Enforcement) -> Self {
        Disseminator { params, enforcement, blocked: Vec::new(), delivered: BTreeSet::new() }
    }

    /// Broadcast a payload. Under chain enforcement this is the only path to
    /// the public and it refuses anything without a committed Alert=1
    /// decision for the event.
    pub fn disseminate(
        &mut self,
        payload: &AlertPayload,
        authority: Option<&dyn AlertAuthority>,
        step: u64,
        rng: &mut SimRng,
    ) -> Result<DeliveryReport> {
        let receipt = authority.and_then(|a| a.authorization(payload.event_id));
        if self.enforcement == Enforcement::Chain && receipt.is_none() {
            self.blocked.push(InjectionAttempt { step, event_id: payload.event_id });
            return Err(Error::Unauthorized(payload.event_id));
        }
        if self.delivered.contains(&payload.event_id) {
            return Err(Error::DuplicateAlert(payload.event_id));
        }
        let channels_ok: Vec<bool> = (0..self.params.channels).map(|_| rng.gen::<f64>() >= self.params.p_fail).collect();
        let ok = channels_ok.iter().any(|&c| c);
        if ok {
            self.delivered.insert(payload.event_id);
        }
        Ok(DeliveryReport {
            event_id: payload.event_id,
            decision_step: receipt.map_or(step, |r| r.step),
            attempt_step: step,
            delivery_step: ok.then_some(step + self.params.delay),
            severity: payload.severity,
            boundary: payload.boundary,
            channels_ok,
            authorized: receipt.is_some(),
        })
    }
}
