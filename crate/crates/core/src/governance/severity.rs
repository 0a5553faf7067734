//! Alert severity proposal and human confirmation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeverityParams {
    /// Number of ordinal levels; severities run 1..=levels.
    pub levels: u8,
    pub confidence_weight: f64,
    pub risk_weight: f64,
    pub spread_weight: f64,
    /// Burning-cell count at which the spread term reaches 1 - 1/e.
    pub spread_scale: f64,
    /// Probability the reviewer moves the proposal one level.
    pub override_prob: f64,
}

impl Default for SeverityParams {
    fn default() -> Self {
        SeverityParams {
            levels: 5,
            confidence_weight: 1.0,
            risk_weight: 1.0,
            spread_weight: 2.0,
            spread_scale: 10.0,
            override_prob: 0.1,
        }
    }
}

impl SeverityParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::config("severity.levels", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.override_prob) {
            return Err(Error::config("severity.override_prob", "must lie in [0, 1]"));
        }
        let w = [self.confidence_weight, self.risk_weight, self.spread_weight];
        if w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("severity", "weights must be >= 0 with a positive sum"));
        }
        if !(self.spread_scale > 0.0) {
            return Err(Error::config("severity.spread_scale", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Severity {
    pub proposed: u8,
    pub confirmed: u8,
}

impl Severity {
    pub fn overridden(&self) -> bool {
        self.proposed != self.confirmed
    }
}

/// Proposed level, monotone non-decreasing in each input.
pub fn propose_severity(confidence: f64, tau: f64, risk: f64, burning: usize, p: &SeverityParams) -> u8 {
    let c = ((confidence - tau) / (1.0 - tau)).clamp(0.0, 1.0);
    let s = 1.0 - (-(burning as f64) / p.spread_scale).exp();
    let total = p.confidence_weight + p.risk_weight + p.spread_weight;
    let score = (p.confidence_weight * c + p.risk_weight * risk.clamp(0.0, 1.0) + p.spread_weight * s) / total;
    let lvl = (score * p.levels as f64).floor() as u8;
    1 + lvl.min(p.levels - 1)
}

pub fn assign_severity(
    confidence: f64,
    tau: f64,
    risk: f64,
    burning: usize,
    p: &SeverityParams,
    rng: &mut SimRng,
) -> Severity {
    let proposed = propose_severity(confidence, tau, risk, burning, p);
    let mut confirmed = proposed;
    if rng.gen::<f64>() < p.override_prob {
        confirmed = if rng.gen::<bool>() { proposed.saturating_add(1).min(p.levels) } else { proposed.saturating_sub(1).max(1) };
    }
    Severity { proposed, confirmed }
}
