//! Simulated human reviewers.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::KeyPair;
use crate::error::{Error, Result};
use crate::ledger::consensus::draw_delay;
use crate::ledger::{ApprovalRecord, Decision};
use crate::rng::{labeled, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleParams {
    /// Mean of the geometric review delay, in steps.
    pub delay_mean: f64,
    /// Probability a reviewer approves a non-fire event.
    pub false_approve: f64,
    /// Probability a reviewer rejects a true fire.
    pub false_reject: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams { delay_mean: 3.0, false_approve: 0.05, false_reject: 0.05 }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("oracle.false_approve", self.false_approve), ("oracle.false_reject", self.false_reject)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, "must lie in [0, 1]"));
            }
        }
        if !(self.delay_mean >= 0.0 && self.delay_mean.is_finite()) {
            return Err(Error::config("oracle.delay_mean", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Review {
    pub event_id: u64,
    pub decided_at: u64,
    pub records: Vec<ApprovalRecord>,
}

#[derive(Debug, Clone)]
pub struct HumanOracle {
    pub params: OracleParams,
    pub reviewers: Vec<KeyPair>,
    /// Reviewer indices whose keys are held by an attacker; they approve
    /// everything.
    pub compromised: BTreeSet<usize>,
    seed: u64,
}

impl HumanOracle {
    pub fn new(params: OracleParams, reviewers: Vec<KeyPair>, seed: u64) -> Self {
        HumanOracle { params, reviewers, compromised: BTreeSet::new(), seed }
    }

    /// Review an event escalated at `step`. The random draws depend only on
    /// the seed and the event id, so the verdict does not change when
    /// unrelated parts of the run (network delays, say) differ.
    pub fn decide(&self, event_id: u64, truth_fire: bool, step: u64) -> Review {
        let mut rng = labeled(self.seed, &format!("oracle/{event_id}"));
        self.decide_with(event_id, truth_fire, step, &mut rng)
    }

    pub fn decide_with(&self, event_id: u64, truth_fire: bool, step: u64, rng: &mut SimRng) -> Review {
        let decided_at = step + draw_delay(self.params.delay_mean, rng);
        let records = self
            .reviewers
            .iter()
            .enumerate()
            .map(|(i, key)| {
                let u: f64 = rng.gen();
                let approve = if self.compromised.contains(&i) {
                    true
                } else if truth_fire {
                    u >= self.params.false_reject
                } else {
                    u < self.params.false_approve
                };
                let d = if approve { Decision::Approve } else { Decision::Reject };
                ApprovalRecord::sign(key, event_id, d, decided_at)
            })
            .collect();
        Review { event_id, decided_at, records }
    }
}

/// P(at least m of n independent reviewers approve) when each approves with
/// probability q.
pub fn binomial_tail(q: f64, m: usize, n: usize) -> f64 {
    let mut total = 0.0;
    for k in m..=n {
        let mut c = 1.0;
        for j in 0..k {
            c *= (n - j) as f64 / (j + 1) as f64;
        }
        total += c * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Scheme;

    fn oracle(n: usize, params: OracleParams) -> HumanOracle {
        let mut rng = labeled(3, "keys");
        let keys = (0..n).map(|i| KeyPair::generate(format!("reviewer-{i}"), Scheme::Toy, &mut rng)).collect();
        HumanOracle::new(params, keys, 77)
    }

    #[test]
    fn perfect_oracle() {
        let o = oracle(1, OracleParams { delay_mean: 3.0, false_approve: 0.0, false_reject: 0.0 });
        for id in 0..500 {
            let fire = id % 3 == 0;
            let r = o.decide(id, fire, 10);
            assert_eq!(r.records[0].decision == Decision::Approve, fire);
        }
    }

    #[test]
    fn delay_mean_is_three() {
        let o = oracle(1, OracleParams::default());
        let n = 10_000;
        let mean = (0..n).map(|id| (o.decide(id, true, 100).decided_at - 100) as f64).sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn decisions_are_keyed_by_event() {
        let o = oracle(3, OracleParams::default());
        let a = o.decide(42, false, 7);
        let b = o.decide(42, false, 7);
        assert_eq!(a.records, b.records);
        assert_eq!(a.decided_at, b.decided_at);
    }

    #[test]
    fn compromised_reviewer_always_approves() {
        let mut o = oracle(3, OracleParams { delay_mean: 0.0, false_approve: 0.0, false_reject: 0.0 });
        o.compromised.insert(1);
        let r = o.decide(5, false, 0);
        let d: Vec<Decision> = r.records.iter().map(|r| r.decision).collect();
        assert_eq!(d, vec![Decision::Reject, Decision::Approve, Decision::Reject]);
    }

    #[test]
    fn binomial_tail_closed_form() {
        assert!((binomial_tail(0.1, 1, 1) - 0.1).abs() < 1e-15);
        // 3q^2(1-q) + q^3
        let q: f64 = 0.2;
        assert!((binomial_tail(q, 2, 3) - (3.0 * q * q * (1.0 - q) + q.powi(3))).abs() < 1e-15);
        assert!((binomial_tail(0.37, 0, 4) - 1.0).abs() < 1e-12);
    }
}
