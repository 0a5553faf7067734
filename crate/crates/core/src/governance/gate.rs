//! The alert gate and the contract that applies it on chain.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::crypto::KeyRegistry;
use crate::error::{Error, Result};
use crate::ledger::{ApprovalRecord, Contract, Decision, GateOutcome, Receipt, Transaction, TxBody};

/// Alert threshold plus the m-of-n approval policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatePolicy {
    pub tau: f64,
    pub m: usize,
    pub n: usize,
}

impl Default for GatePolicy {
    fn default() -> Self {
        GatePolicy { tau: 0.8, m: 1, n: 1 }
    }
}

impl GatePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::config("gate.tau", "must lie in [0, 1)"));
        }
        if self.m == 0 || self.m > self.n {
            return Err(Error::config("gate.m", format!("need 1 <= m <= n, got m={} n={}", self.m, self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    Alert,
    Reject,
    /// Not enough votes either way yet.
    Hold,
}

/// Pure gate rule over already-validated votes (one per reviewer).
///
/// Alert iff `confidence > tau` and at least `m` approvals. The event is
/// rejected when the confidence is too low or when more than `n - m`
/// reviewers reject, since `m` approvals can then no longer be reached.
pub fn evaluate_alert_gate(confidence: f64, votes: &[ApprovalRecord], policy: &GatePolicy) -> GateDecision {
    if confidence.is_nan() || confidence <= policy.tau {
        return GateDecision::Reject;
    }
    let approvals = votes.iter().filter(|v| v.decision == Decision::Approve).count();
    let rejects = votes.len() - approvals;
    if approvals >= policy.m {
        GateDecision::Alert
    } else if rejects > policy.n - policy.m {
        GateDecision::Reject
    } else {
        GateDecision::Hold
    }
}

/// Keep the first valid vote of each reviewer for `event_id`.
pub fn valid_votes<'a>(
    event_id: u64,
    records: impl IntoIterator<Item = &'a ApprovalRecord>,
    registry: &KeyRegistry,
    height: u64,
) -> Vec<ApprovalRecord> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in records {
        if r.event_id == event_id && r.verify(registry, height) && seen.insert(r.reviewer.clone()) {
            out.push(r.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    confidence: Option<f64>,
    votes: Vec<ApprovalRecord>,
    decided: bool,
}

/// On-chain gate state. Every decision is a deterministic function of the
/// committed transactions, so replaying the chain reproduces the receipts.
#[derive(Debug, Clone, PartialEq)]
pub struct GovernanceContract {
    pub policy: GatePolicy,
    entries: BTreeMap<u64, Entry>,
}

impl GovernanceContract {
    pub fn new(policy: GatePolicy) -> Self {
        GovernanceContract { policy, entries: BTreeMap::new() }
    }

    pub fn is_decided(&self, event_id: u64) -> bool {
        self.entries.get(&event_id).is_some_and(|e| e.decided)
    }

    pub fn votes(&self, event_id: u64) -> &[ApprovalRecord] {
        self.entries.get(&event_id).map(|e| e.votes.as_slice()).unwrap_or(&[])
    }
}

impl Contract for GovernanceContract {
    fn execute(&mut self, registry: &KeyRegistry, height: u64, step: u64, txs: &[Transaction]) -> Vec<Receipt> {
        let mut touched = BTreeSet::new();
        for tx in txs {
            match &tx.body {
                TxBody::Event(e) => {
                    let entry = self.entries.entry(e.event_id).or_insert(Entry {
                        confidence: None,
                        votes: Vec::new(),
                        decided: false,
                    });
                    if entry.confidence.is_none() {
                        entry.confidence = Some(e.confidence);
                        touched.insert(e.event_id);
                    }
                }
                TxBody::Approval(a) => {
                    // invalid or duplicate votes are ignored, not fatal
                    if !a.verify(registry, height) {
                        continue;
                    }
                    let entry = self.entries.entry(a.event_id).or_insert(Entry {
                        confidence: None,
                        votes: Vec::new(),
                        decided: false,
                    });
                    if entry.decided || entry.votes.iter().any(|v| v.reviewer == a.reviewer) {
                        continue;
                    }
                    entry.votes.push(a.clone());
                    touched.insert(a.event_id);
                }
                TxBody::Revocation { .. } => {}
            }
        }
        let mut receipts = Vec::new();
        for id in touched {
            let entry = self.entries.get_mut(&id).expect("touched entries exist");
            let Some(conf) = entry.confidence else { continue };
            if entry.decided {
                continue;
            }
            let (outcome, wanted) = match evaluate_alert_gate(conf, &entry.votes, &self.policy) {
                GateDecision::Alert => (GateOutcome::Alert, Some(Decision::Approve)),
                GateDecision::Reject => (GateOutcome::Reject, (conf > self.policy.tau).then_some(Decision::Reject)),
                GateDecision::Hold => continue,
            };
            entry.decided = true;
            let mut signers: Vec<String> =
                entry.votes.iter().filter(|v| Some(v.decision) == wanted).map(|v| v.reviewer.clone()).collect();
            signers.sort();
            receipts.push(Receipt { event_id: id, outcome, step, confidence: conf, signers });
        }
        receipts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{KeyPair, Role, Scheme};
    use crate::rng::labeled;

    fn reviewers(n: usize) -> (KeyRegistry, Vec<KeyPair>) {
        let mut rng = labeled(21, "rev");
        let mut reg = KeyRegistry::default();
        let keys: Vec<KeyPair> = (0..n)
            .map(|i| {
                let k = KeyPair::generate(format!("reviewer-{i}"), Scheme::Ed25519, &mut rng);
                reg.register(k.id.clone(), Role::Reviewer, k.public());
                k
            })
            .collect();
        (reg, keys)
    }

    fn p(m: usize, n: usize) -> GatePolicy {
        GatePolicy { tau: 0.8, m, n }
    }

    #[test]
    fn gate_equation_cases() {
        let (_, k) = reviewers(1);
        let approve = ApprovalRecord::sign(&k[0], 1, Decision::Approve, 5);
        assert_eq!(evaluate_alert_gate(0.9, std::slice::from_ref(&approve), &p(1, 1)), GateDecision::Alert);
        assert_eq!(evaluate_alert_gate(0.9, &[], &p(1, 1)), GateDecision::Hold);
        assert_eq!(evaluate_alert_gate(0.5, &[approve], &p(1, 1)), GateDecision::Reject);
        let reject = ApprovalRecord::sign(&k[0], 1, Decision::Reject, 5);
        assert_eq!(evaluate_alert_gate(0.9, &[reject], &p(1, 1)), GateDecision::Reject);
        assert_eq!(evaluate_alert_gate(0.8, &[], &p(1, 1)), GateDecision::Reject);
    }

    #[test]
    fn single_compromised_key_is_not_enough_under_two_of_three() {
        let (reg, k) = reviewers(3);
        let votes = [
            ApprovalRecord::sign(&k[0], 9, Decision::Approve, 3),
            ApprovalRecord::sign(&k[1], 9, Decision::Reject, 3),
            ApprovalRecord::sign(&k[2], 9, Decision::Reject, 4),
        ];
        let v = valid_votes(9, &votes, &reg, 0);
        assert_eq!(evaluate_alert_gate(0.95, &v, &p(2, 3)), GateDecision::Reject);
        assert_eq!(evaluate_alert_gate(0.95, &v[..1], &p(2, 3)), GateDecision::Hold);
        assert_eq!(evaluate_alert_gate(0.95, &v[..2], &p(2, 3)), GateDecision::Hold);
    }

    #[test]
    fn invalid_revoked_and_duplicate_votes_ignored() {
        let (mut reg, k) = reviewers(2);
        let mut forged = ApprovalRecord::sign(&k[0], 1, Decision::Approve, 2);
        forged.reviewer = "reviewer-1".into();
        let dup = ApprovalRecord::sign(&k[0], 1, Decision::Reject, 3);
        let first = ApprovalRecord::sign(&k[0], 1, Decision::Approve, 2);
        let v = valid_votes(1, [&forged, &first, &dup], &reg, 0);
        assert_eq!(v, vec![first.clone()]);
        reg.revoke("reviewer-0", 0);
        assert!(valid_votes(1, [&first], &reg, 1).is_empty());
    }

    #[test]
    fn validate_policy() {
        assert!(p(1, 1).validate().is_ok());
        assert!(p(0, 1).validate().is_err());
        assert!(p(3, 2).validate().is_err());
    }
}
