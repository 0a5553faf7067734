//! Single-round signature-collection consensus.
//!
//! Each round the pending pool is validated by every validator, a block is
//! proposed, and it is accepted once at least `2f + 1` distinct, valid,
//! non-revoked validator signatures are collected. Accepted blocks become
//! visible at their commit step, which trails the proposal by a geometric
//! delay. Revocations take effect from the block after the one recording
//! them.

use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::crypto::{Digest32, KeyPair, KeyRegistry, Role};
use crate::error::{Error, Result};
use crate::rng::SimRng;

use super::block::{Block, Contract, Receipt, GENESIS_PREV};
use super::tx::{ApprovalRecord, Decision, Transaction, TxBody, Wallet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    #[default]
    Honest,
    /// Withholds its signature.
    Censor,
    /// Signs a conflicting payload.
    Equivocate,
    /// Injects fabricated transactions and signs anything.
    ForgeApprove,
}

impl Behavior {
    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Honest => "honest",
            Behavior::Censor => "censor",
            Behavior::Equivocate => "equivocate",
            Behavior::ForgeApprove => "forge-approve",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Validator {
    pub key: KeyPair,
    pub behavior: Behavior,
}

impl Validator {
    pub fn id(&self) -> &str {
        &self.key.id
    }

    pub fn is_byzantine(&self) -> bool {
        self.behavior != Behavior::Honest
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusParams {
    /// Tolerated Byzantine validators; quorum is `2f + 1`.
    pub f: usize,
    /// Mean of the geometric commit delay, in steps.
    pub delay_mean: f64,
    /// Transactions per block; 0 means unbounded.
    pub max_block_txs: usize,
    /// Accepted blocks allowed to await commit at once; 0 means unbounded.
    /// With 1 the next round waits for the previous block to commit, so a
    /// transaction burst queues in the pool.
    pub max_inflight: usize,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        ConsensusParams { f: 2, delay_mean: 1.2, max_block_txs: 2, max_inflight: 1 }
    }
}

impl ConsensusParams {
    pub fn quorum(&self) -> usize {
        2 * self.f + 1
    }
}

/// Network state for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConditions {
    /// Probability that a validator's vote is lost.
    pub drop_prob: f64,
    pub added_delay: u64,
    pub delay_multiplier: f64,
}

impl Default for NetConditions {
    fn default() -> Self {
        NetConditions { drop_prob: 0.0, added_delay: 0, delay_multiplier: 1.0 }
    }
}

/// Geometric delay on {0, 1, ...} with the given mean.
pub fn draw_delay(mean: f64, rng: &mut SimRng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Geometric::new(1.0 / (1.0 + mean)).expect("p in (0, 1]").sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxReject {
    UnknownSubmitter,
    BadSignature,
    NonceReused,
}

impl TxReject {
    pub fn as_str(self) -> &'static str {
        match self {
            TxReject::UnknownSubmitter => "unknown-submitter",
            TxReject::BadSignature => "bad-signature",
            TxReject::NonceReused => "nonce-reused",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub step: u64,
    pub submitter: String,
    pub nonce: u64,
    pub event_id: Option<u64>,
    pub reason: TxReject,
    /// Fabricated by a Byzantine validator rather than submitted.
    pub forged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundOutcome {
    Idle,
    /// Waiting for an earlier block to commit.
    Busy,
    Accepted { height: u64, commit_step: u64, txs: usize, signatures: usize },
    NoQuorum { signatures: usize },
}

#[derive(Debug, Clone, Default)]
pub struct LedgerStats {
    pub rounds: u64,
    pub stalled_rounds: u64,
    pub accepted_blocks: u64,
    pub committed_blocks: u64,
    /// Per transaction: commit step minus submission step.
    pub confirmation_delays: Vec<u64>,
    pub discarded_equivocations: u64,
    pub excluded_revoked: u64,
    pub dropped_votes: u64,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone)]
struct Pending {
    tx: Transaction,
    submitted: u64,
}

#[derive(Debug, Clone)]
pub struct Ledger<C: Contract> {
    pub params: ConsensusParams,
    genesis: KeyRegistry,
    head_registry: KeyRegistry,
    validators: Vec<Validator>,
    pool: Vec<Pending>,
    seen: HashSet<(String, u64)>,
    chain: Vec<Block>,
    inflight: VecDeque<(Block, Vec<u64>)>,
    head_height: u64,
    head_digest: Digest32,
    head_state: C,
    committed_state: C,
    receipts: BTreeMap<u64, (u64, Receipt)>,
    pub stats: LedgerStats,
}

impl<C: Contract> Ledger<C> {
    pub fn new(params: ConsensusParams, genesis: KeyRegistry, validators: Vec<Validator>, contract: C) -> Result<Self> {
        let k = validators.len();
        if 3 * params.f >= k {
            return Err(Error::config("validators", format!("need f < k/3, got f={} k={k}", params.f)));
        }
        if !(params.delay_mean >= 0.0 && params.delay_mean.is_finite()) {
            return Err(Error::config("consensus.delay_mean", "must be finite and >= 0"));
        }
        for v in &validators {
            match genesis.get(v.id()) {
                Some(e) if e.role == Role::Validator && e.public == v.key.public() => {}
                _ => return Err(Error::UnknownValidator(v.id().to_string())),
            }
        }
        Ok(Ledger {
            params,
            head_registry: genesis.clone(),
            genesis,
            validators,
            pool: Vec::new(),
            seen: HashSet::new(),
            chain: Vec::new(),
            inflight: VecDeque::new(),
            head_height: 0,
            head_digest: GENESIS_PREV,
            head_state: contract.clone(),
            committed_state: contract,
            receipts: BTreeMap::new(),
            stats: LedgerStats::default(),
        })
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn genesis(&self) -> &KeyRegistry {
        &self.genesis
    }

    /// Registry including revocations from accepted but not yet committed blocks.
    pub fn head_registry(&self) -> &KeyRegistry {
        &self.head_registry
    }

    pub fn validators(&self) -> &[Validator] {
        &self.validators
    }

    pub fn set_behavior(&mut self, id: &str, behavior: Behavior) -> Result<()> {
        let v = self
            .validators
            .iter_mut()
            .find(|v| v.id() == id)
            .ok_or_else(|| Error::UnknownValidator(id.to_string()))?;
        v.behavior = behavior;
        Ok(())
    }

    pub fn pending(&self) -> usize {
        self.pool.len()
    }

    pub fn inflight(&self) -> usize {
        self.inflight.len()
    }

    /// Contract state after every committed block.
    pub fn state(&self) -> &C {
        &self.committed_state
    }

    /// Gate receipt for an event, if one has been committed.
    pub fn receipt(&self, event_id: u64) -> Option<&Receipt> {
        self.receipts.get(&event_id).map(|(_, r)| r)
    }

    pub fn receipts(&self) -> impl Iterator<Item = (u64, &Receipt)> {
        self.receipts.values().map(|(h, r)| (*h, r))
    }

    fn check(&self, tx: &Transaction, height: u64) -> Option<TxReject> {
        if self.head_registry.active_at(&tx.submitter, height).is_none() {
            return Some(TxReject::UnknownSubmitter);
        }
        if !tx.verify(&self.head_registry, height) {
            return Some(TxReject::BadSignature);
        }
        None
    }

    fn reject(&mut self, tx: &Transaction, step: u64, reason: TxReject, forged: bool) {
        self.stats.rejections.push(Rejection {
            step,
            submitter: tx.submitter.clone(),
            nonce: tx.nonce,
            event_id: tx.body.event_id(),
            reason,
            forged,
        });
    }

    /// Add a signed transaction to the pending pool.
    pub fn submit(&mut self, tx: Transaction, step: u64) -> Result<()> {
        let reason = self.check(&tx, self.head_height).or_else(|| {
            self.seen.contains(&(tx.submitter.clone(), tx.nonce)).then_some(TxReject::NonceReused)
        });
        if let Some(r) = reason {
            self.reject(&tx, step, r, false);
            return Err(match r {
                TxReject::UnknownSubmitter => Error::UnknownSubmitter(tx.submitter),
                TxReject::BadSignature => Error::BadSignature,
                TxReject::NonceReused => Error::NonceReused { submitter: tx.submitter, nonce: tx.nonce },
            });
        }
        self.seen.insert((tx.submitter.clone(), tx.nonce));
        self.pool.push(Pending { tx, submitted: step });
        Ok(())
    }

    /// Record a validator revocation on chain. Revoking an already revoked
    /// key is accepted and has no further effect.
    pub fn revoke_validator(&mut self, admin: &mut Wallet, id: &str, step: u64) -> Result<()> {
        match self.genesis.get(id) {
            Some(e) if e.role == Role::Validator => {}
            _ => return Err(Error::UnknownValidator(id.to_string())),
        }
        let tx = admin.make_tx(TxBody::Revocation { key: id.to_string(), step });
        self.submit(tx, step)
    }

    fn forged_tx(v: &Validator, step: u64, pool_event: Option<u64>) -> Transaction {
        // An approval claiming to come from a reviewer, signed with the
        // validator's own key.
        let event_id = pool_event.unwrap_or(u64::MAX);
        let mut rec = ApprovalRecord::sign(&v.key, event_id, Decision::Approve, step);
        rec.reviewer = "reviewer-0".into();
        let mut tx = Transaction::sign(TxBody::Approval(rec), u64::MAX - step, &v.key);
        tx.submitter = "reviewer-0".into();
        tx
    }

    /// Run one consensus round at `step`.
    pub fn round(&mut self, step: u64, net: NetConditions, rng: &mut SimRng) -> RoundOutcome {
        self.stats.rounds += 1;
        if self.pool.is_empty() {
            return RoundOutcome::Idle;
        }
        if self.params.max_inflight > 0 && self.inflight.len() >= self.params.max_inflight {
            return RoundOutcome::Busy;
        }
        let height = self.head_height;

        let pool_event = self.pool.iter().find_map(|p| p.tx.body.event_id());
        let forged: Vec<Transaction> = self
            .validators
            .iter()
            .filter(|v| v.behavior == Behavior::ForgeApprove)
            .map(|v| Self::forged_tx(v, step, pool_event))
            .collect();
        for tx in &forged {
            let reason = self.check(tx, height).unwrap_or(TxReject::BadSignature);
            self.reject(tx, step, reason, true);
        }

        let pool = std::mem::take(&mut self.pool);
        let mut accepted = Vec::with_capacity(pool.len());
        for p in pool {
            match self.check(&p.tx, height) {
                None => accepted.push(p),
                Some(r) => {
                    self.reject(&p.tx, step, r, false);
                    self.seen.remove(&(p.tx.submitter.clone(), p.tx.nonce));
                }
            }
        }
        if accepted.is_empty() {
            return RoundOutcome::Idle;
        }
        if self.params.max_block_txs > 0 && accepted.len() > self.params.max_block_txs {
            self.pool = accepted.split_off(self.params.max_block_txs);
        }

        let delay = draw_delay(self.params.delay_mean * net.delay_multiplier, rng) + net.added_delay;
        let floor = self.inflight.back().map(|(b, _)| b.commit_step).unwrap_or(0);
        let commit_step = (step + delay).max(floor);
        let txs: Vec<Transaction> = accepted.iter().map(|p| p.tx.clone()).collect();
        let mut state = self.head_state.clone();
        let receipts = state.execute(&self.head_registry, height, commit_step, &txs);
        let mut block = Block { height, prev: self.head_digest, commit_step, txs, receipts, signatures: Vec::new() };
        let digest = block.digest();

        for v in &self.validators {
            let lost = rng.gen::<f64>() < net.drop_prob;
            let sig = match v.behavior {
                Behavior::Honest | Behavior::ForgeApprove => Some(v.key.sign(&digest)),
                Behavior::Censor => None,
                Behavior::Equivocate => {
                    let mut other = block.clone();
                    other.commit_step += 1;
                    Some(v.key.sign(&other.digest()))
                }
            };
            let Some(sig) = sig else { continue };
            if lost {
                self.stats.dropped_votes += 1;
                continue;
            }
            if self.head_registry.active_at(v.id(), height).is_none() {
                self.stats.excluded_revoked += 1;
                continue;
            }
            if self.head_registry.verify_at(v.id(), Role::Validator, height, &digest, &sig) {
                block.signatures.push((v.id().to_string(), sig));
            } else {
                self.stats.discarded_equivocations += 1;
            }
        }

        let signatures = block.signatures.len();
        if signatures < self.params.quorum() {
            self.stats.stalled_rounds += 1;
            accepted.append(&mut self.pool);
            self.pool = accepted;
            return RoundOutcome::NoQuorum { signatures };
        }

        for tx in &block.txs {
            if let TxBody::Revocation { key, .. } = &tx.body {
                if self.head_registry.get(key).is_some_and(|e| e.role == Role::Validator) {
                    self.head_registry.revoke(key, height);
                }
            }
        }
        let delays = accepted.iter().map(|p| commit_step - p.submitted.min(commit_step)).collect();
        self.head_state = state;
        self.head_digest = digest;
        self.head_height += 1;
        self.stats.accepted_blocks += 1;
        let n = block.txs.len();
        self.inflight.push_back((block, delays));
        RoundOutcome::Accepted { height, commit_step, txs: n, signatures }
    }

    /// Commit every accepted block whose commit step has been reached.
    pub fn commit_ready(&mut self, step: u64) -> Vec<Block> {
        let mut out = Vec::new();
        while self.inflight.front().is_some_and(|(b, _)| b.commit_step <= step) {
            let (block, delays) = self.inflight.pop_front().unwrap();
            self.committed_state.execute(&self.registry_at(block.height), block.height, block.commit_step, &block.txs);
            for r in &block.receipts {
                self.receipts.entry(r.event_id).or_insert((block.height, r.clone()));
            }
            self.stats.confirmation_delays.extend(delays);
            self.stats.committed_blocks += 1;
            self.chain.push(block.clone());
            out.push(block);
        }
        out
    }

    /// Registry as it stood when the block at `height` was built.
    fn registry_at(&self, height: u64) -> KeyRegistry {
        let mut reg = self.genesis.clone();
        for (id, e) in &self.head_registry.keys {
            if let Some(r) = e.revoked_at {
                if r < height {
                    reg.revoke(id, r);
                }
            }
        }
        reg
    }
}
