//! Independent chain audit.

use std::collections::HashSet;
use std::fmt;

use crate::crypto::{KeyRegistry, Role};

use super::block::{Block, Contract, GENESIS_PREV};
use super::tx::TxBody;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    HeightMismatch { found: u64 },
    BrokenLink,
    CommitOrder,
    UnknownSubmitter(String),
    BadTxSignature,
    NonceReused { submitter: String, nonce: u64 },
    ReceiptMismatch,
    UnknownSigner(String),
    DuplicateSigner(String),
    BadBlockSignature(String),
    QuorumNotMet { have: usize, need: usize },
    /// The record could not be parsed at all.
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub block: u64,
    pub tx: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tx {
            Some(t) => write!(f, "block {} tx {}", self.block, t),
            None => write!(f, "block {}", self.block),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Violation { at: Location, what: Violation },
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }

    pub fn location(&self) -> Option<Location> {
        match self {
            Verdict::Ok => None,
            Verdict::Violation { at, .. } => Some(*at),
        }
    }
}

fn fail(block: usize, tx: Option<usize>, what: Violation) -> Verdict {
    Verdict::Violation { at: Location { block: block as u64, tx }, what }
}

/// Re-check a chain from genesis: heights, digest links, commit order,
/// every transaction signature and nonce, contract receipts (when a
/// contract is supplied) and the signature quorum of each block. Returns
/// the first violation found, scanning blocks in order and, within a
/// block, header, transactions, receipts, then signatures.
pub fn verify_chain<C: Contract>(chain: &[Block], genesis: &KeyRegistry, f: usize, mut contract: Option<C>) -> Verdict {
    let mut registry = genesis.clone();
    let mut nonces: HashSet<(&str, u64)> = HashSet::new();
    let need = 2 * f + 1;
    let mut prev = GENESIS_PREV;
    let mut last_commit = 0;

    for (i, b) in chain.iter().enumerate() {
        let h = i as u64;
        if b.height != h {
            return fail(i, None, Violation::HeightMismatch { found: b.height });
        }
        if b.prev != prev {
            return fail(i, None, Violation::BrokenLink);
        }
        if b.commit_step < last_commit {
            return fail(i, None, Violation::CommitOrder);
        }

        for (j, tx) in b.txs.iter().enumerate() {
            if registry.active_at(&tx.submitter, h).is_none() {
                return fail(i, Some(j), Violation::UnknownSubmitter(tx.submitter.clone()));
            }
            if !tx.verify(&registry, h) {
                return fail(i, Some(j), Violation::BadTxSignature);
            }
            if !nonces.insert((tx.submitter.as_str(), tx.nonce)) {
                return fail(i, Some(j), Violation::NonceReused { submitter: tx.submitter.clone(), nonce: tx.nonce });
            }
        }

        if let Some(c) = contract.as_mut() {
            if c.execute(&registry, h, b.commit_step, &b.txs) != b.receipts {
                return fail(i, None, Violation::ReceiptMismatch);
            }
        }

        let digest = b.digest();
        let mut signers = HashSet::new();
        let mut valid = 0;
        for (id, sig) in &b.signatures {
            let Some(entry) = registry.get(id).filter(|e| e.role == Role::Validator) else {
                return fail(i, None, Violation::UnknownSigner(id.clone()));
            };
            if !signers.insert(id.as_str()) {
                return fail(i, None, Violation::DuplicateSigner(id.clone()));
            }
            if !crate::crypto::verify(&entry.public, &digest, sig) {
                return fail(i, None, Violation::BadBlockSignature(id.clone()));
            }
            // revoked signers are excluded from the count, not flagged
            if registry.active_at(id, h).is_some() {
                valid += 1;
            }
        }
        if valid < need {
            return fail(i, None, Violation::QuorumNotMet { have: valid, need });
        }

        for tx in &b.txs {
            if let TxBody::Revocation { key, .. } = &tx.body {
                if registry.get(key).is_some_and(|e| e.role == Role::Validator) {
                    registry.revoke(key, h);
                }
            }
        }
        prev = digest;
        last_commit = b.commit_step;
    }
    Verdict::Ok
}
