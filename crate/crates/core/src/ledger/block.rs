//! Blocks, gate receipts and the contract hook.

use crate::crypto::{sha256, Digest32, KeyRegistry};
use crate::error::{Error, Result};

use super::codec::{Decoder, Encoder};
use super::tx::Transaction;

const BLOCK_TAG: &str = "fg-block-v1";
const RECEIPT_TAG: &str = "fg-receipt-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateOutcome {
    Alert,
    Reject,
}

/// Gate decision emitted by the contract while executing a block. Receipts
/// are part of the block digest, so they are covered by validator
/// signatures and can be re-derived by replaying the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Receipt {
    pub event_id: u64,
    pub outcome: GateOutcome,
    pub step: u64,
    pub confidence: f64,
    /// Reviewers whose valid votes decided the outcome, sorted.
    pub signers: Vec<String>,
}

impl Receipt {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.str(RECEIPT_TAG)
            .u64(self.event_id)
            .u8(match self.outcome {
                GateOutcome::Alert => 1,
                GateOutcome::Reject => 2,
            })
            .u64(self.step)
            .f64(self.confidence)
            .u32(self.signers.len() as u32);
        for s in &self.signers {
            e.str(s);
        }
        e.finish()
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(data);
        if d.str()? != RECEIPT_TAG {
            return Err(Error::Decode("receipt tag".into()));
        }
        let event_id = d.u64()?;
        let outcome = match d.u8()? {
            1 => GateOutcome::Alert,
            2 => GateOutcome::Reject,
            t => return Err(Error::Decode(format!("outcome tag {t}"))),
        };
        let step = d.u64()?;
        let confidence = d.f64()?;
        let n = d.u32()?;
        let signers = (0..n).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
        d.finish()?;
        Ok(Receipt { event_id, outcome, step, confidence, signers })
    }
}

/// State machine executed over committed transactions. Implementations must
/// be deterministic functions of the transaction sequence.
pub trait Contract: Clone {
    fn execute(&mut self, registry: &KeyRegistry, height: u64, step: u64, txs: &[Transaction]) -> Vec<Receipt>;
}

/// Contract that records nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullContract;

impl Contract for NullContract {
    fn execute(&mut self, _: &KeyRegistry, _: u64, _: u64, _: &[Transaction]) -> Vec<Receipt> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub height: u64,
    pub prev: Digest32,
    pub commit_step: u64,
    pub txs: Vec<Transaction>,
    pub receipts: Vec<Receipt>,
    /// (validator id, signature over the block digest), in validator order.
    pub signatures: Vec<(String, Vec<u8>)>,
}

pub const GENESIS_PREV: Digest32 = [0; 32];

impl Block {
    /// Header bytes: everything except the signature set. Transactions and
    /// receipts enter through their digests.
    pub fn header_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.str(BLOCK_TAG).u64(self.height).bytes(&self.prev).u64(self.commit_step).u32(self.txs.len() as u32);
        for tx in &self.txs {
            e.bytes(&tx.digest());
        }
        e.u32(self.receipts.len() as u32);
        for r in &self.receipts {
            e.bytes(&sha256(&r.encode()));
        }
        e.finish()
    }

    pub fn digest(&self) -> Digest32 {
        sha256(&self.header_bytes())
    }
}
