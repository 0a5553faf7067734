//! Ledger transactions and their canonical form.

use crate::crypto::{sha256, Digest32, KeyPair, KeyRegistry, Role};
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::sensing::Rect;

use super::codec::{Decoder, Encoder};

const TX_TAG: &str = "fg-tx-v1";
const APPROVAL_TAG: &str = "fg-approval-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Approve,
    Reject,
}

impl Decision {
    fn code(self) -> u8 {
        match self {
            Decision::Approve => 1,
            Decision::Reject => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            1 => Ok(Decision::Approve),
            2 => Ok(Decision::Reject),
            _ => Err(Error::Decode(format!("decision tag {c}"))),
        }
    }
}

/// A reviewer's signed verdict on one event.
#[derive(Debug, Clone, PartialEq)]
pub struct ApprovalRecord {
    pub event_id: u64,
    pub reviewer: String,
    pub decision: Decision,
    pub step: u64,
    pub signature: Vec<u8>,
}

impl ApprovalRecord {
    /// Bytes covered by the reviewer signature: event id, decision, step.
    pub fn message(event_id: u64, decision: Decision, step: u64) -> Vec<u8> {
        Encoder::new().str(APPROVAL_TAG).u64(event_id).u8(decision.code()).u64(step).finish()
    }

    pub fn sign(key: &KeyPair, event_id: u64, decision: Decision, step: u64) -> Self {
        let signature = key.sign(&Self::message(event_id, decision, step));
        ApprovalRecord { event_id, reviewer: key.id.clone(), decision, step, signature }
    }

    /// Signature checks out against a reviewer key active at `height`.
    pub fn verify(&self, registry: &KeyRegistry, height: u64) -> bool {
        registry.verify_at(
            &self.reviewer,
            Role::Reviewer,
            height,
            &Self::message(self.event_id, self.decision, self.step),
            &self.signature,
        )
    }
}

/// Finalized anomaly event as anchored on chain.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub event_id: u64,
    pub step: u64,
    pub cell: Cell,
    pub boundary: Rect,
    pub confidence: f64,
    pub evidence: Digest32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TxBody {
    Event(EventRecord),
    Approval(ApprovalRecord),
    Revocation { key: String, step: u64 },
}

impl TxBody {
    pub fn required_role(&self) -> Role {
        match self {
            TxBody::Event(_) => Role::Submitter,
            TxBody::Approval(_) => Role::Reviewer,
            TxBody::Revocation { .. } => Role::Admin,
        }
    }

    pub fn event_id(&self) -> Option<u64> {
        match self {
            TxBody::Event(e) => Some(e.event_id),
            TxBody::Approval(a) => Some(a.event_id),
            TxBody::Revocation { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub body: TxBody,
    pub nonce: u64,
    pub submitter: String,
    pub signature: Vec<u8>,
}

fn encode_unsigned(e: &mut Encoder, body: &TxBody, nonce: u64, submitter: &str) {
    e.str(TX_TAG);
    match body {
        TxBody::Event(ev) => {
            e.u8(1)
                .u64(ev.event_id)
                .u64(ev.step)
                .u32(ev.cell.x)
                .u32(ev.cell.y)
                .u32(ev.boundary.x0)
                .u32(ev.boundary.y0)
                .u32(ev.boundary.x1)
                .u32(ev.boundary.y1)
                .f64(ev.confidence)
                .bytes(&ev.evidence);
        }
        TxBody::Approval(a) => {
            e.u8(2).u64(a.event_id).str(&a.reviewer).u8(a.decision.code()).u64(a.step).bytes(&a.signature);
        }
        TxBody::Revocation { key, step } => {
            e.u8(3).str(key).u64(*step);
        }
    }
    e.u64(nonce).str(submitter);
}

impl Transaction {
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        encode_unsigned(&mut e, &self.body, self.nonce, &self.submitter);
        e.finish()
    }

    pub fn sign(body: TxBody, nonce: u64, key: &KeyPair) -> Self {
        let mut tx = Transaction { body, nonce, submitter: key.id.clone(), signature: Vec::new() };
        tx.signature = key.sign(&tx.signing_bytes());
        tx
    }

    /// Full canonical form: the signed fields followed by the signature.
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        encode_unsigned(&mut e, &self.body, self.nonce, &self.submitter);
        e.bytes(&self.signature);
        e.finish()
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(data);
        if d.str()? != TX_TAG {
            return Err(Error::Decode("tx tag".into()));
        }
        let body = match d.u8()? {
            1 => TxBody::Event(EventRecord {
                event_id: d.u64()?,
                step: d.u64()?,
                cell: Cell::new(d.u32()?, d.u32()?),
                boundary: Rect { x0: d.u32()?, y0: d.u32()?, x1: d.u32()?, y1: d.u32()? },
                confidence: d.f64()?,
                evidence: d.digest()?,
            }),
            2 => TxBody::Approval(ApprovalRecord {
                event_id: d.u64()?,
                reviewer: d.str()?,
                decision: Decision::from_code(d.u8()?)?,
                step: d.u64()?,
                signature: d.bytes()?.to_vec(),
            }),
            3 => TxBody::Revocation { key: d.str()?, step: d.u64()? },
            t => return Err(Error::Decode(format!("body tag {t}"))),
        };
        let nonce = d.u64()?;
        let submitter = d.str()?;
        let signature = d.bytes()?.to_vec();
        d.finish()?;
        Ok(Transaction { body, nonce, submitter, signature })
    }

    pub fn digest(&self) -> Digest32 {
        sha256(&self.encode())
    }

    /// Submitter signature valid under a key of the right role at `height`.
    pub fn verify(&self, registry: &KeyRegistry, height: u64) -> bool {
        registry.verify_at(&self.submitter, self.body.required_role(), height, &self.signing_bytes(), &self.signature)
    }
}

/// Signing identity with its own nonce counter.
#[derive(Debug, Clone)]
pub struct Wallet {
    pub key: KeyPair,
    next_nonce: u64,
}

impl Wallet {
    pub fn new(key: KeyPair) -> Self {
        Wallet { key, next_nonce: 0 }
    }

    pub fn id(&self) -> &str {
        &self.key.id
    }

    pub fn next_nonce(&self) -> u64 {
        self.next_nonce
    }

    pub fn make_tx(&mut self, body: TxBody) -> Transaction {
        let tx = Transaction::sign(body, self.next_nonce, &self.key);
        self.next_nonce += 1;
        tx
    }
}
