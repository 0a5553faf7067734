//! Simulated permissioned ledger.

pub mod block;
pub mod codec;
pub mod consensus;
pub mod dump;
pub mod tx;
pub mod verify;

pub use block::{Block, Contract, GateOutcome, NullContract, Receipt};
pub use consensus::{Behavior, ConsensusParams, Ledger, NetConditions, RoundOutcome, Validator};
pub use dump::ChainDump;
pub use tx::{ApprovalRecord, Decision, EventRecord, Transaction, TxBody, Wallet};
pub use verify::{verify_chain, Location, Verdict, Violation};
