//! Line-oriented chain dump.
//!
//! ```text
//! firegate-chain 1
//! param <name> <value>
//! key <id> <role> <scheme> <public-key-hex>
//! block <height> <commit-step> <prev-digest-hex> <digest-hex>
//! tx <canonical-tx-hex>
//! receipt <canonical-receipt-hex>
//! sig <validator-id> <signature-hex>
//! ```
//!
//! `key` lines describe the genesis registry. Each `block` line is followed
//! by that block's records. The trailing digest on a `block` line is
//! informational; readers recompute it.

use std::collections::BTreeMap;
use std::io::Write;

use crate::crypto::{KeyRegistry, PublicKey, Role, Scheme};
use crate::error::{Error, Result};

use super::block::{Block, Receipt};
use super::tx::Transaction;

const MAGIC: &str = "firegate-chain 1";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainDump {
    pub params: BTreeMap<String, String>,
    pub registry: KeyRegistry,
    pub blocks: Vec<Block>,
}

impl ChainDump {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        for (k, v) in &self.params {
            writeln!(w, "param {k} {v}")?;
        }
        for (id, e) in &self.registry.keys {
            writeln!(w, "key {id} {} {} {}", e.role.as_str(), e.public.scheme.as_str(), hex::encode(e.public.bytes))?;
        }
        for b in &self.blocks {
            writeln!(w, "block {} {} {} {}", b.height, b.commit_step, hex::encode(b.prev), hex::encode(b.digest()))?;
            for tx in &b.txs {
                writeln!(w, "tx {}", hex::encode(tx.encode()))?;
            }
            for r in &b.receipts {
                writeln!(w, "receipt {}", hex::encode(r.encode()))?;
            }
            for (id, sig) in &b.signatures {
                writeln!(w, "sig {id} {}", hex::encode(sig))?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn param<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>> {
        self.params
            .get(name)
            .map(|v| v.parse().map_err(|_| Error::Decode(format!("param {name}: bad value {v:?}"))))
            .transpose()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(Error::Decode("missing chain header".into())),
        }
        let mut out = ChainDump::default();
        for (n, line) in lines {
            let bad = |m: &str| Error::Decode(format!("line {}: {m}", n + 1));
            let parts: Vec<&str> = line.split_whitespace().collect();
            let hexfield = |s: &str| hex::decode(s).map_err(|_| bad("bad hex"));
            let block = |out: &mut ChainDump| -> Result<usize> {
                out.blocks.len().checked_sub(1).ok_or_else(|| bad("record before first block"))
            };
            match parts.as_slice() {
                ["param", k, v] => {
                    out.params.insert(k.to_string(), v.to_string());
                }
                ["key", id, role, scheme, pk] => {
                    let role = Role::parse(role).ok_or_else(|| bad("unknown role"))?;
                    let scheme = Scheme::parse(scheme).ok_or_else(|| bad("unknown scheme"))?;
                    let bytes: [u8; 32] = hexfield(pk)?.try_into().map_err(|_| bad("key length"))?;
                    out.registry.register(*id, role, PublicKey { scheme, bytes });
                }
                ["block", h, c, prev, _digest] => {
                    let prev: [u8; 32] = hexfield(prev)?.try_into().map_err(|_| bad("digest length"))?;
                    out.blocks.push(Block {
                        height: h.parse().map_err(|_| bad("height"))?,
                        commit_step: c.parse().map_err(|_| bad("commit step"))?,
                        prev,
                        txs: Vec::new(),
                        receipts: Vec::new(),
                        signatures: Vec::new(),
                    });
                }
                ["tx", data] => {
                    let i = block(&mut out)?;
                    let tx = Transaction::decode(&hexfield(data)?).map_err(|e| bad(&e.to_string()))?;
                    out.blocks[i].txs.push(tx);
                }
                ["receipt", data] => {
                    let i = block(&mut out)?;
                    let r = Receipt::decode(&hexfield(data)?).map_err(|e| bad(&e.to_string()))?;
                    out.blocks[i].receipts.push(r);
                }
                ["sig", id, data] => {
                    let i = block(&mut out)?;
                    let sig = hexfield(data)?;
                    out.blocks[i].signatures.push((id.to_string(), sig));
                }
                _ => return Err(bad("unrecognised record")),
            }
        }
        Ok(out)
    }
}
