//! Digests, signatures and the key registry.
//!
//! Ed25519 is the default scheme. `Scheme::Toy` derives a "signature" from
//! the public key and message alone, so anyone can forge it; it exists only
//! to exercise tamper detection without relying on signature hardness and
//! must never be selected for real runs.

use std::collections::BTreeMap;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng::SimRng;

pub type Digest32 = [u8; 32];

pub fn sha256(data: &[u8]) -> Digest32 {
    Sha256::digest(data).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Ed25519,
    Toy,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Ed25519 => "ed25519",
            Scheme::Toy => "toy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ed25519" => Some(Scheme::Ed25519),
            "toy" => Some(Scheme::Toy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PublicKey {
    pub scheme: Scheme,
    pub bytes: [u8; 32],
}

#[derive(Clone)]
pub struct KeyPair {
    pub id: String,
    scheme: Scheme,
    secret: [u8; 32],
    public: [u8; 32],
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair").field("id", &self.id).field("scheme", &self.scheme).finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn from_secret(id: impl Into<String>, scheme: Scheme, secret: [u8; 32]) -> Self {
        let public = match scheme {
            Scheme::Ed25519 => SigningKey::from_bytes(&secret).verifying_key().to_bytes(),
            Scheme::Toy => {
                let mut m = b"toy-pk".to_vec();
                m.extend_from_slice(&secret);
                sha256(&m)
            }
        };
        KeyPair { id: id.into(), scheme, secret, public }
    }

    pub fn generate(id: impl Into<String>, scheme: Scheme, rng: &mut SimRng) -> Self {
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        Self::from_secret(id, scheme, secret)
    }

    pub fn public(&self) -> PublicKey {
        PublicKey { scheme: self.scheme, bytes: self.public }
    }

    pub fn sign(&self, msg: &[u8]) -> Vec<u8> {
        match self.scheme {
            Scheme::Ed25519 => SigningKey::from_bytes(&self.secret).sign(msg).to_bytes().to_vec(),
            Scheme::Toy => toy_signature(&self.public, msg).to_vec(),
        }
    }
}

fn toy_signature(public: &[u8; 32], msg: &[u8]) -> Digest32 {
    let mut m = b"toy-sig".to_vec();
    m.extend_from_slice(public);
    m.extend_from_slice(msg);
    sha256(&m)
}

/// Forge a toy-scheme signature from the public key alone.
pub fn forge_toy(pk: &PublicKey, msg: &[u8]) -> Option<Vec<u8>> {
    (pk.scheme == Scheme::Toy).then(|| toy_signature(&pk.bytes, msg).to_vec())
}

pub fn verify(pk: &PublicKey, msg: &[u8], sig: &[u8]) -> bool {
    match pk.scheme {
        Scheme::Ed25519 => {
            let Ok(vk) = VerifyingKey::from_bytes(&pk.bytes) else { return false };
            let Ok(bytes) = <[u8; 64]>::try_from(sig) else { return false };
            vk.verify(msg, &ed25519_dalek::Signature::from_bytes(&bytes)).is_ok()
        }
        Scheme::Toy => sig == toy_signature(&pk.bytes, msg).as_slice(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Submitter,
    Validator,
    Reviewer,
    Admin,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Submitter => "submitter",
            Role::Validator => "validator",
            Role::Reviewer => "reviewer",
            Role::Admin => "admin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "submitter" => Some(Role::Submitter),
            "validator" => Some(Role::Validator),
            "reviewer" => Some(Role::Reviewer),
            "admin" => Some(Role::Admin),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyEntry {
    pub role: Role,
    pub public: PublicKey,
    /// Height of the block that recorded the revocation. Signatures are
    /// valid up to and including that height.
    pub revoked_at: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyRegistry {
    pub keys: BTreeMap<String, KeyEntry>,
}

impl KeyRegistry {
    pub fn register(&mut self, id: impl Into<String>, role: Role, public: PublicKey) {
        self.keys.insert(id.into(), KeyEntry { role, public, revoked_at: None });
    }

    pub fn get(&self, id: &str) -> Option<&KeyEntry> {
        self.keys.get(id)
    }

    /// Key usable for a signature included at `height`.
    pub fn active_at(&self, id: &str, height: u64) -> Option<&KeyEntry> {
        self.keys.get(id).filter(|k| k.revoked_at.is_none_or(|r| height <= r))
    }

    /// Record a revocation; a second revocation of the same key keeps the
    /// original height. Returns false for unknown ids.
    pub fn revoke(&mut self, id: &str, height: u64) -> bool {
        match self.keys.get_mut(id) {
            Some(k) => {
                if k.revoked_at.is_none() {
                    k.revoked_at = Some(height);
                }
                true
            }
            None => false,
        }
    }

    pub fn verify_at(&self, id: &str, role: Role, height: u64, msg: &[u8], sig: &[u8]) -> bool {
        self.active_at(id, height).is_some_and(|k| k.role == role && verify(&k.public, msg, sig))
    }

    pub fn count_role(&self, role: Role) -> usize {
        self.keys.values().filter(|k| k.role == role).count()
    }
}
