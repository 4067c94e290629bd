//! Block-granular access policies and authenticated encryption.
//!
//! Policies are evaluated deterministically: the first rule whose principal
//! and selector match the query decides; no match means deny. Read
//! confidentiality is enforced cryptographically — encrypted payloads are
//! AES-256-GCM envelopes bound to their block id — since a file format
//! cannot police out-of-band readers. Encrypted payloads remain
//! hash-verifiable without keys: the stored payload hash covers ciphertext.

use std::collections::HashMap;
use std::path::Path;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use rand::RngCore;
use uuid::Uuid;

use crate::container::{ArtifactWriter, FourCc, BLOCK_FLAG_ENCRYPTED, FOURCC_ACLS};
use crate::error::{MaifError, Result};
use crate::mcbe::{Decoder, Encoder};
use crate::provenance::{Action, AgentId, Signer};

pub const PERM_READ: u8 = 1;
pub const PERM_WRITE: u8 = 2;
pub const PERM_ADMIN: u8 = 4;

/// Requested permission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Permission {
    Read,
    Write,
    Admin,
}

impl Permission {
    pub fn bit(self) -> u8 {
        match self {
            Self::Read => PERM_READ,
            Self::Write => PERM_WRITE,
            Self::Admin => PERM_ADMIN,
        }
    }
}

/// Who a rule applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Principal {
    Any,
    Agent(AgentId),
}

/// Which blocks a rule applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Any,
    FourCc(FourCc),
    Block(Uuid),
}

/// One grant: matching queries are allowed the permissions in the bitmask
/// (admin implies read and write at evaluation time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRule {
    pub principal: Principal,
    pub selector: Selector,
    pub permissions: u8,
}

impl AccessRule {
    fn matches(&self, agent: &AgentId, fourcc: &FourCc, block_id: &Uuid) -> bool {
        let p = match self.principal {
            Principal::Any => true,
            Principal::Agent(a) => &a == agent,
        };
        let s = match self.selector {
            Selector::Any => true,
            Selector::FourCc(f) => &f == fourcc,
            Selector::Block(b) => &b == block_id,
        };
        p && s
    }

    fn effective_permissions(&self) -> u8 {
        if self.permissions & PERM_ADMIN != 0 {
            self.permissions | PERM_READ | PERM_WRITE
        } else {
            self.permissions
        }
    }

    fn encode(&self, enc: &mut Encoder) {
        match self.principal {
            Principal::Any => enc.put_u8(0),
            Principal::Agent(a) => {
                enc.put_u8(1);
                enc.put_raw(&a);
            }
        }
        match self.selector {
            Selector::Any => enc.put_u8(0),
            Selector::FourCc(f) => {
                enc.put_u8(1);
                enc.put_raw(&f);
            }
            Selector::Block(b) => {
                enc.put_u8(2);
                enc.put_uuid(&b);
            }
        }
        enc.put_u8(self.permissions);
    }

    fn decode(dec: &mut Decoder) -> Result<Self> {
        let principal = match dec.get_u8()? {
            0 => Principal::Any,
            1 => Principal::Agent(dec.get_raw(16)?.try_into().unwrap()),
            t => return Err(MaifError::Decode(format!("unknown principal tag {t}"))),
        };
        let selector = match dec.get_u8()? {
            0 => Selector::Any,
            1 => Selector::FourCc(dec.get_raw(4)?.try_into().unwrap()),
            2 => Selector::Block(dec.get_uuid()?),
            t => return Err(MaifError::Decode(format!("unknown selector tag {t}"))),
        };
        Ok(Self { principal, selector, permissions: dec.get_u8()? })
    }
}

/// Ordered rule list with default deny.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessPolicy {
    pub policy_version: u64,
    pub rules: Vec<AccessRule>,
}

impl AccessPolicy {
    pub fn new(policy_version: u64) -> Self {
        Self { policy_version, rules: Vec::new() }
    }

    pub fn with_rule(mut self, rule: AccessRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.put_u64(self.policy_version);
        enc.put_u8(0); // default decision: deny (the only value in v1)
        enc.put_u32(self.rules.len() as u32);
        for r in &self.rules {
            r.encode(&mut enc);
        }
        enc.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        let policy_version = dec.get_u64()?;
        let default_decision = dec.get_u8()?;
        if default_decision != 0 {
            return Err(MaifError::Decode(format!("unknown default decision {default_decision}")));
        }
        let count = dec.get_count(1 << 20)?;
        let mut rules = Vec::with_capacity(count as usize);
        for _ in 0..count {
            rules.push(AccessRule::decode(&mut dec)?);
        }
        dec.finish()?;
        Ok(Self { policy_version, rules })
    }
}

/// First matching rule decides; absence of a match denies.
pub fn check_permission(
    policy: &AccessPolicy,
    agent: &AgentId,
    permission: Permission,
    fourcc: &FourCc,
    block_id: &Uuid,
) -> bool {
    for rule in &policy.rules {
        if rule.matches(agent, fourcc, block_id) {
            return rule.effective_permissions() & permission.bit() != 0;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Encryption envelopes
// ---------------------------------------------------------------------------

/// AES-256-GCM envelope stored as an encrypted block's payload:
/// `key_id` (text), 12-byte nonce, ciphertext with appended 16-byte tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptionEnvelope {
    pub key_id: String,
    pub nonce: [u8; 12],
    pub ciphertext: Vec<u8>,
}

impl EncryptionEnvelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(20 + self.key_id.len() + self.ciphertext.len());
        enc.put_text(&self.key_id);
        enc.put_raw(&self.nonce);
        enc.put_bytes(&self.ciphertext);
        enc.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        let key_id = dec.get_text()?;
        let nonce: [u8; 12] = dec.get_raw(12)?.try_into().unwrap();
        let ciphertext = dec.get_bytes()?.to_vec();
        dec.finish()?;
        Ok(Self { key_id, nonce, ciphertext })
    }
}

/// Encrypt a block payload, binding the ciphertext to the block id via the
/// associated data. A fresh random nonce is drawn per call.
pub fn encrypt_block_payload(
    key: &[u8; 32],
    key_id: &str,
    plaintext: &[u8],
    block_id: &Uuid,
) -> Result<EncryptionEnvelope> {
    let cipher = Aes256Gcm::new(key.into());
    let mut nonce = [0u8; 12];
    rand::rngs::OsRng.fill_bytes(&mut nonce);
    let ciphertext = cipher
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: plaintext, aad: block_id.as_bytes() })
        .map_err(|_| MaifError::Other("encryption failure".into()))?;
    Ok(EncryptionEnvelope { key_id: key_id.to_string(), nonce, ciphertext })
}

/// Decrypt an envelope. Fails authentication on a wrong key, tampered
/// ciphertext, or mismatched block binding.
pub fn decrypt_block_payload(
    key: &[u8; 32],
    envelope: &EncryptionEnvelope,
    block_id: &Uuid,
) -> Result<Vec<u8>> {
    let cipher = Aes256Gcm::new(key.into());
    cipher
        .decrypt(
            Nonce::from_slice(&envelope.nonce),
            Payload { msg: &envelope.ciphertext, aad: block_id.as_bytes() },
        )
        .map_err(|_| MaifError::AuthenticationFailed)
}

// ---------------------------------------------------------------------------
// Keyring
// ---------------------------------------------------------------------------

/// Caller-managed keyring: `key_id:hex_key` lines, `#` comments.
#[derive(Debug, Clone, Default)]
pub struct Keyring {
    keys: HashMap<String, [u8; 32]>,
}

impl Keyring {
    pub fn insert(&mut self, key_id: impl Into<String>, key: [u8; 32]) {
        self.keys.insert(key_id.into(), key);
    }

    pub fn get(&self, key_id: &str) -> Option<&[u8; 32]> {
        self.keys.get(key_id)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut ring = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, hexkey) = line.split_once(':').ok_or_else(|| {
                MaifError::Decode(format!("keyring line {}: expected key_id:hex_key", lineno + 1))
            })?;
            let raw = hex::decode(hexkey.trim())
                .map_err(|e| MaifError::Decode(format!("keyring line {}: {e}", lineno + 1)))?;
            let key: [u8; 32] = raw.as_slice().try_into().map_err(|_| {
                MaifError::Decode(format!("keyring line {}: key must be 32 bytes", lineno + 1))
            })?;
            ring.insert(id.trim(), key);
        }
        Ok(ring)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut lines: Vec<String> =
            self.keys.iter().map(|(id, key)| format!("{id}:{}", hex::encode(key))).collect();
        lines.sort();
        std::fs::write(path, lines.join("\n") + "\n")?;
        Ok(())
    }

    /// Generate and insert a fresh random 256-bit key.
    pub fn generate(&mut self, key_id: impl Into<String>) -> [u8; 32] {
        let mut key = [0u8; 32];
        rand::rngs::OsRng.fill_bytes(&mut key);
        self.insert(key_id, key);
        key
    }
}

// ---------------------------------------------------------------------------
// Policy blocks on the writer
// ---------------------------------------------------------------------------

impl ArtifactWriter {
    /// Install a policy as the artifact's `ACLS` block.
    ///
    /// The signer must hold admin under the policy currently in force; before
    /// any policy exists the artifact creator (the genesis provenance agent)
    /// bootstraps as admin. Emits a `policy_change` provenance record.
    pub fn set_policy(&mut self, policy: &AccessPolicy, signer: &Signer) -> Result<Uuid> {
        let agent = signer.agent_id();
        match self.current_policy()? {
            Some(current) => {
                let probe = Uuid::nil();
                if !check_permission(&current, &agent, Permission::Admin, &FOURCC_ACLS, &probe) {
                    return Err(MaifError::PermissionDenied(format!(
                        "agent {} lacks admin under policy v{}",
                        hex::encode(agent),
                        current.policy_version
                    )));
                }
                if policy.policy_version <= current.policy_version {
                    return Err(MaifError::InvalidArgument(format!(
                        "policy_version must increase (current {}, new {})",
                        current.policy_version, policy.policy_version
                    )));
                }
            }
            None => {
                // Bootstrap: the creator is admin. With no provenance at all
                // the artifact is still being assembled by its creator.
                if let Some(first) = self.ledger.records.first() {
                    if first.agent_id != agent {
                        return Err(MaifError::PermissionDenied(
                            "only the artifact creator may install the first policy".into(),
                        ));
                    }
                }
            }
        }
        let payload = policy.to_bytes();
        let block_id = match self.policy_block_id() {
            Some(id) => {
                self.replace_block(id, FOURCC_ACLS, &payload, 0, 0, payload.len() as u64)?
            }
            None => self.append_block(FOURCC_ACLS, &payload, 0, 0)?,
        };
        let ts = self.now_us();
        self.append_record(signer, Action::PolicyChange, vec![block_id], ts)?;
        Ok(block_id)
    }

    fn policy_block_id(&self) -> Option<Uuid> {
        self.pending_entries().iter().find(|e| e.fourcc == FOURCC_ACLS).map(|e| e.block_id)
    }

    /// The policy in force for this writer (staged over committed), if any.
    pub fn current_policy(&mut self) -> Result<Option<AccessPolicy>> {
        let Some(entry) = self.pending_entries().into_iter().find(|e| e.fourcc == FOURCC_ACLS) else {
            return Ok(None);
        };
        let payload = self.read_staged_or_committed_payload(&entry)?;
        Ok(Some(AccessPolicy::from_bytes(&payload)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(n: u8) -> AgentId {
        [n; 16]
    }

    #[test]
    fn first_match_wins_and_default_denies() {
        let a = agent(1);
        let policy = AccessPolicy::new(1)
            .with_rule(AccessRule {
                principal: Principal::Agent(a),
                selector: Selector::FourCc(*b"TEXT"),
                permissions: PERM_READ,
            })
            .with_rule(AccessRule {
                principal: Principal::Agent(a),
                selector: Selector::Any,
                permissions: PERM_READ | PERM_WRITE,
            });
        let block = Uuid::from_u128(9);
        // direct match on first rule: read allowed, write decided by rule 1 (denied)
        assert!(check_permission(&policy, &a, Permission::Read, b"TEXT", &block));
        assert!(!check_permission(&policy, &a, Permission::Write, b"TEXT", &block));
        // second rule reached only for non-TEXT blocks
        assert!(check_permission(&policy, &a, Permission::Write, b"BDAT", &block));
        // unknown agent: no match, deny
        assert!(!check_permission(&policy, &agent(2), Permission::Read, b"TEXT", &block));
        // empty policy denies everything
        let empty = AccessPolicy::new(1);
        assert!(!check_permission(&empty, &a, Permission::Read, b"TEXT", &block));
    }

    #[test]
    fn admin_implies_read_write() {
        let a = agent(3);
        let policy = AccessPolicy::new(1).with_rule(AccessRule {
            principal: Principal::Agent(a),
            selector: Selector::Any,
            permissions: PERM_ADMIN,
        });
        let block = Uuid::from_u128(1);
        assert!(check_permission(&policy, &a, Permission::Write, b"TEXT", &block));
        assert!(check_permission(&policy, &a, Permission::Read, b"TEXT", &block));
        assert!(check_permission(&policy, &a, Permission::Admin, b"TEXT", &block));
    }

    #[test]
    fn policy_bytes_roundtrip() {
        let policy = AccessPolicy::new(7)
            .with_rule(AccessRule {
                principal: Principal::Any,
                selector: Selector::Block(Uuid::from_u128(5)),
                permissions: PERM_READ,
            })
            .with_rule(AccessRule {
                principal: Principal::Agent(agent(9)),
                selector: Selector::FourCc(*b"EMBD"),
                permissions: PERM_ADMIN,
            });
        let parsed = AccessPolicy::from_bytes(&policy.to_bytes()).unwrap();
        assert_eq!(parsed, policy);
    }

    #[test]
    fn envelope_roundtrip_and_auth_failures() {
        let key = [0x11u8; 32];
        let block = Uuid::from_u128(77);
        let env = encrypt_block_payload(&key, "k1", b"secret payload", &block).unwrap();
        assert_eq!(decrypt_block_payload(&key, &env, &block).unwrap(), b"secret payload");

        // wrong key
        let wrong = [0x22u8; 32];
        assert!(matches!(
            decrypt_block_payload(&wrong, &env, &block),
            Err(MaifError::AuthenticationFailed)
        ));
        // tampered ciphertext
        let mut tampered = env.clone();
        tampered.ciphertext[0] ^= 1;
        assert!(decrypt_block_payload(&key, &tampered, &block).is_err());
        // wrong block binding
        let other = Uuid::from_u128(78);
        assert!(decrypt_block_payload(&key, &env, &other).is_err());
    }

    #[test]
    fn envelope_bytes_roundtrip() {
        let env = EncryptionEnvelope { key_id: "k".into(), nonce: [9; 12], ciphertext: vec![1, 2, 3] };
        assert_eq!(EncryptionEnvelope::from_bytes(&env.to_bytes()).unwrap(), env);
    }

    #[test]
    fn keyring_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("keys");
        let mut ring = Keyring::default();
        let k = ring.generate("primary");
        ring.save(&path).unwrap();
        let loaded = Keyring::load(&path).unwrap();
        assert_eq!(loaded.get("primary"), Some(&k));
        assert_eq!(loaded.get("absent"), None);
    }
}
