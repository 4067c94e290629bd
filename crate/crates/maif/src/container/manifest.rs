//! Versioned manifest: the indexed catalog of blocks for one committed
//! version, hash-chained to its predecessor.

use uuid::Uuid;

use super::{fourcc_to_string, FourCc, MAX_MANIFEST_ENTRIES};
use crate::error::{MaifError, Result};
use crate::hashes::ZERO_HASH;
use crate::mcbe::{Decoder, Encoder};

/// Index entry for one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub block_id: Uuid,
    pub fourcc: FourCc,
    /// File offset of the block header.
    pub offset: u64,
    /// Full on-disk block length (header + padding + payload).
    pub block_length: u64,
    /// SHA-256 of the stored payload bytes.
    pub payload_hash: [u8; 32],
}

impl ManifestEntry {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_uuid(&self.block_id);
        enc.put_raw(&self.fourcc);
        enc.put_u64(self.offset);
        enc.put_u64(self.block_length);
        enc.put_hash(&self.payload_hash);
    }

    fn decode(dec: &mut Decoder) -> Result<Self> {
        Ok(Self {
            block_id: dec.get_uuid()?,
            fourcc: dec.get_raw(4)?.try_into().unwrap(),
            offset: dec.get_u64()?,
            block_length: dec.get_u64()?,
            payload_hash: dec.get_hash()?,
        })
    }

    pub fn fourcc_string(&self) -> String {
        fourcc_to_string(&self.fourcc)
    }
}

/// One committed version: ordered block entries plus the link to the
/// predecessor manifest.
///
/// The `file_uuid` duplicates the file header's UUID so that a destroyed
/// header can be rebuilt in full from any surviving manifest, and so that a
/// manifest cannot be transplanted between artifacts unnoticed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Monotone version, genesis = 1.
    pub manifest_version: u64,
    /// Microseconds since Unix epoch, UTC.
    pub created_at: u64,
    /// Block offset of the predecessor manifest (0 for genesis).
    pub prev_manifest_offset: u64,
    /// SHA-256 of the predecessor manifest payload (all zero for genesis).
    pub prev_manifest_hash: [u8; 32],
    /// record_hash of the provenance ledger head (all zero when empty).
    pub provenance_head_hash: [u8; 32],
    pub file_uuid: Uuid,
    /// Ordered by block offset, strictly increasing.
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn genesis(file_uuid: Uuid, created_at: u64) -> Self {
        Self {
            manifest_version: 1,
            created_at,
            prev_manifest_offset: 0,
            prev_manifest_hash: ZERO_HASH,
            provenance_head_hash: ZERO_HASH,
            file_uuid,
            entries: Vec::new(),
        }
    }

    pub fn is_genesis(&self) -> bool {
        self.manifest_version == 1
    }

    /// Deterministic MCBE serialization; hashing these bytes yields the
    /// root hash.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(128 + self.entries.len() * 68);
        enc.put_u64(self.manifest_version);
        enc.put_u64(self.created_at);
        enc.put_u64(self.prev_manifest_offset);
        enc.put_hash(&self.prev_manifest_hash);
        enc.put_hash(&self.provenance_head_hash);
        enc.put_uuid(&self.file_uuid);
        enc.put_u32(self.entries.len() as u32);
        for e in &self.entries {
            e.encode(&mut enc);
        }
        enc.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        let manifest_version = dec.get_u64()?;
        let created_at = dec.get_u64()?;
        let prev_manifest_offset = dec.get_u64()?;
        let prev_manifest_hash = dec.get_hash()?;
        let provenance_head_hash = dec.get_hash()?;
        let file_uuid = dec.get_uuid()?;
        let count = dec.get_count(MAX_MANIFEST_ENTRIES)?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            entries.push(ManifestEntry::decode(&mut dec)?);
        }
        dec.finish()?;
        let m = Self {
            manifest_version,
            created_at,
            prev_manifest_offset,
            prev_manifest_hash,
            provenance_head_hash,
            file_uuid,
            entries,
        };
        m.check_invariants()?;
        Ok(m)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.manifest_version == 0 {
            return Err(MaifError::Decode("manifest version 0 is invalid".into()));
        }
        let mut last_offset = 0u64;
        for e in &self.entries {
            if e.offset <= last_offset {
                return Err(MaifError::Decode("manifest entry offsets not strictly increasing".into()));
            }
            last_offset = e.offset;
        }
        let mut ids: Vec<&Uuid> = self.entries.iter().map(|e| &e.block_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(MaifError::Decode("duplicate block_id in manifest".into()));
        }
        Ok(())
    }

    pub fn entry(&self, block_id: &Uuid) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| &e.block_id == block_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashes::sha256;

    fn entry(id: u8, offset: u64) -> ManifestEntry {
        ManifestEntry {
            block_id: Uuid::from_bytes([id; 16]),
            fourcc: *b"TEXT",
            offset,
            block_length: 128,
            payload_hash: [id; 32],
        }
    }

    #[test]
    fn roundtrip_and_determinism() {
        let mut m = Manifest::genesis(Uuid::from_bytes([1; 16]), 1_700_000_000_000_000);
        m.entries.push(entry(1, 96));
        m.entries.push(entry(2, 224));
        let b1 = m.to_bytes();
        let b2 = m.to_bytes();
        assert_eq!(b1, b2, "serialization must be deterministic");
        assert_eq!(sha256(&b1), sha256(&b2));
        let parsed = Manifest::from_bytes(&b1).unwrap();
        assert_eq!(parsed, m);
    }

    #[test]
    fn rejects_non_increasing_offsets() {
        let mut m = Manifest::genesis(Uuid::nil(), 0);
        m.entries.push(entry(1, 224));
        m.entries.push(entry(2, 96));
        assert!(Manifest::from_bytes(&m.to_bytes()).is_err());
    }

    #[test]
    fn rejects_duplicate_ids() {
        let mut m = Manifest::genesis(Uuid::nil(), 0);
        m.entries.push(entry(1, 96));
        m.entries.push(entry(1, 224));
        assert!(Manifest::from_bytes(&m.to_bytes()).is_err());
    }

    #[test]
    fn empty_manifest_roundtrip() {
        let m = Manifest::genesis(Uuid::from_bytes([9; 16]), 42);
        let parsed = Manifest::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(parsed.entries.len(), 0);
        assert_eq!(parsed.manifest_version, 1);
    }
}
