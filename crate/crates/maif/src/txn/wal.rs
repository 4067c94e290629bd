//! Sidecar write-ahead log: `<artifact>.wal`.
//!
//! The WAL is a bare stream of records; each record is self-delimiting and
//! CRC-protected, so a torn tail is detected and ignored during recovery.
//! The durable commit record — not the header patch — is the atomic commit
//! point for a transaction.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{MaifError, Result};
use crate::hashes::crc32;
use crate::mcbe::{Decoder, Encoder};

/// Record kind discriminants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum WalKind {
    Begin = 1,
    Append = 2,
    Manifest = 3,
    Commit = 4,
    Abort = 5,
}

impl WalKind {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => Self::Begin,
            2 => Self::Append,
            3 => Self::Manifest,
            4 => Self::Commit,
            5 => Self::Abort,
            other => return Err(MaifError::Decode(format!("unknown WAL record kind {other}"))),
        })
    }
}

/// Kind-specific payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalPayload {
    Begin,
    /// A staged block: where it was appended and the hash of its stored payload.
    Append { block_offset: u64, payload_hash: [u8; 32] },
    /// Manifest block appended (precedes the commit record of the same txid).
    Manifest { manifest_offset: u64, manifest_length: u64, root_hash: [u8; 32] },
    /// The atomic commit point.
    Commit { manifest_offset: u64, manifest_length: u64, root_hash: [u8; 32] },
    Abort,
}

impl WalPayload {
    pub fn kind(&self) -> WalKind {
        match self {
            Self::Begin => WalKind::Begin,
            Self::Append { .. } => WalKind::Append,
            Self::Manifest { .. } => WalKind::Manifest,
            Self::Commit { .. } => WalKind::Commit,
            Self::Abort => WalKind::Abort,
        }
    }

    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        match self {
            Self::Begin | Self::Abort => {}
            Self::Append { block_offset, payload_hash } => {
                enc.put_u64(*block_offset);
                enc.put_hash(payload_hash);
            }
            Self::Manifest { manifest_offset, manifest_length, root_hash }
            | Self::Commit { manifest_offset, manifest_length, root_hash } => {
                enc.put_u64(*manifest_offset);
                enc.put_u64(*manifest_length);
                enc.put_hash(root_hash);
            }
        }
        enc.into_bytes()
    }

    fn decode(kind: WalKind, bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        let payload = match kind {
            WalKind::Begin => Self::Begin,
            WalKind::Abort => Self::Abort,
            WalKind::Append => Self::Append {
                block_offset: dec.get_u64()?,
                payload_hash: dec.get_hash()?,
            },
            WalKind::Manifest => Self::Manifest {
                manifest_offset: dec.get_u64()?,
                manifest_length: dec.get_u64()?,
                root_hash: dec.get_hash()?,
            },
            WalKind::Commit => Self::Commit {
                manifest_offset: dec.get_u64()?,
                manifest_length: dec.get_u64()?,
                root_hash: dec.get_hash()?,
            },
        };
        dec.finish()?;
        Ok(payload)
    }
}

/// One WAL record: `lsn u64, txid u64, kind u8, payload (u32 len + bytes),
/// crc u32` where the CRC covers every preceding byte of the record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalRecord {
    pub lsn: u64,
    pub txid: u64,
    pub payload: WalPayload,
}

impl WalRecord {
    pub fn kind(&self) -> WalKind {
        self.payload.kind()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.payload.encode();
        let mut enc = Encoder::with_capacity(25 + body.len());
        enc.put_u64(self.lsn);
        enc.put_u64(self.txid);
        enc.put_u8(self.kind() as u8);
        enc.put_bytes(&body);
        let mut bytes = enc.into_bytes();
        let crc = crc32(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        bytes
    }
}

/// Result of scanning a WAL stream.
#[derive(Debug, Default)]
pub struct WalScan {
    /// Records with valid CRCs, in order. Scanning stops at the first invalid
    /// or truncated record (a torn tail).
    pub records: Vec<WalRecord>,
    /// Byte length of the valid prefix.
    pub valid_len: u64,
    /// True when trailing bytes after the valid prefix were ignored.
    pub torn_tail: bool,
}

impl WalScan {
    pub fn last_lsn(&self) -> u64 {
        self.records.last().map(|r| r.lsn).unwrap_or(0)
    }

    pub fn last_txid(&self) -> u64 {
        self.records.iter().map(|r| r.txid).max().unwrap_or(0)
    }

    /// The latest commit record in the valid prefix.
    pub fn last_commit(&self) -> Option<&WalRecord> {
        self.records.iter().rev().find(|r| r.kind() == WalKind::Commit)
    }
}

/// Parse a WAL byte buffer, stopping at the first torn or corrupt record.
pub fn scan_bytes(data: &[u8]) -> WalScan {
    let mut scan = WalScan::default();
    let mut pos = 0usize;
    loop {
        // lsn(8) + txid(8) + kind(1) + len(4)
        if data.len() - pos < 21 {
            break;
        }
        let payload_len = u32::from_le_bytes(data[pos + 17..pos + 21].try_into().unwrap()) as usize;
        let total = 21usize.checked_add(payload_len).and_then(|v| v.checked_add(4));
        let total = match total {
            Some(t) if data.len() - pos >= t => t,
            _ => break,
        };
        let rec_bytes = &data[pos..pos + total];
        let stored_crc = u32::from_le_bytes(rec_bytes[total - 4..].try_into().unwrap());
        if crc32(&rec_bytes[..total - 4]) != stored_crc {
            break;
        }
        let kind = match WalKind::from_u8(rec_bytes[16]) {
            Ok(k) => k,
            Err(_) => break,
        };
        let payload = match WalPayload::decode(kind, &rec_bytes[21..total - 4]) {
            Ok(p) => p,
            Err(_) => break,
        };
        scan.records.push(WalRecord {
            lsn: u64::from_le_bytes(rec_bytes[0..8].try_into().unwrap()),
            txid: u64::from_le_bytes(rec_bytes[8..16].try_into().unwrap()),
            payload,
        });
        pos += total;
    }
    scan.valid_len = pos as u64;
    scan.torn_tail = pos != data.len();
    scan
}

/// Conventional WAL path for an artifact path.
pub fn wal_path(artifact: &Path) -> PathBuf {
    let mut os = artifact.as_os_str().to_os_string();
    os.push(".wal");
    PathBuf::from(os)
}

/// Append-side handle on the WAL file.
pub struct WalFile {
    file: File,
    pub next_lsn: u64,
}

impl WalFile {
    /// Create a fresh (truncated) WAL.
    pub fn create(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        Ok(Self { file, next_lsn: 1 })
    }

    /// Open an existing WAL for append, truncating any torn tail.
    pub fn open(path: &Path) -> Result<(Self, WalScan)> {
        let mut file = OpenOptions::new().create(true).read(true).write(true).open(path)?;
        let mut data = Vec::new();
        file.read_to_end(&mut data)?;
        let scan = scan_bytes(&data);
        if scan.torn_tail {
            file.set_len(scan.valid_len)?;
        }
        file.seek(SeekFrom::Start(scan.valid_len))?;
        let next_lsn = scan.last_lsn() + 1;
        Ok((Self { file, next_lsn }, scan))
    }

    /// Append a record; assigns the next LSN. Not yet durable — call
    /// [`WalFile::sync`].
    pub fn append(&mut self, txid: u64, payload: WalPayload) -> Result<WalRecord> {
        let rec = WalRecord { lsn: self.next_lsn, txid, payload };
        self.file.write_all(&rec.to_bytes())?;
        self.next_lsn += 1;
        Ok(rec)
    }

    pub fn sync(&mut self) -> Result<()> {
        self.file.sync_data()?;
        Ok(())
    }
}

/// Read and scan a WAL file; absent file yields an empty scan.
pub fn scan_file(path: &Path) -> Result<WalScan> {
    match std::fs::read(path) {
        Ok(data) => Ok(scan_bytes(&data)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(WalScan::default()),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commit(lsn: u64, txid: u64) -> WalRecord {
        WalRecord {
            lsn,
            txid,
            payload: WalPayload::Commit {
                manifest_offset: 96,
                manifest_length: 180,
                root_hash: [lsn as u8; 32],
            },
        }
    }

    #[test]
    fn roundtrip_stream() {
        let mut bytes = Vec::new();
        for i in 1..=5 {
            bytes.extend_from_slice(&commit(i, i).to_bytes());
        }
        let scan = scan_bytes(&bytes);
        assert_eq!(scan.records.len(), 5);
        assert!(!scan.torn_tail);
        assert_eq!(scan.last_commit().unwrap().lsn, 5);
    }

    #[test]
    fn torn_tail_stops_scan_at_last_valid() {
        let mut bytes = Vec::new();
        for i in 1..=5 {
            bytes.extend_from_slice(&commit(i, i).to_bytes());
        }
        // tear the last record: flip a payload byte so its CRC fails
        let n = bytes.len();
        bytes[n - 10] ^= 0xFF;
        let scan = scan_bytes(&bytes);
        assert_eq!(scan.records.len(), 4);
        assert!(scan.torn_tail);
        assert_eq!(scan.last_commit().unwrap().lsn, 4);
    }

    #[test]
    fn truncated_tail_ignored() {
        let mut bytes = commit(1, 1).to_bytes();
        let full = commit(2, 2).to_bytes();
        bytes.extend_from_slice(&full[..full.len() / 2]);
        let scan = scan_bytes(&bytes);
        assert_eq!(scan.records.len(), 1);
        assert!(scan.torn_tail);
    }

    #[test]
    fn empty_is_empty() {
        let scan = scan_bytes(&[]);
        assert!(scan.records.is_empty());
        assert!(!scan.torn_tail);
    }
}
