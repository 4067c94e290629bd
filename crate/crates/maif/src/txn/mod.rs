//! ACID commit layer: write-ahead log, MVCC snapshots, crash recovery.
//!
//! One writer per artifact (advisory lock), any number of snapshot readers.
//! The WAL commit record is the atomic commit point; the header patch is a
//! cache. Recovery scans the WAL for the last durable commit whose manifest
//! verifies, truncates the data file to that manifest's end and rewrites the
//! header. Recovery is idempotent and never blocks readers.

pub mod fault;
pub mod wal;

use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::Serialize;

use crate::container::{ArtifactReader, BlockHeader, FileHeader, Manifest};
use crate::error::{MaifError, Result};
use crate::hashes::sha256;
use wal::{scan_file, wal_path, WalPayload};

/// A committed, reader-visible version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    pub manifest_version: u64,
    /// Block offset of the manifest.
    pub manifest_offset: u64,
    /// Full manifest block length.
    pub manifest_length: u64,
    #[serde(serialize_with = "crate::serde_hex::hash")]
    pub root_hash: [u8; 32],
}

/// Open a reader pinned to a version (`None` = latest committed).
pub fn open_snapshot(path: impl AsRef<Path>, version: Option<u64>) -> Result<ArtifactReader> {
    match version {
        None => ArtifactReader::open(path),
        Some(v) => ArtifactReader::open_version(path, v),
    }
}

/// Recover an artifact to its last durable commit.
///
/// Resolution order: newest valid WAL commit record whose manifest verifies;
/// else the header's manifest if it verifies; else a forward scan of the file
/// for the newest self-consistent manifest. With a target found, the data
/// file is truncated to the manifest's end and the header rewritten. Errors
/// with [`MaifError::NoCommittedState`] — touching nothing — when no valid
/// commit or manifest exists anywhere.
pub fn recover(path: impl AsRef<Path>) -> Result<Snapshot> {
    let path = path.as_ref();
    let mut file = OpenOptions::new().read(true).write(true).open(path)?;
    let file_len = file.metadata()?.len();
    let mut data = Vec::new();
    file.read_to_end(&mut data)?;

    let target = find_recovery_target(path, &data);
    let Some((offset, length, manifest)) = target else {
        return Err(MaifError::NoCommittedState);
    };
    let root_hash = sha256(&manifest.to_bytes());

    // Rebuild the header from the manifest (covers a destroyed header too).
    let mut header = FileHeader::new(manifest.file_uuid);
    header.manifest_offset = offset;
    header.manifest_length = length;
    header.root_hash = root_hash;
    file.seek(SeekFrom::Start(0))?;
    file.write_all(&header.to_bytes())?;

    let end = offset + length;
    if file_len != end {
        file.set_len(end)?;
    }
    file.sync_data()?;

    Ok(Snapshot {
        manifest_version: manifest.manifest_version,
        manifest_offset: offset,
        manifest_length: length,
        root_hash,
    })
}

/// Choose the manifest recovery should restore, if any.
fn find_recovery_target(path: &Path, data: &[u8]) -> Option<(u64, u64, Manifest)> {
    // 1. Newest valid WAL commit whose manifest verifies.
    if let Ok(scan) = scan_file(&wal_path(path)) {
        for rec in scan.records.iter().rev() {
            if let WalPayload::Commit { manifest_offset, manifest_length, root_hash } = rec.payload {
                if let Some(m) = verify_manifest_extent(data, manifest_offset, manifest_length) {
                    if sha256(&m.to_bytes()) == root_hash {
                        return Some((manifest_offset, manifest_length, m));
                    }
                }
            }
        }
    }
    // 2. The header's manifest.
    if let Ok(header) = FileHeader::from_bytes(data) {
        if header.has_manifest() {
            if let Some(m) = verify_manifest_extent(data, header.manifest_offset, header.manifest_length) {
                if sha256(&m.to_bytes()) == header.root_hash {
                    return Some((header.manifest_offset, header.manifest_length, m));
                }
            }
        }
    }
    // 3. Scan the file for the newest self-consistent manifest.
    crate::container::scan::scan_manifests(data)
        .into_iter()
        .max_by_key(|(_, _, m)| m.manifest_version)
}

/// Parse + verify a manifest at a known extent inside a byte image.
pub(crate) fn verify_manifest_extent(data: &[u8], offset: u64, length: u64) -> Option<Manifest> {
    let start = usize::try_from(offset).ok()?;
    let end = start.checked_add(usize::try_from(length).ok()?)?;
    if end > data.len() {
        return None;
    }
    let block = &data[start..end];
    let header = BlockHeader::from_bytes(block, offset).ok()?;
    if header.fourcc != crate::container::FOURCC_MANI || header.block_length != length {
        return None;
    }
    let pad = BlockHeader::pad_len(offset) as usize;
    let payload_len = header.payload_len(offset).ok()? as usize;
    let pstart = 80 + pad;
    let payload = block.get(pstart..pstart + payload_len)?;
    if sha256(payload) != header.payload_hash {
        return None;
    }
    Manifest::from_bytes(payload).ok()
}
