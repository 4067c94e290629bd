//! Scanning damaged files for blocks and manifests.
//!
//! Forward scan walks block headers from the first block offset; it stops at
//! the first record that fails to parse. The backward scan hunts for the
//! `MANI` fourcc pattern and validates each candidate through its header,
//! payload hash and self-delimiting trailer, so manifests survive even when
//! earlier regions of the file are destroyed.

use super::block::{BlockHeader, BLOCK_HEADER_SIZE, MANIFEST_TRAILER_SIZE};
use super::header::HEADER_SIZE;
use super::manifest::Manifest;
use super::FOURCC_MANI;
use crate::hashes::sha256;
use crate::txn::verify_manifest_extent;

/// A block discovered by the forward scan.
#[derive(Debug, Clone)]
pub struct ScannedBlock {
    pub offset: u64,
    pub header: BlockHeader,
    /// Stored payload hash verified against the payload bytes.
    pub payload_ok: bool,
}

/// Walk block records forward from the first block offset. Stops at the
/// first header that fails its CRC or runs past the end of the image.
pub fn scan_blocks_forward(data: &[u8]) -> Vec<ScannedBlock> {
    let mut out = Vec::new();
    let mut offset = HEADER_SIZE;
    while (offset + BLOCK_HEADER_SIZE) <= data.len() as u64 {
        let start = offset as usize;
        let Ok(header) = BlockHeader::from_bytes(&data[start..start + BLOCK_HEADER_SIZE as usize], offset)
        else {
            break;
        };
        let end = offset.saturating_add(header.block_length);
        if header.block_length < BLOCK_HEADER_SIZE || end > data.len() as u64 {
            break;
        }
        let payload_ok = header
            .payload_len(offset)
            .ok()
            .and_then(|len| {
                let pstart = BlockHeader::payload_offset(offset) as usize;
                data.get(pstart..pstart + len as usize)
            })
            .map(|payload| sha256(payload) == header.payload_hash)
            .unwrap_or(false);
        out.push(ScannedBlock { offset, header, payload_ok });
        offset = end;
    }
    out
}

/// Every self-consistent manifest in the image: `(offset, length, manifest)`.
///
/// Tries the cheap forward scan first; if that finds nothing (e.g. an early
/// block header was destroyed), falls back to searching for `MANI` fourcc
/// candidates across the whole image.
pub fn scan_manifests(data: &[u8]) -> Vec<(u64, u64, Manifest)> {
    let mut found: Vec<(u64, u64, Manifest)> = scan_blocks_forward(data)
        .into_iter()
        .filter(|b| b.header.fourcc == FOURCC_MANI && b.payload_ok)
        .filter_map(|b| {
            verify_manifest_extent(data, b.offset, b.header.block_length)
                .map(|m| (b.offset, b.header.block_length, m))
        })
        .collect();
    if !found.is_empty() {
        return found;
    }
    // Fourcc sits at block offset + 8.
    for pos in memchr_all(data, &FOURCC_MANI) {
        let Some(offset) = (pos as u64).checked_sub(8) else { continue };
        if offset < HEADER_SIZE {
            continue;
        }
        let start = offset as usize;
        if start + BLOCK_HEADER_SIZE as usize > data.len() {
            continue;
        }
        let Ok(header) = BlockHeader::from_bytes(&data[start..start + BLOCK_HEADER_SIZE as usize], offset)
        else {
            continue;
        };
        if header.block_length < BLOCK_HEADER_SIZE + MANIFEST_TRAILER_SIZE {
            continue;
        }
        if let Some(m) = verify_manifest_extent(data, offset, header.block_length) {
            found.push((offset, header.block_length, m));
        }
    }
    found.sort_by_key(|(offset, _, _)| *offset);
    found.dedup_by_key(|(offset, _, _)| *offset);
    found
}

/// All positions where `needle` occurs in `haystack`.
fn memchr_all(haystack: &[u8], needle: &[u8; 4]) -> Vec<usize> {
    let mut out = Vec::new();
    if haystack.len() < 4 {
        return out;
    }
    for i in 0..=haystack.len() - 4 {
        if &haystack[i..i + 4] == needle {
            out.push(i);
        }
    }
    out
}
