//! Read path: lazy open, snapshot-pinned readers, verified streaming.
//!
//! Opening parses only the 96-byte header and the manifest block; payloads
//! are read on demand. Readers use positioned reads on a shared file handle,
//! so a handle can be used from many threads, and every reader stays pinned
//! to the manifest version it opened.

use std::collections::HashMap;
use std::fs::File;
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use uuid::Uuid;

use super::block::{BlockHeader, BLOCK_HEADER_SIZE};
use super::header::{FileHeader, HEADER_SIZE};
use super::manifest::{Manifest, ManifestEntry};
use super::{FourCc, FOURCC_MANI};
use crate::error::{MaifError, Result};
use crate::hashes::sha256;

/// Shared, instrumented file: counts bytes read (the lazy-open contract is
/// testable) and allows concurrent positioned reads.
#[derive(Debug)]
pub(crate) struct SharedFile {
    file: File,
    bytes_read: AtomicU64,
}

impl SharedFile {
    fn new(file: File) -> Self {
        Self { file, bytes_read: AtomicU64::new(0) }
    }

    pub(crate) fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> Result<()> {
        self.file.read_exact_at(buf, offset).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                MaifError::Truncated(format!("read past end of file at offset {offset}"))
            } else {
                MaifError::Io(e)
            }
        })?;
        self.bytes_read.fetch_add(buf.len() as u64, Ordering::Relaxed);
        Ok(())
    }

    fn len(&self) -> Result<u64> {
        Ok(self.file.metadata()?.len())
    }
}

/// One item yielded by [`ArtifactReader::stream_blocks`]: the block, or an
/// inline per-block integrity error (the stream itself does not abort).
pub type StreamItem = std::result::Result<(BlockHeader, Vec<u8>), (Uuid, MaifError)>;

/// Read-only handle pinned to one manifest version.
pub struct ArtifactReader {
    path: PathBuf,
    file: Arc<SharedFile>,
    file_len: u64,
    header: FileHeader,
    manifest: Manifest,
    manifest_offset: u64,
    index: HashMap<Uuid, usize>,
}

impl ArtifactReader {
    /// Open the latest committed version. Reads only the header and the
    /// manifest; open cost is independent of payload volume.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = Arc::new(SharedFile::new(File::open(&path)?));
        let file_len = file.len()?;
        let mut head_buf = [0u8; HEADER_SIZE as usize];
        file.read_exact_at(&mut head_buf, 0)?;
        let header = FileHeader::from_bytes(&head_buf)?;
        if !header.has_manifest() {
            return Err(MaifError::NoCommittedState);
        }
        if header.manifest_offset.saturating_add(header.manifest_length) > file_len {
            return Err(MaifError::Truncated("manifest extent beyond end of file".into()));
        }
        let manifest = read_manifest_at(
            &file,
            header.manifest_offset,
            header.manifest_length,
            Some(header.root_hash),
        )?;
        Ok(Self::assemble(path, file, file_len, header, manifest, None))
    }

    /// Open a specific manifest version by walking the predecessor chain.
    pub fn open_version(path: impl AsRef<Path>, version: u64) -> Result<Self> {
        let mut reader = Self::open(path)?;
        let latest = reader.manifest.manifest_version;
        if version == latest {
            return Ok(reader);
        }
        if version == 0 || version > latest {
            return Err(MaifError::UnknownVersion(version));
        }
        loop {
            let (prev_offset, prev_hash) =
                (reader.manifest.prev_manifest_offset, reader.manifest.prev_manifest_hash);
            if prev_offset == 0 {
                return Err(MaifError::UnknownVersion(version));
            }
            let prev = read_prev_manifest(&reader.file, reader.file_len, prev_offset, prev_hash)?;
            let expected = reader.manifest.manifest_version - 1;
            if prev.manifest_version != expected {
                return Err(MaifError::ManifestChainBroken { version: expected });
            }
            reader.manifest = prev;
            reader.manifest_offset = prev_offset;
            if reader.manifest.manifest_version == version {
                reader.index = build_index(&reader.manifest);
                return Ok(reader);
            }
        }
    }

    fn assemble(
        path: PathBuf,
        file: Arc<SharedFile>,
        file_len: u64,
        header: FileHeader,
        manifest: Manifest,
        manifest_offset: Option<u64>,
    ) -> Self {
        let manifest_offset = manifest_offset.unwrap_or(header.manifest_offset);
        let index = build_index(&manifest);
        Self { path, file, file_len, header, manifest, manifest_offset, index }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn header(&self) -> &FileHeader {
        &self.header
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn manifest_version(&self) -> u64 {
        self.manifest.manifest_version
    }

    pub fn file_uuid(&self) -> Uuid {
        self.header.file_uuid
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    /// Total bytes read from the artifact file through this handle.
    pub fn bytes_read(&self) -> u64 {
        self.file.bytes_read.load(Ordering::Relaxed)
    }

    /// SHA-256 of the pinned manifest's payload bytes.
    pub fn compute_root_hash(&self) -> [u8; 32] {
        sha256(&self.manifest.to_bytes())
    }

    /// Entries of the pinned manifest, optionally filtered by fourcc.
    pub fn list_blocks(&self, fourcc: Option<FourCc>) -> Vec<&ManifestEntry> {
        self.manifest
            .entries
            .iter()
            .filter(|e| fourcc.map_or(true, |f| e.fourcc == f))
            .collect()
    }

    pub fn entry(&self, block_id: &Uuid) -> Option<&ManifestEntry> {
        self.index.get(block_id).map(|&i| &self.manifest.entries[i])
    }

    /// Read a block's header and stored payload, verifying the payload hash.
    pub fn get_block(&self, block_id: &Uuid) -> Result<(BlockHeader, Vec<u8>)> {
        self.get_block_opts(block_id, true)
    }

    /// As [`get_block`](Self::get_block), optionally skipping verification.
    pub fn get_block_opts(&self, block_id: &Uuid, verify: bool) -> Result<(BlockHeader, Vec<u8>)> {
        let entry = self.entry(block_id).ok_or(MaifError::UnknownBlock(*block_id))?;
        let (header, payload) = read_block_at(&self.file, self.file_len, entry, verify)?;
        if header.is_tombstone() {
            return Err(MaifError::BlockDeleted(*block_id));
        }
        Ok((header, payload))
    }

    pub(crate) fn read_entry_block(&self, entry: &ManifestEntry, verify: bool) -> Result<(BlockHeader, Vec<u8>)> {
        read_block_at(&self.file, self.file_len, entry, verify)
    }

    /// Stream non-tombstone blocks in manifest order. With `verify` on, hash
    /// checks are spread over up to `worker_count` threads; order is
    /// preserved and integrity failures are yielded inline per block.
    pub fn stream_blocks(&self, verify: bool, worker_count: usize) -> impl Iterator<Item = StreamItem> + '_ {
        let entries: Vec<ManifestEntry> = self.manifest.entries.clone();
        StreamBlocks {
            reader: self,
            entries,
            verify,
            workers: worker_count.max(1),
            next: 0,
            buffered: Vec::new().into_iter(),
        }
    }

    /// Walk the version chain newest → oldest, erroring on broken links.
    pub fn version_chain(&self) -> Result<Vec<VersionSummary>> {
        let mut out = vec![VersionSummary::of(&self.manifest, self.manifest_offset)];
        let mut current = self.manifest.clone();
        while current.prev_manifest_offset != 0 {
            let prev_offset = current.prev_manifest_offset;
            let prev =
                read_prev_manifest(&self.file, self.file_len, prev_offset, current.prev_manifest_hash)?;
            if prev.manifest_version + 1 != current.manifest_version {
                return Err(MaifError::ManifestChainBroken { version: prev.manifest_version });
            }
            out.push(VersionSummary::of(&prev, prev_offset));
            current = prev;
        }
        if let Some(last) = out.last() {
            if last.manifest_version != 1 {
                return Err(MaifError::ManifestChainBroken { version: last.manifest_version });
            }
        }
        Ok(out)
    }
}

/// Summary of one manifest version in a chain walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionSummary {
    pub manifest_version: u64,
    pub created_at: u64,
    pub offset: u64,
    pub entry_count: usize,
    pub provenance_head_hash: [u8; 32],
}

impl VersionSummary {
    fn of(m: &Manifest, offset: u64) -> Self {
        Self {
            manifest_version: m.manifest_version,
            created_at: m.created_at,
            offset,
            entry_count: m.entries.len(),
            provenance_head_hash: m.provenance_head_hash,
        }
    }
}

fn build_index(manifest: &Manifest) -> HashMap<Uuid, usize> {
    manifest.entries.iter().enumerate().map(|(i, e)| (e.block_id, i)).collect()
}

/// Read + verify a manifest block at a known extent.
pub(crate) fn read_manifest_at(
    file: &SharedFile,
    offset: u64,
    length: u64,
    expected_root: Option<[u8; 32]>,
) -> Result<Manifest> {
    let mut buf = vec![0u8; length as usize];
    file.read_exact_at(&mut buf, offset)?;
    let header = BlockHeader::from_bytes(&buf, offset)?;
    if header.fourcc != FOURCC_MANI {
        return Err(MaifError::Decode("expected a MANI block".into()));
    }
    if header.block_length != length {
        return Err(MaifError::Decode("manifest block length mismatch".into()));
    }
    let pad = BlockHeader::pad_len(offset) as usize;
    let payload_len = header.payload_len(offset)? as usize;
    let start = BLOCK_HEADER_SIZE as usize + pad;
    if start + payload_len > buf.len() {
        return Err(MaifError::Truncated("manifest payload out of bounds".into()));
    }
    let payload = &buf[start..start + payload_len];
    let digest = sha256(payload);
    if let Some(root) = expected_root {
        if digest != root {
            return Err(MaifError::RootHashMismatch);
        }
    }
    if digest != header.payload_hash {
        return Err(MaifError::RootHashMismatch);
    }
    Manifest::from_bytes(payload)
}

/// Read a predecessor manifest and check it against the successor's link hash.
fn read_prev_manifest(
    file: &SharedFile,
    file_len: u64,
    offset: u64,
    expected_hash: [u8; 32],
) -> Result<Manifest> {
    // The extent is not recorded in the link; read the block header first.
    if offset + BLOCK_HEADER_SIZE > file_len {
        return Err(MaifError::Truncated("previous manifest offset beyond end of file".into()));
    }
    let mut head = [0u8; BLOCK_HEADER_SIZE as usize];
    file.read_exact_at(&mut head, offset)?;
    let header = BlockHeader::from_bytes(&head, offset)
        .map_err(|_| MaifError::ManifestChainBroken { version: 0 })?;
    if header.fourcc != FOURCC_MANI || offset + header.block_length > file_len {
        return Err(MaifError::ManifestChainBroken { version: 0 });
    }
    match read_manifest_at(file, offset, header.block_length, Some(expected_hash)) {
        Ok(m) => Ok(m),
        Err(MaifError::Io(e)) => Err(MaifError::Io(e)),
        Err(_) => Err(MaifError::ManifestChainBroken { version: 0 }),
    }
}

/// Read one block (header + stored payload) given its manifest entry,
/// cross-checking the header against the entry and optionally the payload
/// hash.
fn read_block_at(
    file: &SharedFile,
    file_len: u64,
    entry: &ManifestEntry,
    verify: bool,
) -> Result<(BlockHeader, Vec<u8>)> {
    if entry.offset.saturating_add(entry.block_length) > file_len {
        return Err(MaifError::Truncated(format!(
            "block {} extent beyond end of file",
            entry.block_id
        )));
    }
    let mut head = [0u8; BLOCK_HEADER_SIZE as usize];
    file.read_exact_at(&mut head, entry.offset)?;
    let header = BlockHeader::from_bytes(&head, entry.offset)?;
    if header.block_id != entry.block_id
        || header.fourcc != entry.fourcc
        || header.block_length != entry.block_length
        || header.payload_hash != entry.payload_hash
    {
        return Err(MaifError::PayloadHashMismatch { block_id: entry.block_id });
    }
    let payload_len = header.payload_len(entry.offset)?;
    let mut payload = vec![0u8; payload_len as usize];
    file.read_exact_at(&mut payload, BlockHeader::payload_offset(entry.offset))?;
    if verify && sha256(&payload) != entry.payload_hash {
        return Err(MaifError::PayloadHashMismatch { block_id: entry.block_id });
    }
    Ok((header, payload))
}

/// Chunked, order-preserving streaming iterator with parallel verification.
struct StreamBlocks<'r> {
    reader: &'r ArtifactReader,
    entries: Vec<ManifestEntry>,
    verify: bool,
    workers: usize,
    next: usize,
    buffered: std::vec::IntoIter<StreamItem>,
}

const STREAM_CHUNK: usize = 64;

impl StreamBlocks<'_> {
    fn refill(&mut self) {
        while self.next < self.entries.len() {
            let end = (self.next + STREAM_CHUNK).min(self.entries.len());
            let chunk = &self.entries[self.next..end];
            self.next = end;
            let items = if self.workers > 1 && chunk.len() > 1 {
                read_chunk_parallel(self.reader, chunk, self.verify, self.workers)
            } else {
                chunk.iter().map(|e| read_stream_item(self.reader, e, self.verify)).collect()
            };
            // Tombstones are filtered after the parallel read so worker
            // striping stays independent of content.
            let items: Vec<StreamItem> = items
                .into_iter()
                .filter(|item| !matches!(item, Ok((h, _)) if h.is_tombstone()))
                .collect();
            if !items.is_empty() {
                self.buffered = items.into_iter();
                return;
            }
        }
    }
}

impl Iterator for StreamBlocks<'_> {
    type Item = StreamItem;

    fn next(&mut self) -> Option<StreamItem> {
        loop {
            if let Some(item) = self.buffered.next() {
                return Some(item);
            }
            if self.next >= self.entries.len() {
                return None;
            }
            self.refill();
            if self.buffered.len() == 0 && self.next >= self.entries.len() {
                return None;
            }
        }
    }
}

fn read_stream_item(reader: &ArtifactReader, entry: &ManifestEntry, verify: bool) -> StreamItem {
    match read_block_at(&reader.file, reader.file_len, entry, verify) {
        Ok(pair) => Ok(pair),
        Err(e) => Err((entry.block_id, e)),
    }
}

/// Stripe a chunk across scoped threads; results are written into a
/// preallocated slot vector so output order matches manifest order exactly.
fn read_chunk_parallel(
    reader: &ArtifactReader,
    chunk: &[ManifestEntry],
    verify: bool,
    workers: usize,
) -> Vec<StreamItem> {
    let workers = workers.min(chunk.len());
    let mut slots: Vec<Option<StreamItem>> = (0..chunk.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (stripe, slot_stripe) in slots.chunks_mut(chunk.len().div_ceil(workers)).enumerate() {
            let base = stripe * chunk.len().div_ceil(workers);
            scope.spawn(move || {
                for (i, slot) in slot_stripe.iter_mut().enumerate() {
                    *slot = Some(read_stream_item(reader, &chunk[base + i], verify));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("all slots filled")).collect()
}
