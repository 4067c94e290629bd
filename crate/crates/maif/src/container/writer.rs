//! Single-writer append path with WAL-backed atomic commits.
//!
//! Commit protocol:
//! 1. staged data blocks appended and flushed,
//! 2. manifest block appended and flushed,
//! 3. WAL commit record written and flushed — the atomic commit point,
//! 4. header patched and flushed (a cache for WAL-less readers).
//!
//! A crash at any boundary leaves the previous committed snapshot intact;
//! recovery replays the WAL to find the last durable commit.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use uuid::Uuid;

use super::block::{BlockHeader, BLOCK_HEADER_SIZE, BLOCK_FLAG_TOMBSTONE};
use super::header::{FileHeader, HEADER_SIZE};
use super::manifest::{Manifest, ManifestEntry};
use super::{FourCc, FOURCC_MANI, FOURCC_PROV, MAX_BLOCK_SIZE, MAX_MANIFEST_ENTRIES};
use crate::error::{MaifError, Result};
use crate::hashes::sha256;
use crate::provenance::{Action, ProvenanceLedger, Signer};
use crate::txn::fault::{self, FlushKind, FlushPoint};
use crate::txn::wal::{wal_path, WalFile, WalPayload};
use crate::txn::Snapshot;

/// Options for creating an artifact.
#[derive(Debug, Clone)]
pub struct WriterOptions {
    /// Explicit file UUID; a random one is generated when absent.
    pub file_uuid: Option<Uuid>,
    /// Allow truncating an existing file.
    pub truncate: bool,
    /// Maximum stored payload size per block.
    pub max_block_size: u64,
}

impl Default for WriterOptions {
    fn default() -> Self {
        Self { file_uuid: None, truncate: false, max_block_size: MAX_BLOCK_SIZE }
    }
}

/// Advisory lock file guard (`<path>.lock`, contains the owner PID).
struct LockFile {
    path: PathBuf,
}

impl LockFile {
    fn acquire(artifact: &Path) -> Result<Self> {
        let mut os = artifact.as_os_str().to_os_string();
        os.push(".lock");
        let path = PathBuf::from(os);
        for attempt in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let _ = write!(f, "{}", std::process::id());
                    return Ok(Self { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists && attempt == 0 => {
                    // Steal the lock if its owner is gone.
                    let owner = std::fs::read_to_string(&path).unwrap_or_default();
                    let stale = owner
                        .trim()
                        .parse::<u32>()
                        .map(|pid| !Path::new(&format!("/proc/{pid}")).exists())
                        .unwrap_or(true);
                    if stale {
                        let _ = std::fs::remove_file(&path);
                        continue;
                    }
                    return Err(MaifError::Locked(format!("pid {}", owner.trim())));
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    return Err(MaifError::Locked("contended".into()));
                }
                Err(e) => return Err(e.into()),
            }
        }
        unreachable!()
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        // Only the lock is cleaned up; the artifact and WAL are never touched
        // on drop so an interrupted writer leaves a recoverable state.
        let _ = std::fs::remove_file(&self.path);
    }
}

struct TxState {
    txid: u64,
    /// Entries to upsert into the next manifest (blocks already on disk).
    staged: Vec<ManifestEntry>,
    /// Ledger length at begin, for rollback on abort.
    ledger_mark: usize,
    ledger_dirty_mark: bool,
    /// True when opened implicitly by `append_block`/`finalize`.
    implicit: bool,
}

/// Writer handle: exclusive append access to one artifact.
pub struct ArtifactWriter {
    path: PathBuf,
    file: File,
    header: FileHeader,
    wal: WalFile,
    _lock: LockFile,
    /// Current append position (end of file).
    end_offset: u64,
    /// Last committed manifest and its block offset.
    committed: Option<(u64, Manifest)>,
    /// Live entry set as of the last commit, ordered by offset.
    entries: Vec<ManifestEntry>,
    tx: Option<TxState>,
    next_txid: u64,
    pub(crate) ledger: ProvenanceLedger,
    ledger_dirty: bool,
    prov_block_id: Option<Uuid>,
    /// Cache of current block versions for replacement bumps.
    versions: HashMap<Uuid, u16>,
    signer: Option<Signer>,
    clock: Box<dyn Fn() -> u64 + Send>,
    max_block_size: u64,
}

fn system_clock_us() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_micros() as u64)
        .unwrap_or(0)
}

impl ArtifactWriter {
    /// Create a new artifact. The file holds a valid header with no committed
    /// manifest until the first commit.
    pub fn create(path: impl AsRef<Path>, options: WriterOptions) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if path.exists() && !options.truncate {
            return Err(MaifError::InvalidArgument(format!(
                "{} already exists (truncate not requested)",
                path.display()
            )));
        }
        let lock = LockFile::acquire(&path)?;
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(true).open(&path)?;
        let header = FileHeader::new(options.file_uuid.unwrap_or_else(Uuid::new_v4));
        file.write_all(&header.to_bytes())?;
        file.sync_data()?;
        let wal = WalFile::create(&wal_path(&path))?;
        Ok(Self {
            path,
            file,
            header,
            wal,
            _lock: lock,
            end_offset: HEADER_SIZE,
            committed: None,
            entries: Vec::new(),
            tx: None,
            next_txid: 0,
            ledger: ProvenanceLedger::new(),
            ledger_dirty: false,
            prov_block_id: None,
            versions: HashMap::new(),
            signer: None,
            clock: Box::new(system_clock_us),
            max_block_size: options.max_block_size,
        })
    }

    /// Open an existing artifact for append.
    ///
    /// If the WAL holds a commit newer than the header (a crash between the
    /// commit record and the header patch), the header patch is completed
    /// here; any deeper inconsistency is reported as needing recovery.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let lock = LockFile::acquire(&path)?;
        let mut file = OpenOptions::new().read(true).write(true).open(&path)?;
        let mut head_buf = [0u8; HEADER_SIZE as usize];
        file.read_exact(&mut head_buf)?;
        let mut header = FileHeader::from_bytes(&head_buf)?;
        let file_len = file.metadata()?.len();

        let (wal, scan) = WalFile::open(&wal_path(&path))?;
        let next_txid = scan.last_txid() + 1;

        // Reconcile header with the WAL's last commit.
        if let Some(rec) = scan.last_commit() {
            if let WalPayload::Commit { manifest_offset, manifest_length, root_hash } = rec.payload {
                if header.manifest_offset != manifest_offset {
                    let (m, _) = read_manifest_block(&mut file, manifest_offset, manifest_length, file_len)?;
                    if sha256(&m.to_bytes()) != root_hash {
                        return Err(MaifError::Transaction(
                            "WAL commit does not match its manifest; run recover".into(),
                        ));
                    }
                    header.manifest_offset = manifest_offset;
                    header.manifest_length = manifest_length;
                    header.root_hash = root_hash;
                    file.seek(SeekFrom::Start(0))?;
                    file.write_all(&header.to_bytes())?;
                    file.sync_data()?;
                }
            }
        }

        let (committed, entries) = if header.has_manifest() {
            let (manifest, offset) =
                read_manifest_block(&mut file, header.manifest_offset, header.manifest_length, file_len)?;
            if sha256(&manifest.to_bytes()) != header.root_hash {
                return Err(MaifError::RootHashMismatch);
            }
            let entries = manifest.entries.clone();
            (Some((offset, manifest)), entries)
        } else {
            (None, Vec::new())
        };

        // Load the provenance ledger if present.
        let mut ledger = ProvenanceLedger::new();
        let mut prov_block_id = None;
        if let Some(entry) = entries.iter().find(|e| e.fourcc == FOURCC_PROV) {
            let payload = read_block_payload(&mut file, entry, file_len)?;
            ledger = ProvenanceLedger::from_bytes(&payload)?;
            prov_block_id = Some(entry.block_id);
        }

        Ok(Self {
            end_offset: file_len,
            path,
            file,
            header,
            wal,
            _lock: lock,
            committed,
            entries,
            tx: None,
            next_txid,
            ledger,
            ledger_dirty: false,
            prov_block_id,
            versions: HashMap::new(),
            signer: None,
            clock: Box::new(system_clock_us),
            max_block_size: MAX_BLOCK_SIZE,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file_uuid(&self) -> Uuid {
        self.header.file_uuid
    }

    /// Version of the last committed manifest (0 before the first commit).
    pub fn committed_version(&self) -> u64 {
        self.committed.as_ref().map(|(_, m)| m.manifest_version).unwrap_or(0)
    }

    /// Bind a signer; subsequent mutating operations emit provenance records.
    pub fn set_signer(&mut self, signer: Signer) {
        self.signer = Some(signer);
    }

    pub fn signer(&self) -> Option<&Signer> {
        self.signer.as_ref()
    }

    /// Replace the microsecond UTC clock (tests and reproducible runs).
    pub fn set_clock(&mut self, clock: impl Fn() -> u64 + Send + 'static) {
        self.clock = Box::new(clock);
    }

    pub fn now_us(&self) -> u64 {
        (self.clock)()
    }

    // -- transactions --------------------------------------------------------

    /// Open an explicit transaction. Only one may be open at a time.
    pub fn begin(&mut self) -> Result<u64> {
        if self.tx.is_some() {
            return Err(MaifError::Transaction("a transaction is already open".into()));
        }
        self.begin_internal(false)
    }

    fn begin_internal(&mut self, implicit: bool) -> Result<u64> {
        let txid = self.next_txid.max(1);
        self.next_txid = txid + 1;
        self.wal.append(txid, WalPayload::Begin)?;
        fault::fire(FlushPoint { kind: FlushKind::WalBegin, manifest_version: 0 })?;
        self.wal.sync()?;
        self.tx = Some(TxState {
            txid,
            staged: Vec::new(),
            ledger_mark: self.ledger.len(),
            ledger_dirty_mark: self.ledger_dirty,
            implicit,
        });
        Ok(txid)
    }

    fn tx_mut(&mut self, txid: u64) -> Result<&mut TxState> {
        match self.tx.as_mut() {
            Some(tx) if tx.txid == txid => Ok(self.tx.as_mut().unwrap()),
            Some(_) => Err(MaifError::Transaction("txid does not match the open transaction".into())),
            None => Err(MaifError::Transaction("no open transaction".into())),
        }
    }

    fn ensure_tx(&mut self) -> Result<u64> {
        match &self.tx {
            Some(tx) => Ok(tx.txid),
            None => self.begin_internal(true),
        }
    }

    /// Stage a block inside an explicit transaction.
    pub fn stage_block(
        &mut self,
        txid: u64,
        fourcc: FourCc,
        payload: &[u8],
        flags: u16,
        codec_id: u8,
    ) -> Result<Uuid> {
        self.tx_mut(txid)?;
        self.write_and_stage(Uuid::new_v4(), fourcc, payload, flags, codec_id, payload.len() as u64)
    }

    /// Append a block, beginning an implicit transaction when none is open.
    /// The payload must already be transformed (compressed/encrypted) by the
    /// caller; `flags` and `codec_id` describe that transform.
    pub fn append_block(&mut self, fourcc: FourCc, payload: &[u8], flags: u16, codec_id: u8) -> Result<Uuid> {
        self.ensure_tx()?;
        self.write_and_stage(Uuid::new_v4(), fourcc, payload, flags, codec_id, payload.len() as u64)
    }

    /// Append with an explicit uncompressed length (callers of codecs).
    pub fn append_block_transformed(
        &mut self,
        fourcc: FourCc,
        payload: &[u8],
        flags: u16,
        codec_id: u8,
        uncompressed_length: u64,
    ) -> Result<Uuid> {
        self.ensure_tx()?;
        self.write_and_stage(Uuid::new_v4(), fourcc, payload, flags, codec_id, uncompressed_length)
    }

    /// Replace the content of an existing block id (appends a new version).
    pub fn replace_block(
        &mut self,
        block_id: Uuid,
        fourcc: FourCc,
        payload: &[u8],
        flags: u16,
        codec_id: u8,
        uncompressed_length: u64,
    ) -> Result<Uuid> {
        if !self.is_known_block(&block_id) {
            return Err(MaifError::UnknownBlock(block_id));
        }
        self.ensure_tx()?;
        self.write_and_stage(block_id, fourcc, payload, flags, codec_id, uncompressed_length)
    }

    /// Mark a block as deleted by appending a tombstone version.
    pub fn tombstone_block(&mut self, block_id: Uuid) -> Result<()> {
        let fourcc = self
            .current_entry(&block_id)
            .map(|e| e.fourcc)
            .ok_or(MaifError::UnknownBlock(block_id))?;
        self.ensure_tx()?;
        self.write_and_stage(block_id, fourcc, &[], BLOCK_FLAG_TOMBSTONE, 0, 0)?;
        Ok(())
    }

    fn is_known_block(&self, block_id: &Uuid) -> bool {
        self.current_entry(block_id).is_some()
    }

    /// Entry as seen by the open transaction (staged over committed).
    pub fn current_entry(&self, block_id: &Uuid) -> Option<&ManifestEntry> {
        if let Some(tx) = &self.tx {
            if let Some(e) = tx.staged.iter().rev().find(|e| &e.block_id == block_id) {
                return Some(e);
            }
        }
        self.entries.iter().find(|e| &e.block_id == block_id)
    }

    /// The live entry list the next commit will publish (committed ∪ staged).
    pub fn pending_entries(&self) -> Vec<ManifestEntry> {
        let mut merged = self.entries.clone();
        if let Some(tx) = &self.tx {
            for staged in &tx.staged {
                merged.retain(|e| e.block_id != staged.block_id);
                merged.push(staged.clone());
            }
        }
        merged.sort_by_key(|e| e.offset);
        merged
    }

    fn next_version_of(&mut self, block_id: &Uuid) -> u16 {
        if let Some(v) = self.versions.get(block_id) {
            return v.saturating_add(1);
        }
        // Read the committed block header once to learn the current version.
        let current = self
            .entries
            .iter()
            .find(|e| &e.block_id == block_id)
            .and_then(|e| {
                let mut buf = [0u8; BLOCK_HEADER_SIZE as usize];
                self.file.seek(SeekFrom::Start(e.offset)).ok()?;
                self.file.read_exact(&mut buf).ok()?;
                BlockHeader::from_bytes(&buf, e.offset).ok().map(|h| h.block_version)
            })
            .unwrap_or(0);
        current.saturating_add(1)
    }

    fn write_and_stage(
        &mut self,
        block_id: Uuid,
        fourcc: FourCc,
        payload: &[u8],
        flags: u16,
        codec_id: u8,
        uncompressed_length: u64,
    ) -> Result<Uuid> {
        if payload.len() as u64 > self.max_block_size {
            return Err(MaifError::BlockTooLarge { size: payload.len() as u64, max: self.max_block_size });
        }
        let block_version = self.next_version_of(&block_id);
        let (entry, _) = self.write_block_record(
            block_id,
            fourcc,
            payload,
            flags,
            codec_id,
            uncompressed_length,
            block_version,
        )?;
        let txid = self.tx.as_ref().expect("transaction open").txid;
        self.wal.append(
            txid,
            WalPayload::Append { block_offset: entry.offset, payload_hash: entry.payload_hash },
        )?;
        self.versions.insert(block_id, block_version);
        let tx = self.tx.as_mut().unwrap();
        tx.staged.retain(|e| e.block_id != block_id);
        tx.staged.push(entry);
        Ok(block_id)
    }

    /// Write one block record at the current end of file. Returns its entry.
    fn write_block_record(
        &mut self,
        block_id: Uuid,
        fourcc: FourCc,
        payload: &[u8],
        flags: u16,
        codec_id: u8,
        uncompressed_length: u64,
        block_version: u16,
    ) -> Result<(ManifestEntry, BlockHeader)> {
        let offset = self.end_offset;
        let pad = BlockHeader::pad_len(offset);
        let block_length = BlockHeader::full_length(offset, &fourcc, payload.len() as u64);
        let payload_hash = sha256(payload);
        let header = BlockHeader {
            block_length,
            fourcc,
            block_version,
            flags,
            block_id,
            codec_id,
            uncompressed_length,
            payload_hash,
        };
        let mut buf = Vec::with_capacity(block_length as usize);
        buf.extend_from_slice(&header.to_bytes());
        buf.resize(buf.len() + pad as usize, 0);
        buf.extend_from_slice(payload);
        if fourcc == FOURCC_MANI {
            buf.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            buf.extend_from_slice(&payload_hash);
        }
        debug_assert_eq!(buf.len() as u64, block_length);
        self.file.seek(SeekFrom::Start(offset))?;
        self.file.write_all(&buf)?;
        self.end_offset = offset + block_length;
        let entry = ManifestEntry { block_id, fourcc, offset, block_length, payload_hash };
        Ok((entry, header))
    }

    /// Record a signed provenance event using the bound signer.
    pub fn record_action(&mut self, action: Action, targets: Vec<Uuid>) -> Result<()> {
        let ts = self.now_us();
        self.record_action_at(action, targets, ts)
    }

    /// Record a signed provenance event with an explicit timestamp.
    /// Out-of-order timestamps are accepted; forensics flags them later.
    pub fn record_action_at(&mut self, action: Action, targets: Vec<Uuid>, timestamp: u64) -> Result<()> {
        let signer = self
            .signer
            .clone()
            .ok_or_else(|| MaifError::InvalidArgument("no signer bound to writer".into()))?;
        self.ledger.append_record(&signer, action, targets, timestamp)?;
        self.ledger_dirty = true;
        Ok(())
    }

    /// Record a provenance event with an explicit signer and timestamp.
    pub fn append_record(
        &mut self,
        signer: &Signer,
        action: Action,
        targets: Vec<Uuid>,
        timestamp: u64,
    ) -> Result<()> {
        self.ledger.append_record(signer, action, targets, timestamp)?;
        self.ledger_dirty = true;
        Ok(())
    }

    pub fn ledger(&self) -> &ProvenanceLedger {
        &self.ledger
    }

    /// Commit the open transaction; returns the published snapshot.
    pub fn commit(&mut self, txid: u64) -> Result<Snapshot> {
        self.tx_mut(txid)?;
        let next_version = self.committed_version() + 1;

        // (1) data blocks durable.
        fault::fire(FlushPoint { kind: FlushKind::DataBlocks, manifest_version: next_version })?;
        self.file.sync_data()?;

        // Serialize the ledger into the PROV block if it changed.
        if self.ledger_dirty {
            let prov_id = *self.prov_block_id.get_or_insert_with(Uuid::new_v4);
            let payload = self.ledger.to_bytes();
            let version = self.next_version_of(&prov_id);
            let (entry, _) =
                self.write_block_record(prov_id, FOURCC_PROV, &payload, 0, 0, payload.len() as u64, version)?;
            self.wal.append(
                txid,
                WalPayload::Append { block_offset: entry.offset, payload_hash: entry.payload_hash },
            )?;
            self.versions.insert(prov_id, version);
            let tx = self.tx.as_mut().unwrap();
            tx.staged.retain(|e| e.block_id != prov_id);
            tx.staged.push(entry);
        }

        // Build the new manifest.
        let mut entries = self.pending_entries();
        entries.sort_by_key(|e| e.offset);
        if entries.len() as u64 > MAX_MANIFEST_ENTRIES as u64 {
            return Err(MaifError::InvalidArgument(format!(
                "manifest entry count {} exceeds cap {MAX_MANIFEST_ENTRIES}",
                entries.len()
            )));
        }
        let (prev_manifest_offset, prev_manifest_hash) = match &self.committed {
            Some((offset, m)) => (*offset, sha256(&m.to_bytes())),
            None => (0, crate::hashes::ZERO_HASH),
        };
        let manifest = Manifest {
            manifest_version: next_version,
            created_at: self.now_us(),
            prev_manifest_offset,
            prev_manifest_hash,
            provenance_head_hash: self.ledger.head_hash(),
            file_uuid: self.header.file_uuid,
            entries,
        };
        let payload = manifest.to_bytes();
        let root_hash = sha256(&payload);

        // (2) manifest block durable.
        let (mani_entry, _) = self.write_block_record(
            Uuid::new_v4(),
            FOURCC_MANI,
            &payload,
            0,
            0,
            payload.len() as u64,
            (next_version & 0xFFFF) as u16,
        )?;
        fault::fire(FlushPoint { kind: FlushKind::ManifestBlock, manifest_version: next_version })?;
        self.file.sync_data()?;

        // (3) WAL commit record durable — the commit point.
        self.wal.append(
            txid,
            WalPayload::Manifest {
                manifest_offset: mani_entry.offset,
                manifest_length: mani_entry.block_length,
                root_hash,
            },
        )?;
        self.wal.append(
            txid,
            WalPayload::Commit {
                manifest_offset: mani_entry.offset,
                manifest_length: mani_entry.block_length,
                root_hash,
            },
        )?;
        fault::fire(FlushPoint { kind: FlushKind::WalCommit, manifest_version: next_version })?;
        self.wal.sync()?;

        // (4) header patch.
        self.header.manifest_offset = mani_entry.offset;
        self.header.manifest_length = mani_entry.block_length;
        self.header.root_hash = root_hash;
        self.file.seek(SeekFrom::Start(0))?;
        self.file.write_all(&self.header.to_bytes())?;
        fault::fire(FlushPoint { kind: FlushKind::HeaderPatch, manifest_version: next_version })?;
        self.file.sync_data()?;

        self.entries = manifest.entries.clone();
        self.committed = Some((mani_entry.offset, manifest));
        self.ledger_dirty = false;
        self.tx = None;
        Ok(Snapshot {
            manifest_version: next_version,
            manifest_offset: mani_entry.offset,
            manifest_length: mani_entry.block_length,
            root_hash,
        })
    }

    /// Abort the open transaction. Staged bytes become dead space in the
    /// file (reclaimed by repair); no visible state changes.
    pub fn abort(&mut self, txid: u64) -> Result<()> {
        self.tx_mut(txid)?;
        self.wal.append(txid, WalPayload::Abort)?;
        fault::fire(FlushPoint { kind: FlushKind::WalAbort, manifest_version: 0 })?;
        self.wal.sync()?;
        let tx = self.tx.take().unwrap();
        self.ledger.records.truncate(tx.ledger_mark);
        self.ledger_dirty = tx.ledger_dirty_mark;
        for e in &tx.staged {
            self.versions.remove(&e.block_id);
        }
        Ok(())
    }

    /// Commit everything staged (opening an empty transaction if none is
    /// open) and return the new root hash.
    pub fn finalize(&mut self) -> Result<[u8; 32]> {
        let txid = self.ensure_tx()?;
        let snapshot = self.commit(txid)?;
        Ok(snapshot.root_hash)
    }

    /// Read back a block payload by entry; staged blocks are already on disk
    /// so a plain positioned read covers both staged and committed state.
    pub(crate) fn read_staged_or_committed_payload(&mut self, entry: &ManifestEntry) -> Result<Vec<u8>> {
        let file_len = self.end_offset;
        read_block_payload(&mut self.file, entry, file_len)
    }

    /// True if an explicit or implicit transaction is open.
    pub fn in_transaction(&self) -> bool {
        self.tx.is_some()
    }

    /// Txid of the open transaction, if any.
    pub fn open_txid(&self) -> Option<u64> {
        self.tx.as_ref().map(|t| t.txid)
    }
}

/// Read a manifest block at a known extent and parse its payload.
/// Returns the manifest and the block offset.
fn read_manifest_block(
    file: &mut File,
    offset: u64,
    length: u64,
    file_len: u64,
) -> Result<(Manifest, u64)> {
    if offset + length > file_len {
        return Err(MaifError::Truncated("manifest extent beyond end of file".into()));
    }
    let mut buf = vec![0u8; length as usize];
    file.seek(SeekFrom::Start(offset))?;
    file.read_exact(&mut buf)?;
    let header = BlockHeader::from_bytes(&buf, offset)?;
    if header.fourcc != FOURCC_MANI {
        return Err(MaifError::Decode("manifest offset does not point at a MANI block".into()));
    }
    if header.block_length != length {
        return Err(MaifError::Decode("manifest block length mismatch".into()));
    }
    let pad = BlockHeader::pad_len(offset);
    let payload_len = header.payload_len(offset)? as usize;
    let start = (BLOCK_HEADER_SIZE + pad) as usize;
    let payload = &buf[start..start + payload_len];
    if sha256(payload) != header.payload_hash {
        return Err(MaifError::RootHashMismatch);
    }
    let manifest = Manifest::from_bytes(payload)?;
    Ok((manifest, offset))
}

/// Read a block's stored payload given its manifest entry.
fn read_block_payload(file: &mut File, entry: &ManifestEntry, file_len: u64) -> Result<Vec<u8>> {
    if entry.offset + entry.block_length > file_len {
        return Err(MaifError::Truncated("block extent beyond end of file".into()));
    }
    let mut head = [0u8; BLOCK_HEADER_SIZE as usize];
    file.seek(SeekFrom::Start(entry.offset))?;
    file.read_exact(&mut head)?;
    let header = BlockHeader::from_bytes(&head, entry.offset)?;
    let payload_len = header.payload_len(entry.offset)?;
    let mut payload = vec![0u8; payload_len as usize];
    file.seek(SeekFrom::Start(BlockHeader::payload_offset(entry.offset)))?;
    file.read_exact(&mut payload)?;
    if sha256(&payload) != entry.payload_hash {
        return Err(MaifError::PayloadHashMismatch { block_id: entry.block_id });
    }
    Ok(payload)
}
