//! `EMBD` block payload layout and the embedding read/write operations.
//!
//! Payload layout (dense sub-format):
//!
//! ```text
//! sub_format u8        0 = dense f32 matrix, 1 = semantically compressed
//! n          u32       row count
//! d          u32       dimension
//! dtype      u8        0 = f32 (only value in v1)
//! norm_flag  u8        1 = rows are unit L2 within 1e-4
//! ext        u32 count + (text key, bytes value) pairs, sorted by key
//! pad        zero bytes so the matrix data is 64-byte aligned within the
//!            payload (payloads start 64-byte aligned in the file, so the
//!            matrix is 64-byte aligned on disk)
//! data       n × d little-endian f32, row-major
//! ```
//!
//! The compressed sub-format stores a length-prefixed blob produced by the
//! semantic compression pipeline instead of raw matrix data. The `ext` map
//! carries block-scoped metadata such as the `csb` commitment binding the
//! embedding to its source bytes.

use std::collections::BTreeMap;

use uuid::Uuid;

use crate::container::{ArtifactReader, ArtifactWriter, FOURCC_EMBD};
use crate::error::{MaifError, Result};
use crate::mcbe::{Decoder, Encoder};
use crate::provenance::Action;
use crate::semantic::l2_norm;

/// Unit-norm tolerance for the normalization flag.
pub const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum EmbeddingSubFormat {
    Dense = 0,
    Compressed = 1,
}

/// Parsed `EMBD` payload.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBlock {
    pub count: u32,
    pub dim: u32,
    pub normalization_flag: bool,
    pub sub_format: EmbeddingSubFormat,
    /// Row-major matrix (dense sub-format).
    pub data: Vec<f32>,
    /// Compressed blob (compressed sub-format).
    pub compressed: Vec<u8>,
    /// Block-scoped metadata extension map.
    pub ext: BTreeMap<String, Vec<u8>>,
}

impl EmbeddingBlock {
    pub fn dense(rows: &[Vec<f32>], normalization_flag: bool) -> Result<Self> {
        let count = rows.len() as u32;
        let dim = rows.first().map(|r| r.len()).unwrap_or(0) as u32;
        if rows.iter().any(|r| r.len() as u32 != dim) {
            return Err(MaifError::InvalidArgument("matrix is not rectangular".into()));
        }
        let data: Vec<f32> = rows.iter().flatten().copied().collect();
        let block = Self {
            count,
            dim,
            normalization_flag,
            sub_format: EmbeddingSubFormat::Dense,
            data,
            compressed: Vec::new(),
            ext: BTreeMap::new(),
        };
        block.check_invariants()?;
        Ok(block)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.dim as usize;
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1) as usize).take(self.count as usize)
    }

    /// Mean vector across rows.
    pub fn centroid(&self) -> Vec<f32> {
        let d = self.dim as usize;
        let mut acc = vec![0f64; d];
        for row in self.rows() {
            for (a, &x) in acc.iter_mut().zip(row) {
                *a += x as f64;
            }
        }
        let n = self.count.max(1) as f64;
        acc.into_iter().map(|a| (a / n) as f32).collect()
    }

    fn check_invariants(&self) -> Result<()> {
        if self.sub_format == EmbeddingSubFormat::Dense {
            if self.data.len() as u64 != self.count as u64 * self.dim as u64 {
                return Err(MaifError::InvalidArgument(format!(
                    "matrix data length {} does not match {}×{}",
                    self.data.len(),
                    self.count,
                    self.dim
                )));
            }
            if self.data.iter().any(|x| !x.is_finite()) {
                return Err(MaifError::InvalidArgument("matrix contains non-finite values".into()));
            }
        }
        if self.normalization_flag {
            for (i, row) in self.rows().enumerate() {
                let norm = l2_norm(row);
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    return Err(MaifError::InvalidArgument(format!(
                        "row {i} has L2 norm {norm}, not unit within {NORM_TOLERANCE}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_payload(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(64 + self.data.len() * 4 + self.compressed.len());
        enc.put_u8(self.sub_format as u8);
        enc.put_u32(self.count);
        enc.put_u32(self.dim);
        enc.put_u8(0); // dtype f32
        enc.put_u8(self.normalization_flag as u8);
        enc.put_u32(self.ext.len() as u32);
        for (k, v) in &self.ext {
            enc.put_text(k);
            enc.put_bytes(v);
        }
        match self.sub_format {
            EmbeddingSubFormat::Dense => {
                let pad = (64 - (enc.len() % 64)) % 64;
                enc.put_raw(&vec![0u8; pad]);
                for &x in &self.data {
                    enc.put_f32(x);
                }
            }
            EmbeddingSubFormat::Compressed => {
                enc.put_bytes(&self.compressed);
            }
        }
        enc.into_bytes()
    }

    pub fn from_payload(payload: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(payload);
        let sub_format = match dec.get_u8()? {
            0 => EmbeddingSubFormat::Dense,
            1 => EmbeddingSubFormat::Compressed,
            other => return Err(MaifError::Decode(format!("unknown EMBD sub-format {other}"))),
        };
        let count = dec.get_u32()?;
        let dim = dec.get_u32()?;
        let dtype = dec.get_u8()?;
        if dtype != 0 {
            return Err(MaifError::Decode(format!("unknown EMBD dtype {dtype}")));
        }
        let normalization_flag = dec.get_u8()? != 0;
        let ext_count = dec.get_count(1 << 16)?;
        let mut ext = BTreeMap::new();
        for _ in 0..ext_count {
            let key = dec.get_text()?;
            let value = dec.get_bytes()?.to_vec();
            ext.insert(key, value);
        }
        let (data, compressed) = match sub_format {
            EmbeddingSubFormat::Dense => {
                let pad = (64 - (dec.position() % 64)) % 64;
                let pad_bytes = dec.get_raw(pad)?;
                if pad_bytes.iter().any(|&b| b != 0) {
                    return Err(MaifError::Decode("nonzero EMBD alignment padding".into()));
                }
                let total = count as u64 * dim as u64;
                if total * 4 != dec.remaining() as u64 {
                    return Err(MaifError::Decode(format!(
                        "EMBD data length {} does not match {count}×{dim}×4",
                        dec.remaining()
                    )));
                }
                let mut data = Vec::with_capacity(total as usize);
                for _ in 0..total {
                    data.push(dec.get_f32()?);
                }
                (data, Vec::new())
            }
            EmbeddingSubFormat::Compressed => {
                let blob = dec.get_bytes()?.to_vec();
                dec.finish()?;
                (Vec::new(), blob)
            }
        };
        Ok(Self { count, dim, normalization_flag, sub_format, data, compressed, ext })
    }
}

impl ArtifactWriter {
    /// Store a dense embedding matrix as an `EMBD` block.
    pub fn write_embeddings(&mut self, rows: &[Vec<f32>], normalization_flag: bool) -> Result<Uuid> {
        let block = EmbeddingBlock::dense(rows, normalization_flag)?;
        let payload = block.to_payload();
        let id = self.append_block(FOURCC_EMBD, &payload, 0, 0)?;
        if self.signer().is_some() {
            self.record_action(Action::Append, vec![id])?;
        }
        Ok(id)
    }

    /// Replace an `EMBD` block with an updated value (new version).
    pub fn update_embedding_block(&mut self, block_id: Uuid, block: &EmbeddingBlock) -> Result<()> {
        block.check_invariants()?;
        let payload = block.to_payload();
        self.replace_block(block_id, FOURCC_EMBD, &payload, 0, 0, payload.len() as u64)?;
        if self.signer().is_some() {
            self.record_action(Action::Update, vec![block_id])?;
        }
        Ok(())
    }

    /// Read back an `EMBD` block as staged or committed in this writer.
    pub fn read_embedding_block(&mut self, block_id: &Uuid) -> Result<EmbeddingBlock> {
        let entry = self
            .current_entry(block_id)
            .cloned()
            .ok_or(MaifError::UnknownBlock(*block_id))?;
        if entry.fourcc != FOURCC_EMBD {
            return Err(MaifError::InvalidArgument(format!("block {block_id} is not an EMBD block")));
        }
        let payload = self.read_staged_or_committed_payload(&entry)?;
        EmbeddingBlock::from_payload(&payload)
    }
}

impl ArtifactReader {
    /// Read and parse an `EMBD` block. Payload bytes are only touched here —
    /// opening the artifact never loads them.
    pub fn read_embeddings(&self, block_id: &Uuid) -> Result<EmbeddingBlock> {
        let entry = self.entry(block_id).ok_or(MaifError::UnknownBlock(*block_id))?;
        if entry.fourcc != FOURCC_EMBD {
            return Err(MaifError::InvalidArgument(format!("block {block_id} is not an EMBD block")));
        }
        let (_, payload) = self.get_block(block_id)?;
        EmbeddingBlock::from_payload(&payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_roundtrip_and_alignment() {
        let rows = vec![vec![1.0f32, 2.0, 3.0, 4.0]; 3];
        let block = EmbeddingBlock::dense(&rows, false).unwrap();
        let payload = block.to_payload();
        // matrix data must start 64-byte aligned within the payload
        assert_eq!((payload.len() - 3 * 4 * 4) % 64, 0);
        let parsed = EmbeddingBlock::from_payload(&payload).unwrap();
        assert_eq!(parsed, block);
        assert_eq!(parsed.row(1), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn non_rectangular_rejected() {
        let rows = vec![vec![1.0f32, 2.0], vec![3.0]];
        assert!(EmbeddingBlock::dense(&rows, false).is_err());
    }

    #[test]
    fn norm_flag_enforced() {
        let ok = vec![vec![1.0f32, 0.0], vec![0.0, -1.0]];
        assert!(EmbeddingBlock::dense(&ok, true).is_ok());
        let bad = vec![vec![1.0f32, 1.0]];
        assert!(EmbeddingBlock::dense(&bad, true).is_err());
    }

    #[test]
    fn ext_map_survives_roundtrip_sorted() {
        let mut block = EmbeddingBlock::dense(&[vec![0.5f32; 4]], false).unwrap();
        block.ext.insert("zz".into(), vec![1]);
        block.ext.insert("aa".into(), vec![2]);
        let parsed = EmbeddingBlock::from_payload(&block.to_payload()).unwrap();
        assert_eq!(parsed.ext.get("aa"), Some(&vec![2]));
        assert_eq!(parsed.ext.get("zz"), Some(&vec![1]));
        // determinism: same value, same bytes
        assert_eq!(parsed.to_payload(), block.to_payload());
    }

    #[test]
    fn centroid_of_two_rows() {
        let block = EmbeddingBlock::dense(&[vec![1.0f32, 0.0], vec![0.0, 1.0]], false).unwrap();
        assert_eq!(block.centroid(), vec![0.5, 0.5]);
    }
}
