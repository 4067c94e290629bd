//! Fixed 80-byte block header and block layout math.

use uuid::Uuid;

use super::{align_pad, FourCc, FOURCC_MANI};
use crate::error::{MaifError, Result};
use crate::hashes::crc32_parts;

/// Stored payload is compressed (codec_id says how).
pub const BLOCK_FLAG_COMPRESSED: u16 = 1 << 0;
/// Stored payload is an authenticated-encryption envelope.
pub const BLOCK_FLAG_ENCRYPTED: u16 = 1 << 1;
/// Logical deletion marker; payload length is zero.
pub const BLOCK_FLAG_TOMBSTONE: u16 = 1 << 2;

/// Size of the fixed block header on disk.
pub const BLOCK_HEADER_SIZE: u64 = 80;

/// Manifest blocks carry a self-delimiting trailer: payload length (u64) +
/// payload SHA-256, so manifests can be found by scanning a damaged file.
pub const MANIFEST_TRAILER_SIZE: u64 = 40;

/// On-disk block header.
///
/// Layout (offsets within the block):
/// ```text
///  0  block_length         u64   total on-disk size: header + pad + payload (+ trailer)
///  8  fourcc               [4]
/// 12  block_version        u16   starts at 1, bumps on replacement
/// 14  flags                u16
/// 16  block_id             [16]
/// 32  codec_id             u8
/// 33  header_crc           u32   CRC32 over bytes 0..33 and 37..80
/// 37  reserved             [3]   zero
/// 40  uncompressed_length  u64   payload length before compression
/// 48  payload_hash         [32]  SHA-256 of the stored payload bytes
/// 80  padding              zeros until the payload offset is 64-byte aligned
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockHeader {
    pub block_length: u64,
    pub fourcc: FourCc,
    pub block_version: u16,
    pub flags: u16,
    pub block_id: Uuid,
    pub codec_id: u8,
    pub uncompressed_length: u64,
    pub payload_hash: [u8; 32],
}

impl BlockHeader {
    pub fn is_tombstone(&self) -> bool {
        self.flags & BLOCK_FLAG_TOMBSTONE != 0
    }

    pub fn is_compressed(&self) -> bool {
        self.flags & BLOCK_FLAG_COMPRESSED != 0
    }

    pub fn is_encrypted(&self) -> bool {
        self.flags & BLOCK_FLAG_ENCRYPTED != 0
    }

    fn trailer_size(fourcc: &FourCc) -> u64 {
        if *fourcc == FOURCC_MANI {
            MANIFEST_TRAILER_SIZE
        } else {
            0
        }
    }

    /// Compute the full block length for a block starting at `block_offset`
    /// with a payload of `payload_len` bytes.
    pub fn full_length(block_offset: u64, fourcc: &FourCc, payload_len: u64) -> u64 {
        let pad = align_pad(block_offset + BLOCK_HEADER_SIZE);
        BLOCK_HEADER_SIZE + pad + payload_len + Self::trailer_size(fourcc)
    }

    /// Padding between this header and its payload, given the block offset.
    pub fn pad_len(block_offset: u64) -> u64 {
        align_pad(block_offset + BLOCK_HEADER_SIZE)
    }

    /// File offset of the payload for a block starting at `block_offset`.
    pub fn payload_offset(block_offset: u64) -> u64 {
        block_offset + BLOCK_HEADER_SIZE + Self::pad_len(block_offset)
    }

    /// Stored payload length implied by `block_length` at `block_offset`.
    pub fn payload_len(&self, block_offset: u64) -> Result<u64> {
        let overhead = BLOCK_HEADER_SIZE + Self::pad_len(block_offset) + Self::trailer_size(&self.fourcc);
        self.block_length
            .checked_sub(overhead)
            .ok_or_else(|| MaifError::Truncated("block length smaller than header+padding".into()))
    }

    pub fn to_bytes(&self) -> [u8; BLOCK_HEADER_SIZE as usize] {
        let mut buf = [0u8; BLOCK_HEADER_SIZE as usize];
        buf[0..8].copy_from_slice(&self.block_length.to_le_bytes());
        buf[8..12].copy_from_slice(&self.fourcc);
        buf[12..14].copy_from_slice(&self.block_version.to_le_bytes());
        buf[14..16].copy_from_slice(&self.flags.to_le_bytes());
        buf[16..32].copy_from_slice(self.block_id.as_bytes());
        buf[32] = self.codec_id;
        // 33..37 crc (filled below), 37..40 reserved zero
        buf[40..48].copy_from_slice(&self.uncompressed_length.to_le_bytes());
        buf[48..80].copy_from_slice(&self.payload_hash);
        let crc = crc32_parts(&[&buf[0..33], &buf[37..80]]);
        buf[33..37].copy_from_slice(&crc.to_le_bytes());
        buf
    }

    /// Parse and CRC-check an 80-byte block header found at `block_offset`
    /// (the offset is only used for error reporting).
    pub fn from_bytes(buf: &[u8], block_offset: u64) -> Result<Self> {
        if buf.len() < BLOCK_HEADER_SIZE as usize {
            return Err(MaifError::Truncated("block header out of bounds".into()));
        }
        let stored_crc = u32::from_le_bytes(buf[33..37].try_into().unwrap());
        if crc32_parts(&[&buf[0..33], &buf[37..80]]) != stored_crc {
            return Err(MaifError::BlockCrcMismatch { offset: block_offset });
        }
        Ok(Self {
            block_length: u64::from_le_bytes(buf[0..8].try_into().unwrap()),
            fourcc: buf[8..12].try_into().unwrap(),
            block_version: u16::from_le_bytes(buf[12..14].try_into().unwrap()),
            flags: u16::from_le_bytes(buf[14..16].try_into().unwrap()),
            block_id: Uuid::from_bytes(buf[16..32].try_into().unwrap()),
            codec_id: buf[32],
            uncompressed_length: u64::from_le_bytes(buf[40..48].try_into().unwrap()),
            payload_hash: buf[48..80].try_into().unwrap(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BlockHeader {
        BlockHeader {
            block_length: 256,
            fourcc: *b"TEXT",
            block_version: 1,
            flags: 0,
            block_id: Uuid::from_bytes([5; 16]),
            codec_id: 0,
            uncompressed_length: 100,
            payload_hash: [0xAB; 32],
        }
    }

    #[test]
    fn roundtrip() {
        let h = sample();
        let parsed = BlockHeader::from_bytes(&h.to_bytes(), 96).unwrap();
        assert_eq!(parsed, h);
    }

    #[test]
    fn every_header_bit_flip_detected_by_crc() {
        let bytes = sample().to_bytes();
        for byte in 0..80 {
            for bit in 0..8 {
                let mut corrupt = bytes;
                corrupt[byte] ^= 1 << bit;
                assert!(
                    BlockHeader::from_bytes(&corrupt, 0).is_err(),
                    "flip at byte {byte} bit {bit} went undetected"
                );
            }
        }
    }

    #[test]
    fn layout_math() {
        // first block right after the 96-byte file header
        assert_eq!(BlockHeader::pad_len(96), 16); // 96+80=176 -> pad to 192
        assert_eq!(BlockHeader::payload_offset(96), 192);
        assert_eq!(BlockHeader::full_length(96, b"TEXT", 5), 80 + 16 + 5);
        assert_eq!(
            BlockHeader::full_length(96, b"MANI", 5),
            80 + 16 + 5 + MANIFEST_TRAILER_SIZE
        );
        assert_eq!(BlockHeader::payload_offset(96) % 64, 0);
    }
}
