//! Fixed 96-byte file header at offset 0.

use uuid::Uuid;

use crate::error::{MaifError, Result};
use crate::hashes::{crc32, ZERO_HASH};

/// Magic bytes at the start of every artifact: "MAIF".
pub const MAGIC: [u8; 4] = *b"MAIF";

/// Total header size on disk, including trailing padding.
pub const HEADER_SIZE: u64 = 96;

/// Bytes covered by `header_crc` (everything before the CRC field).
const CRC_COVERED: usize = 76;

pub const FORMAT_VERSION_MAJOR: u16 = 1;
pub const FORMAT_VERSION_MINOR: u16 = 0;

/// File header. `manifest_offset`/`manifest_length` describe the extent of
/// the latest committed manifest block (offset 0 means none committed yet);
/// `root_hash` is the SHA-256 of that manifest's payload bytes.
///
/// The header is patched in place on every commit. It is a convenience cache
/// for readers without the write-ahead log; the WAL commit record is the
/// authoritative commit point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileHeader {
    pub version_major: u16,
    pub version_minor: u16,
    pub file_uuid: Uuid,
    pub flags: u32,
    pub manifest_offset: u64,
    pub manifest_length: u64,
    pub root_hash: [u8; 32],
}

impl FileHeader {
    pub fn new(file_uuid: Uuid) -> Self {
        Self {
            version_major: FORMAT_VERSION_MAJOR,
            version_minor: FORMAT_VERSION_MINOR,
            file_uuid,
            flags: 0,
            manifest_offset: 0,
            manifest_length: 0,
            root_hash: ZERO_HASH,
        }
    }

    pub fn has_manifest(&self) -> bool {
        self.manifest_offset != 0
    }

    /// Serialize to the fixed 96-byte layout.
    pub fn to_bytes(&self) -> [u8; HEADER_SIZE as usize] {
        let mut buf = [0u8; HEADER_SIZE as usize];
        buf[0..4].copy_from_slice(&MAGIC);
        buf[4..6].copy_from_slice(&self.version_major.to_le_bytes());
        buf[6..8].copy_from_slice(&self.version_minor.to_le_bytes());
        buf[8..24].copy_from_slice(self.file_uuid.as_bytes());
        buf[24..28].copy_from_slice(&self.flags.to_le_bytes());
        buf[28..36].copy_from_slice(&self.manifest_offset.to_le_bytes());
        buf[36..44].copy_from_slice(&self.manifest_length.to_le_bytes());
        buf[44..76].copy_from_slice(&self.root_hash);
        let crc = crc32(&buf[..CRC_COVERED]);
        buf[76..80].copy_from_slice(&crc.to_le_bytes());
        // bytes 80..96 stay zero
        buf
    }

    /// Parse and fully validate a 96-byte header.
    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < HEADER_SIZE as usize {
            return Err(MaifError::Truncated("file shorter than header".into()));
        }
        if buf[0..4] != MAGIC {
            return Err(MaifError::BadMagic);
        }
        let stored_crc = u32::from_le_bytes(buf[76..80].try_into().unwrap());
        if crc32(&buf[..CRC_COVERED]) != stored_crc {
            return Err(MaifError::HeaderCrcMismatch);
        }
        let version_major = u16::from_le_bytes(buf[4..6].try_into().unwrap());
        let version_minor = u16::from_le_bytes(buf[6..8].try_into().unwrap());
        if version_major != FORMAT_VERSION_MAJOR {
            return Err(MaifError::UnsupportedVersion { major: version_major, minor: version_minor });
        }
        Ok(Self {
            version_major,
            version_minor,
            file_uuid: Uuid::from_bytes(buf[8..24].try_into().unwrap()),
            flags: u32::from_le_bytes(buf[24..28].try_into().unwrap()),
            manifest_offset: u64::from_le_bytes(buf[28..36].try_into().unwrap()),
            manifest_length: u64::from_le_bytes(buf[36..44].try_into().unwrap()),
            root_hash: buf[44..76].try_into().unwrap(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut h = FileHeader::new(Uuid::from_bytes([3; 16]));
        h.manifest_offset = 4096;
        h.manifest_length = 200;
        h.root_hash = [7; 32];
        let bytes = h.to_bytes();
        assert_eq!(bytes.len(), 96);
        let parsed = FileHeader::from_bytes(&bytes).unwrap();
        assert_eq!(parsed, h);
    }

    #[test]
    fn bad_magic_rejected() {
        let h = FileHeader::new(Uuid::nil());
        let mut bytes = h.to_bytes();
        bytes[0] = b'X';
        assert!(matches!(FileHeader::from_bytes(&bytes), Err(MaifError::BadMagic)));
    }

    #[test]
    fn any_single_bit_flip_in_covered_region_detected() {
        let mut h = FileHeader::new(Uuid::from_bytes([9; 16]));
        h.manifest_offset = 128;
        h.manifest_length = 64;
        let bytes = h.to_bytes();
        for byte in 0..80 {
            for bit in 0..8 {
                let mut corrupt = bytes;
                corrupt[byte] ^= 1 << bit;
                assert!(
                    FileHeader::from_bytes(&corrupt).is_err(),
                    "flip at byte {byte} bit {bit} went undetected"
                );
            }
        }
    }
}
