//! The MAIF on-disk container: file header, typed blocks, indexed manifests.
//!
//! Layout: a fixed 96-byte file header, then blocks back to back. Every block
//! is a fixed 80-byte block header, zero padding so that the payload starts at
//! a file offset divisible by 64, then the payload. Manifest (`MANI`) blocks
//! additionally carry a 40-byte trailer (payload length + payload SHA-256)
//! so they can be rediscovered by scanning a damaged file.
//!
//! All committed bytes are covered by some integrity check: the file header
//! and block headers by CRC32, payloads by SHA-256 recorded in the manifest,
//! manifests by the root hash in the header and by the hash chain linking
//! each manifest to its predecessor.

pub(crate) mod scan;
mod block;
mod header;
mod manifest;
mod reader;
mod writer;

pub use block::{BlockHeader, BLOCK_FLAG_COMPRESSED, BLOCK_FLAG_ENCRYPTED, BLOCK_FLAG_TOMBSTONE};
pub use header::FileHeader;
pub use manifest::{Manifest, ManifestEntry};
pub use reader::{ArtifactReader, StreamItem};
pub use writer::{ArtifactWriter, WriterOptions};

/// Four-byte ASCII block type identifier.
pub type FourCc = [u8; 4];

/// UTF-8 text.
pub const FOURCC_TEXT: FourCc = *b"TEXT";
/// Opaque binary payloads: images, audio, video, serialized models.
pub const FOURCC_BDAT: FourCc = *b"BDAT";
/// Embedding matrix (dense or semantically compressed).
pub const FOURCC_EMBD: FourCc = *b"EMBD";
/// Knowledge-graph triples.
pub const FOURCC_KGRF: FourCc = *b"KGRF";
/// Access policy.
pub const FOURCC_ACLS: FourCc = *b"ACLS";
/// Provenance records.
pub const FOURCC_PROV: FourCc = *b"PROV";
/// Lifecycle metadata (annotations and stored adaptation rules).
pub const FOURCC_LIFE: FourCc = *b"LIFE";
/// Manifest.
pub const FOURCC_MANI: FourCc = *b"MANI";

/// Block types this version understands. Unknown fourcc values are preserved
/// opaquely for forward compatibility.
pub const REGISTERED_FOURCC: [FourCc; 8] = [
    FOURCC_TEXT,
    FOURCC_BDAT,
    FOURCC_EMBD,
    FOURCC_KGRF,
    FOURCC_ACLS,
    FOURCC_PROV,
    FOURCC_LIFE,
    FOURCC_MANI,
];

pub fn fourcc_to_string(fourcc: &FourCc) -> String {
    fourcc.iter().map(|&b| if b.is_ascii_graphic() { b as char } else { '.' }).collect()
}

pub fn fourcc_from_str(s: &str) -> Option<FourCc> {
    let b = s.as_bytes();
    if b.len() == 4 {
        Some([b[0], b[1], b[2], b[3]])
    } else {
        None
    }
}

/// Payload alignment in the file.
pub const PAYLOAD_ALIGN: u64 = 64;

/// Default maximum stored block payload size (2^40 bytes).
pub const MAX_BLOCK_SIZE: u64 = 1 << 40;

/// Maximum number of manifest entries (2^24), bounding index memory.
pub const MAX_MANIFEST_ENTRIES: u32 = 1 << 24;

/// Zero padding needed so that `offset + pad` is 64-byte aligned.
pub fn align_pad(offset: u64) -> u64 {
    (PAYLOAD_ALIGN - (offset % PAYLOAD_ALIGN)) % PAYLOAD_ALIGN
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn align_pad_basics() {
        assert_eq!(align_pad(0), 0);
        assert_eq!(align_pad(64), 0);
        assert_eq!(align_pad(1), 63);
        assert_eq!(align_pad(176), 16);
        for off in 0..300u64 {
            assert_eq!((off + align_pad(off)) % 64, 0);
        }
    }

    #[test]
    fn fourcc_string_conversion() {
        assert_eq!(fourcc_to_string(&FOURCC_TEXT), "TEXT");
        assert_eq!(fourcc_from_str("EMBD"), Some(FOURCC_EMBD));
        assert_eq!(fourcc_from_str("TOOLONG"), None);
        assert_eq!(fourcc_to_string(&[0x00, 0x41, 0x42, 0x43]), ".ABC");
    }
}
