//! Crate-wide error type.

use uuid::Uuid;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, MaifError>;

/// Broad classification used by callers (the CLI maps these to exit codes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Malformed input, bad arguments, unsupported options.
    Usage,
    /// Cryptographic integrity violation: the artifact does not match its hashes.
    Tamper,
    /// Underlying I/O failure.
    Io,
    /// Everything else (state errors, not-found, invariant violations).
    Other,
}

#[derive(Debug, thiserror::Error)]
pub enum MaifError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("not a MAIF file: bad magic")]
    BadMagic,

    #[error("unsupported format version {major}.{minor}")]
    UnsupportedVersion { major: u16, minor: u16 },

    #[error("file header CRC mismatch")]
    HeaderCrcMismatch,

    #[error("block header CRC mismatch at offset {offset}")]
    BlockCrcMismatch { offset: u64 },

    #[error("truncated or out-of-bounds structure: {0}")]
    Truncated(String),

    #[error("manifest hash does not match root hash (possible tampering)")]
    RootHashMismatch,

    #[error("payload hash mismatch for block {block_id} (possible tampering)")]
    PayloadHashMismatch { block_id: Uuid },

    #[error("manifest chain broken at version {version} (possible tampering)")]
    ManifestChainBroken { version: u64 },

    #[error("provenance chain invalid at record {index}: {reason}")]
    ProvenanceInvalid { index: u64, reason: String },

    #[error("unknown block {0}")]
    UnknownBlock(Uuid),

    #[error("block {0} is deleted")]
    BlockDeleted(Uuid),

    #[error("unknown manifest version {0}")]
    UnknownVersion(u64),

    #[error("no committed manifest found")]
    NoCommittedState,

    #[error("decode error: {0}")]
    Decode(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported codec id {0}")]
    UnsupportedCodec(u8),

    #[error("decompressed length {actual} does not match expected {expected}")]
    LengthMismatch { expected: u64, actual: u64 },

    #[error("corrupt compressed stream: {0}")]
    CorruptStream(String),

    #[error("authentication failed (wrong key, tampered ciphertext, or wrong block binding)")]
    AuthenticationFailed,

    #[error("permission denied: {0}")]
    PermissionDenied(String),

    #[error("signing failed: {0}")]
    SigningFailed(String),

    #[error("transaction error: {0}")]
    Transaction(String),

    #[error("artifact is locked by another writer ({0})")]
    Locked(String),

    #[error("block exceeds maximum size ({size} > {max})")]
    BlockTooLarge { size: u64, max: u64 },

    #[error("duplicate rule id {0:?}")]
    DuplicateRuleId(String),

    #[error("{0}")]
    Other(String),
}

impl MaifError {
    /// Coarse category, primarily for CLI exit-code mapping.
    pub fn category(&self) -> ErrorCategory {
        use MaifError::*;
        match self {
            Io(_) => ErrorCategory::Io,
            RootHashMismatch
            | PayloadHashMismatch { .. }
            | ManifestChainBroken { .. }
            | ProvenanceInvalid { .. }
            | HeaderCrcMismatch
            | BlockCrcMismatch { .. }
            | AuthenticationFailed => ErrorCategory::Tamper,
            InvalidArgument(_) | UnsupportedCodec(_) | UnsupportedVersion { .. } => {
                ErrorCategory::Usage
            }
            _ => ErrorCategory::Other,
        }
    }
}
