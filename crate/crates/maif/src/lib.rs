//! MAIF: a self-contained, trustworthy container for multimodal AI artifacts.
//!
//! An artifact is a single file of typed, hash-protected blocks indexed by a
//! versioned manifest. On top of the container sit:
//!
//! * **provenance** — ECDSA-signed, hash-chained audit records with per-block
//!   trust scoring
//! * **access** — block-granular policies and authenticated encryption
//! * **semantic** — embedding storage, exact and approximate similarity
//!   search, trust-weighted cross-modal attention, commitments binding data
//!   to its embedding, knowledge-graph triples
//! * **compress** — a pluggable codec framework plus hierarchical semantic
//!   compression for embedding matrices
//! * **txn** — WAL-backed atomic commits, MVCC snapshot readers, crash
//!   recovery
//! * **validate** / **repair** — multi-level validation and automated repair
//! * **forensics** — attack-pattern analysis and incident timelines
//! * **bench** — reproducible desk-scale benchmark harness
//!
//! See the crate's `examples/` directory for one runnable example per
//! capability.

pub mod container;
pub mod error;
pub mod hashes;
pub mod mcbe;
pub mod provenance;
pub mod serde_hex;
pub mod txn;

pub use container::{ArtifactReader, ArtifactWriter, WriterOptions};
pub use error::{ErrorCategory, MaifError, Result};
pub use txn::Snapshot;
