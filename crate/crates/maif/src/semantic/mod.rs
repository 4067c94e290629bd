//! Embedded semantic layer: embedding storage, similarity search,
//! trust-weighted cross-modal attention, commitments binding data to its
//! embedding, and knowledge-graph triples.

mod acam;
mod ann;
mod csb;
mod embeddings;
mod search;
mod triples;

pub use acam::{acam_weights, AttentionInputs};
pub use ann::{ann_search, build_ann_index, AnnIndex, AnnParams};
pub use csb::{csb_commit, csb_verify, encode_embedding, SemanticCommitment, CSB_EXT_KEY, CSB_SOURCE_EXT_KEY};
pub use embeddings::{EmbeddingBlock, EmbeddingSubFormat};
pub use search::{cosine, knn_search, knn_search_matrix};
pub use triples::{Triple, TriplePattern};

/// L2 norm of a vector, accumulated in f64.
pub(crate) fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Dot product accumulated in f64.
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}
