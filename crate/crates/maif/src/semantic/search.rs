//! Exact cosine top-k search over embedding blocks.

use uuid::Uuid;

use crate::container::ArtifactReader;
use crate::error::{MaifError, Result};
use crate::semantic::{dot, l2_norm, EmbeddingBlock};

/// Cosine similarity, 0.0 when either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Exact top-k by cosine over a parsed embedding block. Results are sorted by
/// cosine descending, ties broken by lower row index; returns `min(k, n)`
/// hits.
pub fn knn_search_matrix(block: &EmbeddingBlock, query: &[f32], k: usize) -> Result<Vec<(u32, f64)>> {
    if k == 0 {
        return Err(MaifError::InvalidArgument("k must be at least 1".into()));
    }
    if block.count == 0 {
        return Err(MaifError::InvalidArgument("embedding block is empty".into()));
    }
    if query.len() != block.dim as usize {
        return Err(MaifError::InvalidArgument(format!(
            "query dimension {} does not match block dimension {}",
            query.len(),
            block.dim
        )));
    }
    let mut scored: Vec<(u32, f64)> = block
        .rows()
        .enumerate()
        .map(|(i, row)| (i as u32, cosine(query, row)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.truncate(k.min(block.count as usize));
    Ok(scored)
}

/// Exact top-k against a stored `EMBD` block.
pub fn knn_search(reader: &ArtifactReader, block_id: &Uuid, query: &[f32], k: usize) -> Result<Vec<(u32, f64)>> {
    let block = reader.read_embeddings(block_id)?;
    knn_search_matrix(&block, query, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(rows: &[Vec<f32>]) -> EmbeddingBlock {
        EmbeddingBlock::dense(rows, false).unwrap()
    }

    #[test]
    fn hand_computed_two_row_example() {
        // rows (1,0) and (0.6,0.8): cosines against (1,0) are 1.0 and 0.6
        let b = block(&[vec![1.0, 0.0], vec![0.6, 0.8]]);
        let hits = knn_search_matrix(&b, &[1.0, 0.0], 2).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].0, 0);
        assert!((hits[0].1 - 1.0).abs() < 1e-9);
        assert_eq!(hits[1].0, 1);
        assert!((hits[1].1 - 0.6).abs() < 1e-9);
    }

    #[test]
    fn self_similarity_ranks_first() {
        let rows: Vec<Vec<f32>> = (0..8).map(|i| vec![i as f32 + 1.0, 1.0, 0.5]).collect();
        let b = block(&rows);
        let hits = knn_search_matrix(&b, &rows[5], 1).unwrap();
        assert_eq!(hits[0].0, 5);
        assert!((hits[0].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn k_larger_than_n_truncates() {
        let b = block(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let hits = knn_search_matrix(&b, &[1.0, 1.0], 10).unwrap();
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn ties_break_by_lower_row_index() {
        let b = block(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 0.0]]);
        // rows 1 and 2 are colinear: identical cosine; row 1 must come first
        let hits = knn_search_matrix(&b, &[1.0, 0.0], 3).unwrap();
        assert_eq!(hits[0].0, 1);
        assert_eq!(hits[1].0, 2);
    }

    #[test]
    fn dimension_mismatch_and_empty_errors() {
        let b = block(&[vec![1.0, 0.0]]);
        assert!(knn_search_matrix(&b, &[1.0, 0.0, 0.0], 1).is_err());
        let empty = EmbeddingBlock::dense(&[], false).unwrap();
        assert!(knn_search_matrix(&empty, &[], 1).is_err());
    }
}
