//! Exact maximum-inner-product search over the property embeddings.
//!
//! Results are ordered by descending dot product with ties broken by
//! ascending property id, so every query has a single correct answer.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{Interner, Vocabulary};
use crate::encoder::{BiEncoderModel, EncoderError, Side};
use crate::math::{dot, sigmoid};

/// Candidate count used for retrieval unless configured otherwise.
pub const DEFAULT_TOP_K: usize = 50;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MipsError {
    #[error("property vocabulary is empty")]
    EmptyIndex,
    #[error("query has dimension {found}, index has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("index rows must be finite")]
    NonFinite,
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub property_id: u32,
    pub dot_product: f64,
    pub probability: f64,
}

impl ScoredCandidate {
    pub fn new(property_id: u32, dot_product: f64) -> Self {
        ScoredCandidate {
            property_id,
            dot_product,
            probability: sigmoid(dot_product),
        }
    }

    /// Retrieval order: larger dot product first, then smaller id.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .dot_product
            .total_cmp(&self.dot_product)
            .then(self.property_id.cmp(&other.property_id))
    }
}

/// Property-embedding matrix, one row per property id.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyIndex {
    dim: usize,
    rows: Vec<f64>,
    property_ids: Vec<u32>,
}

// Heap entry ordered so the heap's maximum is the worst retained candidate.
struct Worst(ScoredCandidate);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

impl PropertyIndex {
    /// Index over the property vocabulary; row `p` is `φprop(p)`.
    pub fn build(model: &BiEncoderModel, vocab: &Vocabulary) -> Result<Self, MipsError> {
        let names = vocab.properties.names();
        if names.is_empty() {
            return Err(MipsError::EmptyIndex);
        }
        let mut rows = Vec::with_capacity(names.len() * model.dim());
        for name in names {
            rows.extend(model.embed(Side::Property, name)?);
        }
        Self::from_rows(model.dim(), rows, (0..names.len() as u32).collect())
    }

    /// Index from a row-major matrix; `property_ids[i]` labels row `i`.
    pub fn from_rows(dim: usize, rows: Vec<f64>, property_ids: Vec<u32>) -> Result<Self, MipsError> {
        if property_ids.is_empty() {
            return Err(MipsError::EmptyIndex);
        }
        if dim == 0 || rows.len() != dim * property_ids.len() {
            return Err(MipsError::DimensionMismatch {
                expected: dim * property_ids.len(),
                found: rows.len(),
            });
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(MipsError::NonFinite);
        }
        Ok(PropertyIndex {
            dim,
            rows,
            property_ids,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.property_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.property_ids.is_empty()
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn property_ids(&self) -> &[u32] {
        &self.property_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// The `k` rows with the largest dot product against `query`, best
    /// first. Uses a bounded heap, so cost is `O(n·dim + n·log k)`.
    pub fn top_k(&self, query: &[f64], k: usize) -> Result<Vec<ScoredCandidate>, MipsError> {
        if k == 0 {
            return Err(MipsError::ZeroK);
        }
        if query.len() != self.dim {
            return Err(MipsError::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        let k = k.min(self.len());
        let mut heap: BinaryHeap<Worst> = BinaryHeap::with_capacity(k + 1);
        for (row, &id) in self.rows.chunks_exact(self.dim).zip(&self.property_ids) {
            let cand = ScoredCandidate {
                property_id: id,
                dot_product: dot(row, query),
                probability: 0.0,
            };
            if heap.len() < k {
                heap.push(Worst(cand));
            } else if let Some(worst) = heap.peek() {
                if cand.rank_cmp(&worst.0) == Ordering::Less {
                    heap.pop();
                    heap.push(Worst(cand));
                }
            }
        }
        let mut out: Vec<ScoredCandidate> = heap
            .into_iter()
            .map(|w| ScoredCandidate::new(w.0.property_id, w.0.dot_product))
            .collect();
        out.sort_by(ScoredCandidate::rank_cmp);
        Ok(out)
    }

    /// Per-concept candidates for every concept of the vocabulary, in
    /// concept-id order. The index rows must be the vocabulary's properties.
    pub fn retrieve_all(&self, model: &BiEncoderModel, vocab: &Vocabulary, k: usize) -> Result<Candidates, MipsError> {
        let lists = vocab
            .concepts
            .names()
            .iter()
            .map(|c| self.top_k(&model.embed(Side::Concept, c)?, k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Candidates {
            concepts: vocab.concepts.clone(),
            properties: vocab.properties.clone(),
            lists,
        })
    }
}

/// Retrieved candidates for every concept; `lists[c]` belongs to concept id
/// `c` and holds property ids of `properties`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    pub concepts: Interner,
    pub properties: Interner,
    pub lists: Vec<Vec<ScoredCandidate>>,
}

impl Candidates {
    pub fn pair_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// `(concept, property, candidate)` in concept-id then rank order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &ScoredCandidate)> {
        self.lists.iter().enumerate().flat_map(move |(c, list)| {
            list.iter().map(move |cand| {
                (
                    self.concepts.name(c as u32),
                    self.properties.name(cand.property_id),
                    cand,
                )
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn basis3() -> PropertyIndex {
        PropertyIndex::from_rows(3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], vec![0, 1, 2]).unwrap()
    }

    #[test]
    fn standard_basis_query() {
        let got = basis3().top_k(&[0.9, 0.1, 0.0], 2).unwrap();
        let ids: Vec<u32> = got.iter().map(|c| c.property_id).collect();
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(got[0].dot_product, 0.9);
        assert_eq!(got[0].probability, sigmoid(0.9));
    }

    #[test]
    fn large_k_sorts_everything_with_id_ties() {
        let got = basis3().top_k(&[0.0, 0.5, 0.0], 10).unwrap();
        let ids: Vec<u32> = got.iter().map(|c| c.property_id).collect();
        assert_eq!(ids, vec![1, 0, 2]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            basis3().top_k(&[1.0, 0.0], 1),
            Err(MipsError::DimensionMismatch { expected: 3, found: 2 })
        );
        assert_eq!(basis3().top_k(&[1.0, 0.0, 0.0], 0), Err(MipsError::ZeroK));
        assert_eq!(PropertyIndex::from_rows(2, vec![], vec![]), Err(MipsError::EmptyIndex));
    }

    #[test]
    fn single_row_index() {
        let idx = PropertyIndex::from_rows(2, vec![0.5, -1.0], vec![0]).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.top_k(&[1.0, 1.0], 50).unwrap().len(), 1);
    }
}
