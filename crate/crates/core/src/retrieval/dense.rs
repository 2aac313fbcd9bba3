use std::collections::BTreeMap;

use super::{top_k, RankedList, Source};
use crate::adapters::{cosine, EmbeddingVector};
use crate::substrate::MemoryId;

/// Exact nearest-neighbour search by full scan.
#[derive(Debug, Clone, Default)]
pub struct DenseIndex {
    vectors: BTreeMap<MemoryId, EmbeddingVector>,
}

impl DenseIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: MemoryId, v: EmbeddingVector) {
        self.vectors.insert(id, v);
    }

    pub fn remove(&mut self, id: MemoryId) {
        self.vectors.remove(&id);
    }

    pub fn get(&self, id: MemoryId) -> Option<&EmbeddingVector> {
        self.vectors.get(&id)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Vectors in id order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&MemoryId, &EmbeddingVector)> + '_ {
        self.vectors.iter()
    }

    /// Cosine similarity to every stored vector.
    pub fn similarities(&self, query: &EmbeddingVector) -> Vec<(MemoryId, f64)> {
        self.vectors.iter().map(|(id, v)| (*id, cosine(query, v))).collect()
    }

    pub fn search(&self, query: &EmbeddingVector, k_top: usize) -> RankedList {
        RankedList::new(Source::Dense, top_k(self.similarities(query), k_top)).expect("top_k output is sorted and unique")
    }
}
