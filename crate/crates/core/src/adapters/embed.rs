use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::Embedder;
use crate::error::{MemoryError, Result};
use crate::text;

/// Unit-norm dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values`; `None` for the zero vector.
    pub fn from_raw(values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(EmbeddingVector(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum()
}

/// Signed feature hashing over normalized terms.
///
/// Each term adds ±1 to the bucket `fnv1a(term) % dim`, the sign taken from
/// bit 32 of the same hash. The result is a bag of terms, so word order does
/// not matter, and texts whose terms land in disjoint buckets are orthogonal.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder { dim }
    }

    /// Bucket and sign a term hashes to.
    pub fn slot(&self, term: &str) -> (usize, f64) {
        let h = fnv(term);
        let sign = if (h >> 32) & 1 == 1 { -1.0 } else { 1.0 };
        ((h % self.dim as u64) as usize, sign)
    }
}

fn fnv(s: &str) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(s.as_bytes());
    hasher.finish()
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, input: &str) -> Result<EmbeddingVector> {
        let mut tokens = text::terms(input);
        if tokens.is_empty() {
            tokens = text::tokenize(input);
        }
        if tokens.is_empty() {
            return Err(MemoryError::EmptyText);
        }
        let mut values = vec![0.0; self.dim];
        for t in &tokens {
            let (bucket, sign) = self.slot(t);
            values[bucket] += sign;
        }
        if let Some(v) = EmbeddingVector::from_raw(values) {
            return Ok(v);
        }
        // Every term cancelled out; fall back to the joined token string.
        let mut values = vec![0.0; self.dim];
        let (bucket, sign) = self.slot(&tokens.join(" "));
        values[bucket] = sign;
        Ok(EmbeddingVector::from_raw(values).expect("one nonzero entry"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashEmbedder::new(64);
        let a = e.embed("abc").unwrap();
        assert_eq!(a, e.embed("abc").unwrap());
        let norm: f64 = a.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-9);
        assert_eq!(a.dim(), 64);
    }

    #[test]
    fn bag_of_tokens() {
        let e = HashEmbedder::new(64);
        assert_eq!(e.embed("a b").unwrap(), e.embed("b a").unwrap());
        assert_eq!(e.embed("green apple").unwrap(), e.embed("apple green").unwrap());
    }

    #[test]
    fn disjoint_buckets_are_orthogonal() {
        let e = HashEmbedder::new(64);
        let words = ["apple", "river", "quartz", "violin", "meadow", "glacier", "lantern"];
        let (b0, _) = e.slot(&text::stem(words[0]));
        let other = words[1..]
            .iter()
            .find(|w| e.slot(&text::stem(w)).0 != b0)
            .expect("some word hashes elsewhere");
        let sim = cosine(&e.embed(words[0]).unwrap(), &e.embed(other).unwrap());
        assert!(sim.abs() <= 1e-9, "similarity {sim}");
    }

    #[test]
    fn identical_text_has_similarity_one() {
        let e = HashEmbedder::new(64);
        let a = e.embed("I accepted the offer from TechStartup Inc.").unwrap();
        assert!((cosine(&a, &a) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn empty_text_is_rejected() {
        let e = HashEmbedder::new(8);
        assert!(matches!(e.embed(""), Err(MemoryError::EmptyText)));
        assert!(matches!(e.embed(" ?! "), Err(MemoryError::EmptyText)));
        assert!(e.embed("the").is_ok());
    }
}
