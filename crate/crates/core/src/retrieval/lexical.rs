use std::collections::{BTreeSet, HashMap};

use super::{top_k, RankedList, Source};
use crate::substrate::MemoryId;
use crate::text;

#[derive(Debug, Clone, Default)]
struct Doc {
    len: usize,
    tf: HashMap<String, u32>,
}

/// Okapi BM25 over normalized terms, with an inverted index.
///
/// `idf(t) = ln(1 + (N − df + 0.5) / (df + 0.5))`; each distinct query term
/// counts once.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    k1: f64,
    b: f64,
    docs: HashMap<MemoryId, Doc>,
    postings: HashMap<String, BTreeSet<MemoryId>>,
    total_len: usize,
}

impl Bm25Index {
    pub fn new(k1: f64, b: f64) -> Self {
        Bm25Index {
            k1,
            b,
            docs: HashMap::new(),
            postings: HashMap::new(),
            total_len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Indexes `content` under `id`, replacing any earlier version.
    pub fn insert(&mut self, id: MemoryId, content: &str) {
        self.remove(id);
        let terms = text::terms(content);
        let mut doc = Doc {
            len: terms.len(),
            tf: HashMap::new(),
        };
        for t in terms {
            *doc.tf.entry(t).or_insert(0) += 1;
        }
        for t in doc.tf.keys() {
            self.postings.entry(t.clone()).or_default().insert(id);
        }
        self.total_len += doc.len;
        self.docs.insert(id, doc);
    }

    pub fn remove(&mut self, id: MemoryId) {
        let Some(doc) = self.docs.remove(&id) else { return };
        self.total_len -= doc.len;
        for t in doc.tf.keys() {
            if let Some(p) = self.postings.get_mut(t) {
                p.remove(&id);
                if p.is_empty() {
                    self.postings.remove(t);
                }
            }
        }
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.docs.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 score of every document sharing a term with `query`.
    pub fn scores(&self, query: &str) -> Vec<(MemoryId, f64)> {
        if self.docs.is_empty() {
            return Vec::new();
        }
        let avgdl = self.total_len as f64 / self.docs.len() as f64;
        let qterms: BTreeSet<String> = text::terms(query).into_iter().collect();
        let mut acc: HashMap<MemoryId, f64> = HashMap::new();
        for t in &qterms {
            let Some(posting) = self.postings.get(t) else { continue };
            let idf = self.idf(posting.len());
            for id in posting {
                let doc = &self.docs[id];
                let tf = doc.tf[t] as f64;
                let norm = if avgdl > 0.0 { doc.len as f64 / avgdl } else { 0.0 };
                let s = idf * tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * norm));
                *acc.entry(*id).or_insert(0.0) += s;
            }
        }
        acc.into_iter().collect()
    }

    pub fn search(&self, query: &str, k_top: usize) -> RankedList {
        RankedList::new(Source::Lexical, top_k(self.scores(query), k_top)).expect("top_k output is sorted and unique")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::RecordKind;

    fn id(n: u64) -> MemoryId {
        MemoryId::new(RecordKind::Episodic, n)
    }

    #[test]
    fn single_document() {
        let mut ix = Bm25Index::new(1.2, 0.75);
        ix.insert(id(0), "quantum gardening tips");
        let r = ix.search("quantum gardening tips", 10);
        assert_eq!(r.ids().collect::<Vec<_>>(), vec![id(0)]);
        assert!(ix.search("volcano", 10).is_empty());
    }

    #[test]
    fn remove_and_reinsert() {
        let mut ix = Bm25Index::new(1.2, 0.75);
        ix.insert(id(0), "apple pie");
        ix.insert(id(1), "apple tart");
        ix.remove(id(0));
        assert_eq!(ix.search("pie", 10).len(), 0);
        assert_eq!(ix.search("apple", 10).len(), 1);
        ix.insert(id(1), "cherry");
        assert_eq!(ix.search("apple", 10).len(), 0);
        assert_eq!(ix.len(), 1);
    }
}
