use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{RankedList, Source};
use crate::error::{MemoryError, Result};
use crate::substrate::MemoryId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedResult {
    pub candidate: MemoryId,
    /// 1-based rank per source the candidate appeared in.
    pub per_source_ranks: BTreeMap<Source, usize>,
    pub fused_score: f64,
}

impl FusedResult {
    pub fn best_rank(&self) -> usize {
        self.per_source_ranks.values().copied().min().unwrap_or(usize::MAX)
    }
}

/// Weighted reciprocal rank fusion.
///
/// Contributions are summed in source order (lexical, dense, graph,
/// temporal) so the floating-point result does not depend on the order of
/// `lists`. Ties are broken by best per-source rank, then by id.
pub fn fuse_rrf(lists: &[RankedList], weights: &BTreeMap<Source, f64>, k: f64) -> Result<Vec<FusedResult>> {
    if !(k.is_finite() && k > 0.0) {
        return Err(MemoryError::BadK(k));
    }
    if let Some((s, w)) = weights.iter().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
        return Err(MemoryError::BadWeights(format!("weight {w} for {s}")));
    }
    let mut by_source: BTreeMap<Source, &RankedList> = BTreeMap::new();
    for list in lists {
        if by_source.insert(list.source(), list).is_some() {
            return Err(MemoryError::DuplicateSource(list.source().as_str()));
        }
    }
    let mut acc: HashMap<MemoryId, FusedResult> = HashMap::new();
    for (source, list) in by_source {
        let w = *weights
            .get(&source)
            .ok_or_else(|| MemoryError::BadWeights(format!("no weight for {source}")))?;
        for (i, (id, _)) in list.entries().iter().enumerate() {
            let rank = i + 1;
            let entry = acc.entry(*id).or_insert_with(|| FusedResult {
                candidate: *id,
                per_source_ranks: BTreeMap::new(),
                fused_score: 0.0,
            });
            entry.per_source_ranks.insert(source, rank);
            entry.fused_score += w / (k + rank as f64);
        }
    }
    let mut out: Vec<FusedResult> = acc.into_values().collect();
    out.sort_by(|a, b| {
        b.fused_score
            .total_cmp(&a.fused_score)
            .then(a.best_rank().cmp(&b.best_rank()))
            .then(a.candidate.cmp(&b.candidate))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::RecordKind;

    fn id(n: u64) -> MemoryId {
        MemoryId::new(RecordKind::Episodic, n)
    }

    fn uniform() -> BTreeMap<Source, f64> {
        Source::ALL.into_iter().map(|s| (s, 1.0)).collect()
    }

    #[test]
    fn hand_values() {
        let lex = RankedList::from_order(Source::Lexical, vec![id(1)]).unwrap();
        let out = fuse_rrf(std::slice::from_ref(&lex), &uniform(), 60.0).unwrap();
        assert!((out[0].fused_score - 1.0 / 61.0).abs() < 1e-12);

        let dense = RankedList::from_order(Source::Dense, vec![id(5), id(6), id(1)]).unwrap();
        let out = fuse_rrf(&[lex, dense], &uniform(), 60.0).unwrap();
        assert_eq!(out[0].candidate, id(1));
        assert!((out[0].fused_score - (1.0 / 61.0 + 1.0 / 63.0)).abs() < 1e-12);
        assert_eq!(out[0].per_source_ranks[&Source::Dense], 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let l = RankedList::from_order(Source::Lexical, vec![id(1)]).unwrap();
        assert!(matches!(fuse_rrf(&[], &uniform(), 0.0), Err(MemoryError::BadK(_))));
        assert!(matches!(fuse_rrf(&[], &uniform(), f64::INFINITY), Err(MemoryError::BadK(_))));
        assert!(matches!(fuse_rrf(&[l.clone(), l.clone()], &uniform(), 60.0), Err(MemoryError::DuplicateSource(_))));
        let mut w = uniform();
        w.insert(Source::Lexical, -1.0);
        assert!(matches!(fuse_rrf(std::slice::from_ref(&l), &w, 60.0), Err(MemoryError::BadWeights(_))));
        assert!(matches!(fuse_rrf(&[l], &BTreeMap::new(), 60.0), Err(MemoryError::BadWeights(_))));
    }

    #[test]
    fn single_source_keeps_order() {
        let order = vec![id(9), id(3), id(7), id(1)];
        let l = RankedList::from_order(Source::Graph, order.clone()).unwrap();
        let mut w = BTreeMap::new();
        w.insert(Source::Graph, 2.5);
        let got: Vec<MemoryId> = fuse_rrf(&[l], &w, 60.0).unwrap().iter().map(|f| f.candidate).collect();
        assert_eq!(got, order);
    }
}
