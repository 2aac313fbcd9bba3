use std::collections::{BTreeSet, HashMap};

use super::{top_k, RankedList, Source};
use crate::hippocampus::EpisodicTrace;
use crate::semantic::SemanticFact;
use crate::substrate::{MemoryId, StoreState};
use crate::text;

/// Knowledge-graph ranker: live facts whose subject or object is one of
/// `entities`, scored `confidence · (1 + shared terms between the query and
/// the fact's predicate and object)`, credited to their provenance traces.
pub fn rank_graph(
    state: &StoreState,
    entities: &BTreeSet<String>,
    query_terms: &BTreeSet<String>,
    k_top: usize,
) -> RankedList {
    let mut best: HashMap<MemoryId, f64> = HashMap::new();
    for fact in state.semantic.iter().filter(|f: &&SemanticFact| f.is_live()) {
        if !entities.contains(&fact.subject) && !entities.contains(&fact.object) {
            continue;
        }
        let fact_terms = text::term_set(&format!("{} {}", fact.predicate, fact.object));
        let score = fact.confidence * (1.0 + text::overlap(query_terms, &fact_terms) as f64);
        for &trace in &fact.provenance {
            match state.get::<EpisodicTrace>(trace) {
                Some(t) if !t.raw => {}
                _ => continue,
            }
            let slot = best.entry(trace).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(score);
        }
    }
    RankedList::new(Source::Graph, top_k(best.into_iter().collect(), k_top)).expect("top_k output is sorted and unique")
}
