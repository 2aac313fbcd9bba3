//! Query classification, retrieval routing and the working-memory buffer.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hippocampus::WmItem;
use crate::retrieval::Source;
use crate::substrate::StoreState;
use crate::text;

/// Four-dimension query scores, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryProfile {
    pub temporal: f64,
    pub identity: f64,
    pub preference: f64,
    pub factual: f64,
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

impl QueryProfile {
    /// Builds a profile, clamping each value into `[0, 1]` (NaN becomes 0).
    pub fn new(temporal: f64, identity: f64, preference: f64, factual: f64) -> Self {
        QueryProfile {
            temporal: clamp_unit(temporal),
            identity: clamp_unit(identity),
            preference: clamp_unit(preference),
            factual: clamp_unit(factual),
        }
    }

    pub fn max_dimension(&self) -> f64 {
        self.temporal.max(self.identity).max(self.preference).max(self.factual)
    }

    /// Factual strictly above every other dimension.
    pub fn factual_dominant(&self) -> bool {
        self.factual > self.temporal && self.factual > self.identity && self.factual > self.preference
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalPlan {
    pub weights: BTreeMap<Source, f64>,
    pub max_rounds: u32,
    pub fast_path: bool,
}

impl RetrievalPlan {
    pub fn sources(&self) -> impl Iterator<Item = Source> + '_ {
        self.weights.keys().copied()
    }

    pub fn weight(&self, source: Source) -> f64 {
        self.weights.get(&source).copied().unwrap_or(0.0)
    }
}

/// Weights below this are dropped from the plan.
pub const MIN_SOURCE_WEIGHT: f64 = 0.05;

/// Base weight 1 per source plus additive boosts from the profile.
pub fn route(profile: &QueryProfile) -> RetrievalPlan {
    let raw = [
        (Source::Lexical, 1.0 + profile.factual),
        (Source::Dense, 1.0 + profile.factual),
        (Source::Graph, 1.0 + profile.identity + profile.preference),
        (Source::Temporal, 1.0 + profile.temporal),
    ];
    let weights = raw
        .into_iter()
        .filter(|(_, w)| *w >= MIN_SOURCE_WEIGHT)
        .collect();
    RetrievalPlan {
        weights,
        max_rounds: if profile.max_dimension() < 0.5 { 2 } else { 1 },
        fast_path: profile.factual_dominant() && profile.temporal <= 0.5,
    }
}

/// What happened to the buffer on a push.
#[derive(Debug, Clone, PartialEq)]
pub enum WmOutcome {
    Appended,
    Evicted(WmItem),
    /// The incoming item was dropped because every resident is high-salience.
    Dropped,
}

/// Salience at or above which a resident survives a low-salience newcomer.
pub const WM_PROTECT_SALIENCE: f64 = 0.8;
/// Newcomers below this salience may not displace protected residents.
pub const WM_LOW_SALIENCE: f64 = 0.1;

pub(crate) fn push_bounded(buffer: &mut VecDeque<WmItem>, cap: usize, item: WmItem) -> WmOutcome {
    if buffer.len() < cap {
        buffer.push_back(item);
        return WmOutcome::Appended;
    }
    let victim = if item.salience < WM_LOW_SALIENCE {
        buffer.iter().position(|r| r.salience < WM_PROTECT_SALIENCE)
    } else {
        Some(0)
    };
    match victim {
        Some(i) => {
            let evicted = buffer.remove(i).expect("index in range");
            buffer.push_back(item);
            WmOutcome::Evicted(evicted)
        }
        None => WmOutcome::Dropped,
    }
}

/// FIFO push with the salience override.
pub fn wm_push(state: &mut StoreState, item: WmItem) -> Result<WmOutcome> {
    state.ensure_writable()?;
    item.validate()?;
    let cap = state.config.cap_working_memory;
    Ok(push_bounded(&mut state.working_memory, cap, item))
}

pub fn wm_snapshot(state: &StoreState) -> Vec<WmItem> {
    state.working_memory.iter().cloned().collect()
}

/// Most recent working-memory item sharing at least two terms with `query`,
/// when the profile allows a fast path.
pub fn fast_path_check<'a>(
    state: &'a StoreState,
    query: &str,
    profile: &QueryProfile,
) -> Option<&'a WmItem> {
    if !profile.factual_dominant() || profile.temporal > 0.5 {
        return None;
    }
    let q = text::term_set(query);
    state
        .working_memory
        .iter()
        .rev()
        .find(|item| text::overlap(&q, &text::term_set(&item.summary)) >= 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;
    use crate::substrate::{MemoryId, RecordKind};
    use crate::time::Timestamp;

    fn item(n: u64, salience: f64) -> WmItem {
        WmItem {
            summary: format!("item {n}"),
            source_trace: MemoryId::new(RecordKind::Episodic, n),
            inserted_at: Timestamp::day(2024, 1, 1),
            salience,
        }
    }

    fn store() -> StoreState {
        StoreState::new(EngineConfig::default()).unwrap()
    }

    #[test]
    fn zero_profile_routes_uniformly_with_two_rounds() {
        let plan = route(&QueryProfile::default());
        assert_eq!(plan.weights.len(), 4);
        assert!(plan.weights.values().all(|w| *w == 1.0));
        assert_eq!(plan.max_rounds, 2);
    }

    #[test]
    fn temporal_profile_boosts_temporal_source() {
        let plan = route(&QueryProfile::new(1.0, 0.0, 0.0, 0.0));
        assert_eq!(plan.weight(Source::Temporal), 2.0);
        assert_eq!(plan.weight(Source::Lexical), 1.0);
        assert_eq!(plan.weight(Source::Graph), 1.0);
        assert_eq!(plan.max_rounds, 1);
        assert!(!plan.fast_path);
    }

    #[test]
    fn fifo_eviction() {
        let mut s = store();
        for n in 0..11 {
            wm_push(&mut s, item(n, 0.4)).unwrap();
        }
        let seqs: Vec<u64> = wm_snapshot(&s).iter().map(|i| i.source_trace.seq()).collect();
        assert_eq!(seqs, (1..11).collect::<Vec<_>>());
        assert_eq!(wm_snapshot(&s), wm_snapshot(&s));
    }

    #[test]
    fn low_salience_newcomer_spares_high_salience_oldest() {
        let mut s = store();
        wm_push(&mut s, item(0, 0.9)).unwrap();
        for n in 1..10 {
            wm_push(&mut s, item(n, 0.3)).unwrap();
        }
        let out = wm_push(&mut s, item(10, 0.05)).unwrap();
        assert_eq!(out, WmOutcome::Evicted(item(1, 0.3)));
        let seqs: Vec<u64> = wm_snapshot(&s).iter().map(|i| i.source_trace.seq()).collect();
        assert_eq!(seqs[0], 0);
        assert_eq!(s.working_memory().len(), 10);
    }

    #[test]
    fn all_protected_drops_newcomer() {
        let mut buf = VecDeque::new();
        for n in 0..3 {
            push_bounded(&mut buf, 3, item(n, 0.95));
        }
        assert_eq!(push_bounded(&mut buf, 3, item(9, 0.01)), WmOutcome::Dropped);
        assert_eq!(buf.len(), 3);
    }

    #[test]
    fn frozen_push_fails() {
        let mut s = store();
        s.freeze();
        assert!(wm_push(&mut s, item(0, 0.5)).is_err());
    }

    #[test]
    fn fast_path_rules() {
        let mut s = store();
        let factual = QueryProfile::new(0.0, 0.0, 0.0, 0.9);
        assert!(fast_path_check(&s, "knowledge graph storage", &factual).is_none());
        let mut it = item(0, 0.5);
        it.summary = "Knowledge graph storage uses triples".into();
        wm_push(&mut s, it).unwrap();
        assert!(fast_path_check(&s, "What is knowledge graph storage?", &factual).is_some());
        let temporal = QueryProfile::new(0.9, 0.0, 0.0, 0.95);
        assert!(fast_path_check(&s, "What is knowledge graph storage?", &temporal).is_none());
    }
}
