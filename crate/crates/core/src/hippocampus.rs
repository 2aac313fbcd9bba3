//! Episodic traces, key-value addressing, reconsolidation on access, and
//! capacity pruning.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::adapters::{ExtractionResult, TemporalExpression};
use crate::amygdala::SalienceRecord;
use crate::error::{MemoryError, Result};
use crate::prefrontal;
use crate::storyarc::TimelineEvent;
use crate::substrate::{MemoryId, Record, RecordKind, StoreState, Table};
use crate::text;
use crate::time::{TemporalRelation, Timestamp};

/// Characters kept in a working-memory summary.
pub const WM_SUMMARY_CHARS: usize = 120;

/// One conversation turn, the line format read by `soulmem ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub session_id: String,
    pub turn: u32,
    pub speaker: String,
    pub text: String,
    pub timestamp: Timestamp,
    /// Explicit user feedback in `[0, 1]`, if the log carries one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<f64>,
}

impl ConversationTurn {
    pub fn new(session_id: &str, turn: u32, speaker: &str, text: &str, timestamp: Timestamp) -> Self {
        ConversationTurn {
            session_id: session_id.into(),
            turn,
            speaker: speaker.into(),
            text: text.into(),
            timestamp,
            feedback: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodicTrace {
    pub id: MemoryId,
    pub content: String,
    /// When the described event happened: the first resolved temporal
    /// expression, else the ingest time.
    pub event_time: Timestamp,
    pub ingest_time: Timestamp,
    pub session_id: String,
    pub speaker: String,
    pub turn: u32,
    pub entities: BTreeSet<String>,
    pub temporal_expressions: Vec<TemporalExpression>,
    pub salience: f64,
    pub access_count: u64,
    pub stability: f64,
    pub consolidated: bool,
    /// Stored for audit only (hippocampus disabled): never addressed,
    /// indexed or consolidated.
    pub raw: bool,
}

impl EpisodicTrace {
    /// A trace with no extracted structure.
    pub fn raw(session_id: &str, speaker: &str, content: &str, at: Timestamp, stability: f64) -> Self {
        EpisodicTrace {
            id: MemoryId::unassigned(RecordKind::Episodic),
            content: content.to_string(),
            event_time: at,
            ingest_time: at,
            session_id: session_id.to_string(),
            speaker: speaker.to_string(),
            turn: 0,
            entities: BTreeSet::new(),
            temporal_expressions: Vec::new(),
            salience: 0.0,
            access_count: 0,
            stability,
            consolidated: false,
            raw: false,
        }
    }

    /// Builds the trace for `turn` from its extraction result.
    pub fn from_turn(turn: &ConversationTurn, analysis: &ExtractionResult, stability: f64) -> Self {
        let event_time = analysis
            .temporal_expressions
            .iter()
            .map(|t| t.resolved)
            .find(Timestamp::is_known)
            .unwrap_or(turn.timestamp);
        EpisodicTrace {
            entities: analysis.entities.clone(),
            temporal_expressions: analysis.temporal_expressions.clone(),
            event_time,
            turn: turn.turn,
            ..EpisodicTrace::raw(&turn.session_id, &turn.speaker, turn.text.trim(), turn.timestamp, stability)
        }
    }

    pub fn summary(&self) -> String {
        text::truncate_chars(&self.content, WM_SUMMARY_CHARS)
    }
}

fn check_unit(field: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(MemoryError::invariant(field, format!("{v} is outside [0, 1]")))
    }
}

impl Record for EpisodicTrace {
    const KIND: RecordKind = RecordKind::Episodic;
    const FILE: &'static str = "episodic.jsonl";

    fn id(&self) -> MemoryId {
        self.id
    }

    fn set_id(&mut self, id: MemoryId) {
        self.id = id;
    }

    fn validate(&self) -> Result<()> {
        check_unit("salience", self.salience)?;
        check_unit("stability", self.stability)?;
        if self.content.trim().is_empty() {
            return Err(MemoryError::invariant("content", "content is blank"));
        }
        Ok(())
    }

    fn table(state: &StoreState) -> &Table<Self> {
        &state.episodic
    }

    fn table_mut(state: &mut StoreState) -> &mut Table<Self> {
        &mut state.episodic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmItem {
    pub summary: String,
    pub source_trace: MemoryId,
    pub inserted_at: Timestamp,
    pub salience: f64,
}

impl WmItem {
    pub fn validate(&self) -> Result<()> {
        check_unit("salience", self.salience)
    }
}

/// Stores a trace for `turn` and pushes its summary into working memory.
///
/// Salience is computed by the caller beforehand; timeline indexing and the
/// salience record are the orchestrator's job.
pub fn encode_episode(
    state: &mut StoreState,
    turn: &ConversationTurn,
    analysis: &ExtractionResult,
    salience: f64,
) -> Result<MemoryId> {
    let id = store_trace(state, turn, analysis, salience)?;
    let summary = state.episodic.get(id).map(EpisodicTrace::summary).unwrap_or_default();
    prefrontal::wm_push(
        state,
        WmItem {
            summary,
            source_trace: id,
            inserted_at: turn.timestamp,
            salience,
        },
    )?;
    Ok(id)
}

/// Stores a trace for `turn` without touching working memory.
pub fn store_trace(
    state: &mut StoreState,
    turn: &ConversationTurn,
    analysis: &ExtractionResult,
    salience: f64,
) -> Result<MemoryId> {
    state.ensure_writable()?;
    if turn.text.trim().is_empty() {
        return Err(MemoryError::EmptyContent);
    }
    let mut trace = EpisodicTrace::from_turn(turn, analysis, state.config.stability_initial);
    trace.salience = salience;
    state.put_record(trace)
}

/// Inclusive time window; either end may be open.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimeRange {
    pub start: Option<Timestamp>,
    pub end: Option<Timestamp>,
}

impl TimeRange {
    /// Whether `t` can be placed inside the window. Unknown times never match.
    pub fn contains(&self, t: &Timestamp) -> bool {
        if !t.is_known() {
            return false;
        }
        let after_start = self
            .start
            .is_none_or(|s| !matches!(t.relation(&s), TemporalRelation::Before | TemporalRelation::Unknown));
        let before_end = self
            .end
            .is_none_or(|e| !matches!(t.relation(&e), TemporalRelation::After | TemporalRelation::Unknown));
        after_start && before_end
    }
}

/// Conjunctive lookup keys. At least one must be set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AddressKeys {
    pub entities: Option<BTreeSet<String>>,
    pub session_id: Option<String>,
    pub time_range: Option<TimeRange>,
    pub text_terms: Option<BTreeSet<String>>,
}

impl AddressKeys {
    pub fn entities<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, entities: I) -> Self {
        let set = self.entities.get_or_insert_with(BTreeSet::new);
        set.extend(entities.into_iter().map(|e| text::normalize_entity(e.as_ref())));
        self
    }

    pub fn session(mut self, session_id: &str) -> Self {
        self.session_id = Some(session_id.to_string());
        self
    }

    pub fn time_range(mut self, start: Option<Timestamp>, end: Option<Timestamp>) -> Self {
        self.time_range = Some(TimeRange { start, end });
        self
    }

    pub fn text(mut self, query: &str) -> Self {
        let set = self.text_terms.get_or_insert_with(BTreeSet::new);
        set.extend(text::terms(query));
        self
    }

    fn is_empty(&self) -> bool {
        self.entities.is_none()
            && self.session_id.is_none()
            && self.time_range.is_none()
            && self.text_terms.is_none()
    }

    fn matches(&self, trace: &EpisodicTrace) -> bool {
        if trace.raw {
            return false;
        }
        if let Some(es) = &self.entities {
            if !es.is_subset(&trace.entities) {
                return false;
            }
        }
        if let Some(s) = &self.session_id {
            if &trace.session_id != s {
                return false;
            }
        }
        if let Some(r) = &self.time_range {
            if !r.contains(&trace.event_time) {
                return false;
            }
        }
        if let Some(terms) = &self.text_terms {
            if !terms.is_subset(&text::term_set(&trace.content)) {
                return false;
            }
        }
        true
    }
}

/// Traces matching every provided key, newest event first, then by id.
pub fn address<'a>(state: &'a StoreState, keys: &AddressKeys) -> Result<Vec<&'a EpisodicTrace>> {
    if keys.is_empty() {
        return Err(MemoryError::NoKeys);
    }
    let mut hits = state.scan::<EpisodicTrace>(|t| keys.matches(t));
    hits.sort_by(|a, b| b.event_time.sort_key().cmp(&a.event_time.sort_key()).then(a.id.cmp(&b.id)));
    Ok(hits)
}

/// Counts an access and raises stability by the configured step.
pub fn record_access(state: &mut StoreState, id: MemoryId) -> Result<EpisodicTrace> {
    state.ensure_writable()?;
    let step = state.config.stability_step;
    state.update::<EpisodicTrace, _>(id, |t| {
        t.access_count += 1;
        t.stability = (t.stability + step).min(1.0);
        t.clone()
    })
}

/// Retention score of every trace: `0.5·salience + 0.3·stability +
/// 0.2·recency`, recency being the trace's creation rank scaled to `[0, 1]`.
pub fn retention_scores(state: &StoreState) -> Vec<(MemoryId, f64)> {
    let n = state.episodic.len();
    state
        .episodic
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let recency = if n <= 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
            (t.id, 0.5 * t.salience + 0.3 * t.stability + 0.2 * recency)
        })
        .collect()
}

pub fn is_protected(state: &StoreState, trace: MemoryId) -> bool {
    state
        .salience
        .by_key(&trace.to_string())
        .any(|r: &SalienceRecord| r.protected)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneOutcome {
    pub pruned: Vec<MemoryId>,
    /// Protected traces pruned because nothing else was left to prune.
    pub forced_protected: Vec<MemoryId>,
}

/// Prunes lowest-retention traces until the episodic store fits its cap.
/// Unprotected traces go first; protected ones only when none remain.
pub fn enforce_capacity(state: &mut StoreState) -> Result<PruneOutcome> {
    state.ensure_writable()?;
    let cap = state.config.cap_hippocampus;
    let excess = state.episodic.len().saturating_sub(cap);
    if excess == 0 {
        return Ok(PruneOutcome::default());
    }
    let mut scored: Vec<(bool, f64, MemoryId)> = retention_scores(state)
        .into_iter()
        .map(|(id, r)| (is_protected(state, id), r, id))
        .collect();
    scored.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut outcome = PruneOutcome::default();
    for &(protected, score, id) in scored.iter().take(excess) {
        if protected {
            log::warn!("pruning protected trace {id} (retention {score:.3}): no unprotected trace left");
            outcome.forced_protected.push(id);
        }
        outcome.pruned.push(id);
    }
    remove_traces(state, &outcome.pruned)?;
    Ok(outcome)
}

/// Removes traces together with the salience records, timeline events and
/// working-memory items that point at them.
pub(crate) fn remove_traces(state: &mut StoreState, ids: &[MemoryId]) -> Result<()> {
    let gone: HashSet<MemoryId> = ids.iter().copied().collect();
    for &id in ids {
        state.remove::<EpisodicTrace>(id)?;
        let sal: Vec<MemoryId> = state.salience.by_key(&id.to_string()).map(|r| r.id).collect();
        for s in sal {
            state.remove::<SalienceRecord>(s)?;
        }
    }
    let events: Vec<MemoryId> = state
        .timeline
        .iter()
        .filter(|e: &&TimelineEvent| gone.contains(&e.trace_ref))
        .map(|e| e.id)
        .collect();
    for e in events {
        state.remove::<TimelineEvent>(e)?;
    }
    state.working_memory.retain(|w| !gone.contains(&w.source_trace));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amygdala::{self, ProtectionReason};
    use crate::config::EngineConfig;

    fn store_with_cap(cap: usize) -> StoreState {
        StoreState::new(EngineConfig {
            cap_hippocampus: cap,
            ..EngineConfig::default()
        })
        .unwrap()
    }

    fn analysis(entities: &[&str]) -> ExtractionResult {
        ExtractionResult {
            entities: entities.iter().map(|e| e.to_string()).collect(),
            ..ExtractionResult::default()
        }
    }

    fn turn(session: &str, text: &str, ts: Timestamp) -> ConversationTurn {
        ConversationTurn::new(session, 1, "user", text, ts)
    }

    #[test]
    fn degenerate_turn_uses_ingest_time() {
        let mut s = store_with_cap(10);
        let ts = Timestamp::day(2023, 3, 2);
        let id = encode_episode(&mut s, &turn("S1", "hmm ok", ts), &analysis(&[]), 0.2).unwrap();
        let t = s.get::<EpisodicTrace>(id).unwrap();
        assert!(t.entities.is_empty());
        assert!(t.temporal_expressions.is_empty());
        assert_eq!(t.event_time, t.ingest_time);
    }

    #[test]
    fn blank_turn_is_rejected() {
        let mut s = store_with_cap(10);
        let r = encode_episode(&mut s, &turn("S1", "  ", Timestamp::year(2023)), &analysis(&[]), 0.0);
        assert!(matches!(r, Err(MemoryError::EmptyContent)));
    }

    #[test]
    fn eleven_encodes_keep_last_ten_in_working_memory() {
        let mut s = store_with_cap(100);
        for i in 0..11 {
            encode_episode(&mut s, &turn("S1", &format!("turn {i}"), Timestamp::year(2023)), &analysis(&[]), 0.4)
                .unwrap();
        }
        let seqs: Vec<u64> = s.working_memory().iter().map(|w| w.source_trace.seq()).collect();
        assert_eq!(seqs, (1..11).collect::<Vec<_>>());
    }

    #[test]
    fn address_is_conjunctive_and_ordered() {
        let mut s = store_with_cap(100);
        let a = encode_episode(&mut s, &turn("S1", "at google", Timestamp::month(2023, 1)), &analysis(&["google"]), 0.1)
            .unwrap();
        let b = encode_episode(&mut s, &turn("S5", "leaving google", Timestamp::month(2023, 3)), &analysis(&["google"]), 0.1)
            .unwrap();
        encode_episode(&mut s, &turn("S8", "offer", Timestamp::month(2023, 6)), &analysis(&["techstartup"]), 0.1).unwrap();

        let ids = |keys: AddressKeys| -> Vec<MemoryId> {
            address(&s, &keys).unwrap().iter().map(|t| t.id).collect()
        };
        assert_eq!(ids(AddressKeys::default().entities(["Google"])), vec![b, a]);
        assert_eq!(ids(AddressKeys::default().entities(["Google"]).session("S1")), vec![a]);
        assert!(ids(AddressKeys::default().time_range(Some(Timestamp::year(2024)), None)).is_empty());
        assert!(matches!(address(&s, &AddressKeys::default()), Err(MemoryError::NoKeys)));
    }

    #[test]
    fn access_raises_stability_with_clamp() {
        let mut s = store_with_cap(10);
        let id = s.put_record(EpisodicTrace::raw("S1", "user", "x", Timestamp::year(2023), 0.5)).unwrap();
        let t = record_access(&mut s, id).unwrap();
        assert_eq!(t.access_count, 1);
        assert!((t.stability - 0.6).abs() < 1e-12);

        let id = s.put_record(EpisodicTrace::raw("S1", "user", "y", Timestamp::year(2023), 0.95)).unwrap();
        assert_eq!(record_access(&mut s, id).unwrap().stability, 1.0);
        assert_eq!(record_access(&mut s, id).unwrap().stability, 1.0);

        s.freeze();
        assert!(matches!(record_access(&mut s, id), Err(MemoryError::FrozenState)));
        let missing = MemoryId::new(RecordKind::Episodic, 999);
        let mut s = store_with_cap(10);
        assert!(matches!(record_access(&mut s, missing), Err(MemoryError::UnknownId(_))));
    }

    fn put(s: &mut StoreState, salience: f64, stability: f64) -> MemoryId {
        let mut t = EpisodicTrace::raw("S1", "user", "x", Timestamp::year(2023), stability);
        t.salience = salience;
        s.put_record(t).unwrap()
    }

    #[test]
    fn prunes_minimum_retention_unprotected() {
        let mut s = store_with_cap(3);
        let ids = [put(&mut s, 0.9, 0.5), put(&mut s, 0.1, 0.5), put(&mut s, 0.6, 0.5), put(&mut s, 0.5, 0.5)];
        // Oracle: recency ranks 0, 1/3, 2/3, 1.
        let scores: Vec<f64> = [(0.9, 0.0), (0.1, 1.0 / 3.0), (0.6, 2.0 / 3.0), (0.5, 1.0)]
            .iter()
            .map(|(sal, rec)| 0.5 * sal + 0.3 * 0.5 + 0.2 * rec)
            .collect();
        let min = (0..4).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        let out = enforce_capacity(&mut s).unwrap();
        assert_eq!(out.pruned, vec![ids[min]]);
        assert!(out.forced_protected.is_empty());
        assert_eq!(s.len::<EpisodicTrace>(), 3);
    }

    #[test]
    fn all_protected_forces_lowest() {
        let mut s = store_with_cap(2);
        let ids = [put(&mut s, 0.9, 0.5), put(&mut s, 0.2, 0.5), put(&mut s, 0.8, 0.5)];
        for &id in &ids {
            let rec = amygdala::score(id, 0.0, 0.0, 1.0);
            s.put_record(rec).unwrap();
            amygdala::tag_protection(&mut s, id, ProtectionReason::Identity).unwrap();
        }
        let out = enforce_capacity(&mut s).unwrap();
        assert_eq!(out.pruned, vec![ids[1]]);
        assert_eq!(out.forced_protected, vec![ids[1]]);
        assert_eq!(s.len::<SalienceRecord>(), 2);
    }

    #[test]
    fn under_cap_is_noop() {
        let mut s = store_with_cap(5);
        put(&mut s, 0.1, 0.1);
        assert_eq!(enforce_capacity(&mut s).unwrap(), PruneOutcome::default());
    }
}
