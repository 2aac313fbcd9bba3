//! Per-entity timelines and the temporal queries answered from them.
//!
//! Events match a pattern by bag-of-terms overlap between the pattern and the
//! event description (see [`text::terms`]). Within an entity, `seq` follows
//! `(at, insertion)` order and is renumbered when an earlier event arrives
//! late, so it always agrees with `at` where the two are comparable.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{MemoryError, Result};
use crate::hippocampus::EpisodicTrace;
use crate::prefrontal::QueryProfile;
use crate::retrieval::{RankedList, Source};
use crate::substrate::{MemoryId, Record, RecordKind, StoreState, Table};
use crate::text;
use crate::time::{Granularity, TemporalRelation, Timestamp};

/// Minimum temporal score for the temporal ranker to run.
pub const TEMPORAL_GATE: f64 = 0.3;
/// Score bonus of an event that resolves a hedged departure.
pub const RESOLUTION_BONUS: f64 = 0.5;

/// `(at.sort_key(), seq)`.
type OrderKey = ((bool, i64, u8), u64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub id: MemoryId,
    pub entity: String,
    pub description: String,
    pub at: Timestamp,
    pub trace_ref: MemoryId,
    pub seq: u64,
    #[serde(skip)]
    terms: TermCache,
}

/// Lazily computed description terms. Not part of the record's identity.
#[derive(Debug, Clone, Default)]
struct TermCache(OnceLock<BTreeSet<String>>);

impl PartialEq for TermCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl TimelineEvent {
    fn terms(&self) -> &BTreeSet<String> {
        self.terms.0.get_or_init(|| text::term_set(&self.description))
    }

    fn order_key(&self) -> OrderKey {
        (self.at.sort_key(), self.seq)
    }
}

impl Record for TimelineEvent {
    const KIND: RecordKind = RecordKind::Timeline;
    const FILE: &'static str = "timeline.jsonl";

    fn id(&self) -> MemoryId {
        self.id
    }

    fn set_id(&mut self, id: MemoryId) {
        self.id = id;
    }

    fn validate(&self) -> Result<()> {
        if self.entity.trim().is_empty() {
            return Err(MemoryError::invariant("entity", "entity is blank"));
        }
        if self.description.trim().is_empty() {
            return Err(MemoryError::invariant("description", "description is blank"));
        }
        if self.trace_ref.kind() != RecordKind::Episodic {
            return Err(MemoryError::invariant("trace_ref", "must reference an episodic trace"));
        }
        Ok(())
    }

    fn index_key(&self) -> Option<String> {
        Some(self.entity.clone())
    }

    fn table(state: &StoreState) -> &Table<Self> {
        &state.timeline
    }

    fn table_mut(state: &mut StoreState) -> &mut Table<Self> {
        &mut state.timeline
    }
}

/// Adds one event per entity of `trace`. Already indexed `(trace, entity)`
/// pairs are skipped. Returns the ids of new events.
pub fn index_event(state: &mut StoreState, trace: &EpisodicTrace) -> Result<Vec<MemoryId>> {
    state.ensure_writable()?;
    let key = trace.event_time.sort_key();
    let mut created = Vec::new();
    for entity in &trace.entities {
        // One pass: skip duplicates, count earlier events, check seq density.
        let (mut count, mut max_seq, mut before, mut duplicate) = (0u64, None, 0u64, false);
        for e in state.timeline.by_key(entity) {
            duplicate |= e.trace_ref == trace.id;
            count += 1;
            max_seq = max_seq.max(Some(e.seq));
            if e.at.sort_key() <= key {
                before += 1;
            }
        }
        if duplicate {
            continue;
        }
        let dense = max_seq.map_or(0, |m| m + 1) == count;
        if dense {
            state.timeline.for_each_keyed_mut(entity, |e| {
                if e.seq >= before {
                    e.seq += 1;
                }
            });
        }
        let id = state.put_record(TimelineEvent {
            id: MemoryId::unassigned(RecordKind::Timeline),
            entity: entity.clone(),
            description: trace.content.clone(),
            at: trace.event_time,
            trace_ref: trace.id,
            seq: if dense { before } else { u64::MAX },
            terms: TermCache::default(),
        })?;
        if !dense {
            renumber(state, entity)?;
        }
        created.push(id);
    }
    Ok(created)
}

fn renumber(state: &mut StoreState, entity: &str) -> Result<()> {
    let mut events: Vec<(OrderKey, MemoryId)> =
        state.timeline.by_key(entity).map(|e| (e.order_key(), e.id)).collect();
    events.sort();
    for (seq, (key, id)) in events.into_iter().enumerate() {
        let seq = seq as u64;
        if key.1 != seq && !state.timeline.update_unkeyed(id, |e| e.seq = seq) {
            return Err(MemoryError::UnknownId(id));
        }
    }
    Ok(())
}

/// Removes every event pointing at `trace`.
pub(crate) fn unindex_trace(state: &mut StoreState, trace: MemoryId) -> Result<()> {
    let ids: Vec<MemoryId> = state.timeline.iter().filter(|e| e.trace_ref == trace).map(|e| e.id).collect();
    for id in ids {
        state.remove::<TimelineEvent>(id)?;
    }
    Ok(())
}

/// Events of one entity in `seq` order.
pub fn timeline<'a>(state: &'a StoreState, entity: &str) -> Vec<&'a TimelineEvent> {
    let mut events: Vec<&TimelineEvent> = state.timeline.by_key(&text::normalize_entity(entity)).collect();
    events.sort_by_key(|e| e.seq);
    events
}

/// Best match for `pattern` on `entity`'s timeline: most shared terms, then
/// latest `at`, then highest `seq`. `None` when no event shares a term.
pub fn query_when<'a>(state: &'a StoreState, entity: &str, pattern: &str) -> Option<(Timestamp, &'a TimelineEvent)> {
    let terms = text::term_set(pattern);
    timeline(state, entity)
        .into_iter()
        .map(|e| (text::overlap(&terms, e.terms()), e))
        .filter(|(n, _)| *n > 0)
        .max_by(|(na, a), (nb, b)| na.cmp(nb).then(a.order_key().cmp(&b.order_key())))
        .map(|(_, e)| (e.at, e))
}

/// An `(entity, pattern)` reference to a timeline event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRef {
    pub entity: String,
    pub pattern: String,
}

impl EventRef {
    pub fn new(entity: &str, pattern: &str) -> Self {
        EventRef {
            entity: entity.into(),
            pattern: pattern.into(),
        }
    }

    fn resolve(&self, state: &StoreState) -> Option<Timestamp> {
        query_when(state, &self.entity, &self.pattern).map(|(t, _)| t)
    }
}

pub fn query_order(state: &StoreState, a: &EventRef, b: &EventRef) -> TemporalRelation {
    match (a.resolve(state), b.resolve(state)) {
        (Some(x), Some(y)) => x.relation(&y),
        _ => TemporalRelation::Unknown,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationAnswer {
    pub days: f64,
    /// Coarser granularity of the two endpoints; callers may hedge on it.
    pub granularity: Granularity,
}

/// Days between the two events' midpoints; `None` when either side is
/// unresolved or has an unknown timestamp.
pub fn query_duration(state: &StoreState, a: &EventRef, b: &EventRef) -> Option<DurationAnswer> {
    let (x, y) = (a.resolve(state)?, b.resolve(state)?);
    Some(DurationAnswer {
        days: x.days_between(&y)?,
        granularity: x.granularity().coarser(y.granularity()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    First,
    Last,
}

/// Earliest or latest event by `(at, seq)`, optionally restricted to events
/// sharing a term with `pattern`.
pub fn query_extremum<'a>(
    state: &'a StoreState,
    entity: &str,
    which: Extremum,
    pattern: Option<&str>,
) -> Option<&'a TimelineEvent> {
    let terms = pattern.map(text::term_set);
    let events = timeline(state, entity).into_iter().filter(|e| match &terms {
        Some(t) => text::overlap(t, e.terms()) > 0,
        None => true,
    });
    match which {
        Extremum::First => events.min_by_key(|e| e.order_key()),
        Extremum::Last => events.max_by_key(|e| e.order_key()),
    }
}

/// One answer to a "when" question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalAnswer {
    pub entity: String,
    pub at: Timestamp,
    pub description: String,
    pub trace_ref: MemoryId,
    /// Set when the answer was inferred from a later event that resolves a
    /// tentative statement (the id is the tentative event's trace).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_from: Option<MemoryId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalRanking {
    pub list: RankedList,
    pub answers: Vec<TemporalAnswer>,
}

const HEDGE_WORDS: &[&str] = &[
    "thinking", "considering", "planning", "maybe", "might", "perhaps", "possibly", "hoping",
    "wondering", "unsure",
];
const DEPARTURE_WORDS: &[&str] = &["leave", "quit", "resign", "depart"];
const ONSET_WORDS: &[&str] = &["accept", "start", "join", "begin", "began", "sign"];

fn stems(words: &[&str]) -> BTreeSet<String> {
    words.iter().map(|w| text::stem(w)).collect()
}

fn is_hedged(e: &TimelineEvent) -> bool {
    text::tokenize(&e.description).iter().any(|t| HEDGE_WORDS.contains(&t.as_str()))
}

/// Timeline entities whose every token occurs in `query`.
pub fn entities_mentioned(state: &StoreState, query: &str) -> BTreeSet<String> {
    let tokens: BTreeSet<String> = text::tokenize(query).into_iter().collect();
    state
        .timeline
        .keys()
        .filter(|k| k.split(' ').all(|t| tokens.contains(t)))
        .cloned()
        .collect()
}

/// Later, non-tentative onset event on another entity that settles a
/// tentative departure from `hedged`'s entity.
fn resolve_departure<'a>(state: &'a StoreState, hedged: &TimelineEvent) -> Option<&'a TimelineEvent> {
    let onset = stems(ONSET_WORDS);
    state
        .timeline
        .iter()
        .filter(|e| e.entity != hedged.entity && e.trace_ref != hedged.trace_ref)
        .filter(|e| e.at.relation(&hedged.at) == TemporalRelation::After)
        .filter(|e| !is_hedged(e) && e.terms().iter().any(|t| onset.contains(t)))
        .min_by(|a, b| a.at.sort_key().cmp(&b.at.sort_key()).then(a.id.cmp(&b.id)))
}

fn answer(e: &TimelineEvent, resolved_from: Option<MemoryId>) -> TemporalAnswer {
    TemporalAnswer {
        entity: e.entity.clone(),
        at: e.at,
        description: e.description.clone(),
        trace_ref: e.trace_ref,
        resolved_from,
    }
}

/// Temporal ranker: timeline events matching the query's entities and terms,
/// scored by term overlap and mapped to their traces.
///
/// When the best match is a tentative departure ("thinking of leaving X"),
/// the earliest later commitment elsewhere ("accepted the offer from Y") is
/// promoted with a bonus and reported as the first answer.
pub fn rank_temporal(state: &StoreState, query: &str, profile: &QueryProfile, k_top: usize) -> TemporalRanking {
    let empty = TemporalRanking {
        list: RankedList::empty(Source::Temporal),
        answers: Vec::new(),
    };
    if profile.temporal < TEMPORAL_GATE {
        return empty;
    }
    let terms = text::term_set(query);
    let mentioned = entities_mentioned(state, query);
    let pool: Vec<&TimelineEvent> = if mentioned.is_empty() {
        state.timeline.iter().collect()
    } else {
        mentioned.iter().flat_map(|e| state.timeline.by_key(e)).collect()
    };
    let matched: Vec<(f64, &TimelineEvent)> = pool
        .into_iter()
        .map(|e| (text::overlap(&terms, e.terms()) as f64, e))
        .filter(|(s, _)| *s > 0.0)
        .collect();
    let Some(&(best_score, best)) = matched.iter().max_by(|(sa, a), (sb, b)| {
        sa.total_cmp(sb)
            .then(a.at.sort_key().cmp(&b.at.sort_key()))
            .then(b.id.cmp(&a.id))
    }) else {
        return empty;
    };

    let mut scores: HashMap<MemoryId, f64> = HashMap::new();
    for (s, e) in &matched {
        let slot = scores.entry(e.trace_ref).or_insert(0.0);
        *slot = slot.max(*s);
    }
    let mut answers = Vec::new();
    let departure = stems(DEPARTURE_WORDS);
    if is_hedged(best) && terms.iter().any(|t| departure.contains(t)) {
        if let Some(r) = resolve_departure(state, best) {
            let slot = scores.entry(r.trace_ref).or_insert(0.0);
            *slot = slot.max(best_score + RESOLUTION_BONUS);
            answers.push(answer(r, Some(best.trace_ref)));
        }
    }
    answers.push(answer(best, None));

    let mut entries: Vec<(MemoryId, f64)> = scores.into_iter().collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.truncate(k_top);
    TemporalRanking {
        list: RankedList::new(Source::Temporal, entries).expect("sorted unique entries"),
        answers,
    }
}
