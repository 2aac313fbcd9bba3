//! Confidence-weighted facts with moving-average revision and supersession.

use serde::{Deserialize, Serialize};

use crate::error::{MemoryError, Result};
use crate::substrate::{MemoryId, Record, RecordKind, StoreState, Table};
use crate::text;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticFact {
    pub id: MemoryId,
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub confidence: f64,
    pub provenance: Vec<MemoryId>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
    pub superseded_by: Option<MemoryId>,
}

impl SemanticFact {
    pub fn is_live(&self) -> bool {
        self.superseded_by.is_none()
    }
}

fn pair_key(subject: &str, predicate: &str) -> String {
    format!("{subject}\u{1f}{predicate}")
}

impl Record for SemanticFact {
    const KIND: RecordKind = RecordKind::Semantic;
    const FILE: &'static str = "semantic.jsonl";

    fn id(&self) -> MemoryId {
        self.id
    }

    fn set_id(&mut self, id: MemoryId) {
        self.id = id;
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(MemoryError::invariant("confidence", format!("{} is outside [0, 1]", self.confidence)));
        }
        if self.provenance.is_empty() {
            return Err(MemoryError::invariant("provenance", "provenance is empty"));
        }
        for (field, v) in [("subject", &self.subject), ("predicate", &self.predicate), ("object", &self.object)] {
            if v.trim().is_empty() {
                return Err(MemoryError::invariant(field, "blank"));
            }
        }
        if self.superseded_by == Some(self.id) {
            return Err(MemoryError::invariant("superseded_by", "a fact cannot supersede itself"));
        }
        Ok(())
    }

    fn index_key(&self) -> Option<String> {
        Some(pair_key(&self.subject, &self.predicate))
    }

    fn table(state: &StoreState) -> &Table<Self> {
        &state.semantic
    }

    fn table_mut(state: &mut StoreState) -> &mut Table<Self> {
        &mut state.semantic
    }
}

/// Normalized `(subject, predicate, object)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Triple {
            subject: text::normalize_entity(subject),
            predicate: text::normalize_entity(predicate),
            object: text::normalize_entity(object),
        }
    }
}

/// `(1 − λ)·p + λ·p̂`.
pub fn ema(p: f64, evidence: f64, lambda: f64) -> f64 {
    ((1.0 - lambda) * p + lambda * evidence).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Upsert {
    pub id: MemoryId,
    pub created: bool,
}

/// Inserts the triple, or revises the confidence of its live copy.
pub fn upsert_fact(
    state: &mut StoreState,
    triple: &Triple,
    evidence: f64,
    provenance: MemoryId,
    at: Timestamp,
) -> Result<Upsert> {
    state.ensure_writable()?;
    if !(0.0..=1.0).contains(&evidence) {
        return Err(MemoryError::BadConfidence(evidence));
    }
    let existing = state
        .semantic
        .by_key(&pair_key(&triple.subject, &triple.predicate))
        .find(|f| f.is_live() && f.object == triple.object)
        .map(|f| f.id);
    match existing {
        Some(id) => {
            let lambda = state.config.ema_lambda;
            state.update::<SemanticFact, _>(id, |f| {
                f.confidence = ema(f.confidence, evidence, lambda);
                if !f.provenance.contains(&provenance) {
                    f.provenance.push(provenance);
                }
                f.updated_at = at;
            })?;
            Ok(Upsert { id, created: false })
        }
        None => {
            let id = state.put_record(SemanticFact {
                id: MemoryId::unassigned(RecordKind::Semantic),
                subject: triple.subject.clone(),
                predicate: triple.predicate.clone(),
                object: triple.object.clone(),
                confidence: evidence,
                provenance: vec![provenance],
                created_at: at,
                updated_at: at,
                superseded_by: None,
            })?;
            Ok(Upsert { id, created: true })
        }
    }
}

/// Facts matching the given subject and predicate, most confident first,
/// then most recently updated, then oldest id.
pub fn query_facts<'a>(
    state: &'a StoreState,
    subject: Option<&str>,
    predicate: Option<&str>,
    include_superseded: bool,
) -> Vec<&'a SemanticFact> {
    let subject = subject.map(text::normalize_entity);
    let predicate = predicate.map(text::normalize_entity);
    let mut out: Vec<&SemanticFact> = state
        .semantic
        .iter()
        .filter(|f| include_superseded || f.is_live())
        .filter(|f| subject.as_ref().is_none_or(|s| &f.subject == s))
        .filter(|f| predicate.as_ref().is_none_or(|p| &f.predicate == p))
        .collect();
    out.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.updated_at.sort_key().cmp(&a.updated_at.sort_key()))
            .then(a.id.cmp(&b.id))
    });
    out
}

/// Live facts sharing subject and predicate with `triple` but not its object.
pub fn detect_conflicts<'a>(state: &'a StoreState, triple: &Triple) -> Vec<&'a SemanticFact> {
    state
        .semantic
        .by_key(&pair_key(&triple.subject, &triple.predicate))
        .filter(|f| f.is_live() && f.object != triple.object)
        .collect()
}

/// Points `old` at `new`. `new` must be live, so chains stay acyclic;
/// superseding an already superseded fact moves its pointer.
pub fn supersede(state: &mut StoreState, old: MemoryId, new: MemoryId) -> Result<()> {
    state.ensure_writable()?;
    let o = state.get::<SemanticFact>(old).ok_or(MemoryError::UnknownId(old))?;
    let n = state.get::<SemanticFact>(new).ok_or(MemoryError::UnknownId(new))?;
    if o.subject != n.subject || o.predicate != n.predicate {
        return Err(MemoryError::PredicateMismatch {
            old_subject: o.subject.clone(),
            old_predicate: o.predicate.clone(),
            new_subject: n.subject.clone(),
            new_predicate: n.predicate.clone(),
        });
    }
    if !n.is_live() {
        return Err(MemoryError::NotLive(new));
    }
    if old == new {
        return Err(MemoryError::invariant("superseded_by", "a fact cannot supersede itself"));
    }
    state.update::<SemanticFact, _>(old, |f| f.superseded_by = Some(new))
}

/// Chain of facts from `id` following `superseded_by` pointers.
pub fn lineage(state: &StoreState, id: MemoryId) -> Vec<MemoryId> {
    let mut out = vec![id];
    let mut cur = id;
    while let Some(next) = state.get::<SemanticFact>(cur).and_then(|f| f.superseded_by) {
        if out.contains(&next) {
            break;
        }
        out.push(next);
        cur = next;
    }
    out
}

/// Evicts superseded facts first, then the least confident live ones. A
/// pointer to an evicted successor is kept, so its source stays superseded.
pub fn enforce_capacity(state: &mut StoreState) -> Result<Vec<MemoryId>> {
    state.ensure_writable()?;
    let excess = state.semantic.len().saturating_sub(state.config.cap_temporal_lobe);
    if excess == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<(bool, f64, MemoryId)> =
        state.semantic.iter().map(|f| (f.is_live(), f.confidence, f.id)).collect();
    order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let evicted: Vec<MemoryId> = order.iter().take(excess).map(|x| x.2).collect();
    for &id in &evicted {
        state.remove::<SemanticFact>(id)?;
    }
    Ok(evicted)
}
