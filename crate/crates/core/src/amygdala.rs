//! Salience scoring and protection tags.

use serde::{Deserialize, Serialize};

use crate::adapters::{cosine, EmbeddingVector};
use crate::error::{MemoryError, Result};
use crate::substrate::{MemoryId, Record, RecordKind, StoreState, Table};

pub const NOVELTY_WEIGHT: f64 = 0.4;
pub const CONFLICT_WEIGHT: f64 = 0.4;
pub const FEEDBACK_WEIGHT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtectionReason {
    HighSalience,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalienceRecord {
    pub id: MemoryId,
    pub trace_ref: MemoryId,
    pub novelty: f64,
    pub conflict: f64,
    pub feedback: f64,
    pub aggregate: f64,
    pub protected: bool,
    pub reason: Option<ProtectionReason>,
}

/// `0.4·novelty + 0.4·conflict + 0.2·feedback`, clamped to `[0, 1]`.
pub fn aggregate(novelty: f64, conflict: f64, feedback: f64) -> f64 {
    (NOVELTY_WEIGHT * novelty + CONFLICT_WEIGHT * conflict + FEEDBACK_WEIGHT * feedback).clamp(0.0, 1.0)
}

/// One minus the best cosine similarity against `context`; 1 when empty.
pub fn novelty<'a>(trace: &EmbeddingVector, context: impl IntoIterator<Item = &'a EmbeddingVector>) -> f64 {
    let best = context
        .into_iter()
        .map(|c| cosine(trace, c))
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        1.0
    } else {
        (1.0 - best).clamp(0.0, 1.0)
    }
}

/// Unstored salience record for `trace_ref`. Inputs are clamped to `[0, 1]`.
pub fn score(trace_ref: MemoryId, novelty: f64, conflict: f64, feedback: f64) -> SalienceRecord {
    let unit = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let (n, c, f) = (unit(novelty), unit(conflict), unit(feedback));
    SalienceRecord {
        id: MemoryId::unassigned(RecordKind::Salience),
        trace_ref,
        novelty: n,
        conflict: c,
        feedback: f,
        aggregate: aggregate(n, c, f),
        protected: false,
        reason: None,
    }
}

impl Record for SalienceRecord {
    const KIND: RecordKind = RecordKind::Salience;
    const FILE: &'static str = "salience.jsonl";

    fn id(&self) -> MemoryId {
        self.id
    }

    fn set_id(&mut self, id: MemoryId) {
        self.id = id;
    }

    fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("novelty", self.novelty),
            ("conflict", self.conflict),
            ("feedback", self.feedback),
            ("aggregate", self.aggregate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MemoryError::invariant(field, format!("{v} is outside [0, 1]")));
            }
        }
        if (self.aggregate - aggregate(self.novelty, self.conflict, self.feedback)).abs() > 1e-12 {
            return Err(MemoryError::invariant("aggregate", "does not match its components"));
        }
        if self.protected != self.reason.is_some() {
            return Err(MemoryError::invariant("protected", "protection needs exactly one reason"));
        }
        if self.trace_ref.kind() != RecordKind::Episodic {
            return Err(MemoryError::invariant("trace_ref", "must reference an episodic trace"));
        }
        Ok(())
    }

    fn index_key(&self) -> Option<String> {
        Some(self.trace_ref.to_string())
    }

    fn table(state: &StoreState) -> &Table<Self> {
        &state.salience
    }

    fn table_mut(state: &mut StoreState) -> &mut Table<Self> {
        &mut state.salience
    }
}

pub fn record_for(state: &StoreState, trace_ref: MemoryId) -> Option<&SalienceRecord> {
    state.salience.by_key(&trace_ref.to_string()).next()
}

/// Marks the record for `trace_ref` protected. A `HighSalience` reason is
/// only accepted at or above the configured threshold. Re-tagging keeps the
/// first reason.
pub fn tag_protection(
    state: &mut StoreState,
    trace_ref: MemoryId,
    reason: ProtectionReason,
) -> Result<SalienceRecord> {
    state.ensure_writable()?;
    let rec = record_for(state, trace_ref).ok_or(MemoryError::UnknownRef(trace_ref))?;
    let threshold = state.config.protection_threshold;
    if reason == ProtectionReason::HighSalience && rec.aggregate < threshold {
        return Err(MemoryError::invariant(
            "protected",
            format!("aggregate {} is below the protection threshold {threshold}", rec.aggregate),
        ));
    }
    let id = rec.id;
    state.update::<SalienceRecord, _>(id, |r| {
        if !r.protected {
            r.protected = true;
            r.reason = Some(reason);
        }
        r.clone()
    })
}

/// The `n` highest aggregates, newer records first among ties.
pub fn top_salient(state: &StoreState, n: usize) -> Vec<&SalienceRecord> {
    let mut all: Vec<&SalienceRecord> = state.salience.iter().collect();
    all.sort_by(|a, b| b.aggregate.total_cmp(&a.aggregate).then(b.id.cmp(&a.id)));
    all.truncate(n);
    all
}

/// Evicts lowest-aggregate records (unprotected first, oldest first among
/// ties) until the store fits its cap.
pub fn enforce_capacity(state: &mut StoreState) -> Result<Vec<MemoryId>> {
    state.ensure_writable()?;
    let excess = state.salience.len().saturating_sub(state.config.cap_amygdala);
    if excess == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<(bool, f64, MemoryId)> =
        state.salience.iter().map(|r| (r.protected, r.aggregate, r.id)).collect();
    order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let evicted: Vec<MemoryId> = order.iter().take(excess).map(|x| x.2).collect();
    for &id in &evicted {
        state.remove::<SalienceRecord>(id)?;
    }
    Ok(evicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{Embedder, HashEmbedder};
    use crate::config::EngineConfig;

    fn trace_id(n: u64) -> MemoryId {
        MemoryId::new(RecordKind::Episodic, n)
    }

    #[test]
    fn duplicate_has_zero_novelty() {
        let e = HashEmbedder::new(64);
        let v = e.embed("I love hiking in the Alps").unwrap();
        let n = novelty(&v, [&v]);
        assert!(n.abs() < 1e-12);
        assert_eq!(score(trace_id(0), n, 0.0, 0.0).aggregate, 0.0);
    }

    #[test]
    fn first_trace_is_fully_novel() {
        let e = HashEmbedder::new(64);
        let v = e.embed("anything").unwrap();
        let n = novelty(&v, []);
        assert_eq!(n, 1.0);
        assert!((score(trace_id(0), n, 0.0, 0.0).aggregate - 0.4).abs() < 1e-12);
    }

    #[test]
    fn milestone_example() {
        let r = score(trace_id(0), 0.9, 0.0, 1.0);
        assert!((r.aggregate - (0.4 * 0.9 + 0.2 * 1.0)).abs() < 1e-12);
        assert!((r.aggregate - 0.56).abs() < 1e-12);
    }

    #[test]
    fn tagging() {
        let mut s = StoreState::new(EngineConfig::default()).unwrap();
        assert!(matches!(
            tag_protection(&mut s, trace_id(5), ProtectionReason::Identity),
            Err(MemoryError::UnknownRef(_))
        ));
        s.put_record(score(trace_id(5), 0.9, 0.0, 1.0)).unwrap();
        assert!(tag_protection(&mut s, trace_id(5), ProtectionReason::HighSalience).is_err());
        let a = tag_protection(&mut s, trace_id(5), ProtectionReason::Identity).unwrap();
        let b = tag_protection(&mut s, trace_id(5), ProtectionReason::Identity).unwrap();
        assert_eq!(a, b);
        assert!(a.protected);
    }

    #[test]
    fn top_salient_and_cap() {
        let mut s = StoreState::new(EngineConfig {
            cap_amygdala: 2,
            ..EngineConfig::default()
        })
        .unwrap();
        assert!(top_salient(&s, 3).is_empty());
        s.put_record(score(trace_id(0), 0.5, 0.0, 0.0)).unwrap();
        s.put_record(score(trace_id(1), 1.0, 1.0, 1.0)).unwrap();
        s.put_record(score(trace_id(2), 0.5, 0.0, 0.0)).unwrap();
        let top: Vec<MemoryId> = top_salient(&s, 10).iter().map(|r| r.trace_ref).collect();
        assert_eq!(top, vec![trace_id(1), trace_id(2), trace_id(0)]);
        let evicted = enforce_capacity(&mut s).unwrap();
        assert_eq!(evicted.len(), 1);
        assert!(record_for(&s, trace_id(0)).is_none());
    }
}
