//! Recurring preferences learned from imperative statements.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::adapters::PreferenceStatement;
use crate::error::{MemoryError, Result};
use crate::substrate::{MemoryId, Record, RecordKind, StoreState, Table};

/// Distinct sessions needed before a pattern becomes a fixed point.
pub const FIXED_POINT_SUPPORT: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProceduralPattern {
    pub id: MemoryId,
    /// `domain.attribute`, e.g. `code.language`.
    pub key: String,
    pub value: String,
    /// Representative phrasing (the lexicographically smallest seen, so the
    /// result does not depend on observation order).
    pub statement: String,
    pub sessions: BTreeSet<String>,
    pub support: u32,
    pub contradictions: u32,
    pub fixed_point: bool,
}

impl ProceduralPattern {
    pub fn domain(&self) -> &str {
        self.key.split('.').next().unwrap_or(&self.key)
    }

    fn refresh(&mut self) {
        self.support = self.sessions.len() as u32;
        self.fixed_point = self.support >= FIXED_POINT_SUPPORT && self.contradictions == 0;
    }
}

impl Record for ProceduralPattern {
    const KIND: RecordKind = RecordKind::Procedural;
    const FILE: &'static str = "procedural.jsonl";

    fn id(&self) -> MemoryId {
        self.id
    }

    fn set_id(&mut self, id: MemoryId) {
        self.id = id;
    }

    fn validate(&self) -> Result<()> {
        if self.support as usize != self.sessions.len() {
            return Err(MemoryError::invariant("support", "must equal the number of sessions"));
        }
        if self.fixed_point != (self.support >= FIXED_POINT_SUPPORT && self.contradictions == 0) {
            return Err(MemoryError::invariant("fixed_point", "inconsistent with support and contradictions"));
        }
        if !self.key.contains('.') {
            return Err(MemoryError::invariant("key", "expected `domain.attribute`"));
        }
        Ok(())
    }

    fn index_key(&self) -> Option<String> {
        Some(self.key.clone())
    }

    fn table(state: &StoreState) -> &Table<Self> {
        &state.procedural
    }

    fn table_mut(state: &mut StoreState) -> &mut Table<Self> {
        &mut state.procedural
    }
}

/// Folds the preference statements of one session into the pattern store.
/// Agreeing statements add the session as support; a differing value counts
/// as a contradiction and clears the fixed point.
pub fn observe_statement(
    state: &mut StoreState,
    session_id: &str,
    statements: &[PreferenceStatement],
) -> Result<Vec<MemoryId>> {
    state.ensure_writable()?;
    let mut touched = Vec::new();
    for p in statements {
        let key = p.key();
        let existing = state.procedural.by_key(&key).next().map(|r| r.id);
        let id = match existing {
            Some(id) => {
                state.update::<ProceduralPattern, _>(id, |r| {
                    if r.value == p.value {
                        r.sessions.insert(session_id.to_string());
                        if p.statement < r.statement {
                            r.statement = p.statement.clone();
                        }
                    } else {
                        r.contradictions += 1;
                    }
                    r.refresh();
                })?;
                id
            }
            None => {
                let mut r = ProceduralPattern {
                    id: MemoryId::unassigned(RecordKind::Procedural),
                    key,
                    value: p.value.clone(),
                    statement: p.statement.clone(),
                    sessions: BTreeSet::from([session_id.to_string()]),
                    support: 0,
                    contradictions: 0,
                    fixed_point: false,
                };
                r.refresh();
                state.put_record(r)?
            }
        };
        touched.push(id);
    }
    Ok(touched)
}

/// Fixed-point patterns, highest support first, then by key.
pub fn fixed_point_patterns(state: &StoreState) -> Vec<&ProceduralPattern> {
    let mut out: Vec<&ProceduralPattern> = state.procedural.iter().filter(|p| p.fixed_point).collect();
    out.sort_by(|a, b| b.support.cmp(&a.support).then(a.key.cmp(&b.key)));
    out
}

/// Constraint statements of fixed-point patterns whose domain is in `tags`.
pub fn apply_patterns(state: &StoreState, tags: &BTreeSet<String>) -> Vec<String> {
    fixed_point_patterns(state)
        .into_iter()
        .filter(|p| tags.contains(p.domain()))
        .map(|p| p.statement.clone())
        .collect()
}

/// Evicts non-fixed, least supported patterns until the store fits its cap.
pub fn enforce_capacity(state: &mut StoreState) -> Result<Vec<MemoryId>> {
    state.ensure_writable()?;
    let excess = state.procedural.len().saturating_sub(state.config.cap_basal_ganglia);
    if excess == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<(bool, u32, MemoryId)> =
        state.procedural.iter().map(|p| (p.fixed_point, p.support, p.id)).collect();
    order.sort();
    let evicted: Vec<MemoryId> = order.iter().take(excess).map(|x| x.2).collect();
    for &id in &evicted {
        state.remove::<ProceduralPattern>(id)?;
    }
    Ok(evicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;

    fn pref(attr: &str, value: &str, statement: &str) -> PreferenceStatement {
        PreferenceStatement {
            domain: "code".into(),
            attribute: attr.into(),
            value: value.into(),
            statement: statement.into(),
        }
    }

    #[test]
    fn support_and_contradiction() {
        let mut s = StoreState::new(EngineConfig::default()).unwrap();
        let ts = pref("language", "typescript", "Always use TypeScript, never plain JavaScript");
        let id = observe_statement(&mut s, "S1", std::slice::from_ref(&ts)).unwrap()[0];
        let p = s.get::<ProceduralPattern>(id).unwrap();
        assert_eq!((p.key.as_str(), p.support, p.fixed_point), ("code.language", 1, false));
        assert!(fixed_point_patterns(&s).is_empty());

        observe_statement(&mut s, "S1", std::slice::from_ref(&ts)).unwrap();
        assert_eq!(s.get::<ProceduralPattern>(id).unwrap().support, 1);
        observe_statement(&mut s, "S2", &[ts]).unwrap();
        let p = s.get::<ProceduralPattern>(id).unwrap();
        assert_eq!((p.support, p.fixed_point), (2, true));
        let code = BTreeSet::from(["code".to_string()]);
        assert_eq!(apply_patterns(&s, &code).len(), 1);
        assert!(apply_patterns(&s, &BTreeSet::from(["cooking".to_string()])).is_empty());

        observe_statement(&mut s, "S3", &[pref("language", "javascript", "Use plain JavaScript")]).unwrap();
        let p = s.get::<ProceduralPattern>(id).unwrap();
        assert_eq!((p.contradictions, p.fixed_point), (1, false));
        assert!(apply_patterns(&s, &code).is_empty());
    }
}
