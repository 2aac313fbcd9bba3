//! Offline cycles: select episodic traces worth keeping, turn their triples
//! into semantic facts, and forget stale ones.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::Region;
use crate::engine::Engine;
use crate::error::{MemoryError, Result};
use crate::hippocampus::{self, EpisodicTrace};
use crate::semantic::{self, Triple};
use crate::storyarc;
use crate::substrate::MemoryId;
use crate::time::TemporalRelation;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConsolidationReport {
    pub selected: Vec<MemoryId>,
    pub facts_created: Vec<MemoryId>,
    pub facts_updated: Vec<MemoryId>,
    /// `(old, new)` supersession edges added this cycle.
    pub superseded: Vec<(MemoryId, MemoryId)>,
    pub pruned: Vec<MemoryId>,
    pub cycle_time: Duration,
}

impl Engine {
    /// Unconsolidated traces accessed often enough or salient enough,
    /// most salient first.
    pub fn select_candidates(&self) -> Vec<MemoryId> {
        let cfg = self.config();
        let mut out: Vec<&EpisodicTrace> = self
            .state
            .episodic
            .iter()
            .filter(|t| !t.raw && !t.consolidated)
            .filter(|t| t.access_count >= u64::from(cfg.consolidate_min_access) || t.salience >= cfg.consolidate_min_salience)
            .collect();
        out.sort_by(|a, b| b.salience.total_cmp(&a.salience).then(a.id.cmp(&b.id)));
        out.into_iter().map(|t| t.id).collect()
    }

    /// Upserts the triples of each trace into the semantic store and marks
    /// the trace consolidated. Traces are processed in event-time order so a
    /// later statement supersedes an earlier one regardless of selection
    /// order.
    pub fn consolidate(&mut self, ids: &[MemoryId]) -> Result<ConsolidationReport> {
        self.state.ensure_writable()?;
        let mut report = ConsolidationReport::default();
        if !self.enabled(Region::TemporalLobe) {
            return Ok(report);
        }
        let mut traces: Vec<EpisodicTrace> = Vec::with_capacity(ids.len());
        for &id in ids {
            let t = self.state.get::<EpisodicTrace>(id).ok_or(MemoryError::UnknownId(id))?;
            if !t.raw && !t.consolidated {
                traces.push(t.clone());
            }
        }
        traces.sort_by(|a, b| a.event_time.sort_key().cmp(&b.event_time.sort_key()).then(a.id.cmp(&b.id)));

        for trace in traces {
            let analysis = self.extractor.extract(&trace.content, &trace.speaker, trace.ingest_time)?;
            for t in &analysis.triples {
                let triple = Triple::new(&t.subject, &t.predicate, &t.object);
                let up = semantic::upsert_fact(&mut self.state, &triple, t.confidence, trace.id, trace.event_time)?;
                if up.created {
                    report.facts_created.push(up.id);
                } else if !report.facts_updated.contains(&up.id) {
                    report.facts_updated.push(up.id);
                }
                let rivals: Vec<(MemoryId, TemporalRelation)> = semantic::detect_conflicts(&self.state, &triple)
                    .into_iter()
                    .filter(|f| f.id != up.id)
                    .map(|f| (f.id, trace.event_time.relation(&f.updated_at)))
                    .collect();
                for (rival, relation) in rivals {
                    let still_live = |s: &crate::substrate::StoreState, id| {
                        s.get::<semantic::SemanticFact>(id).is_some_and(|f| f.is_live())
                    };
                    match relation {
                        TemporalRelation::After if still_live(&self.state, up.id) => {
                            semantic::supersede(&mut self.state, rival, up.id)?;
                            report.superseded.push((rival, up.id));
                        }
                        TemporalRelation::Before if still_live(&self.state, rival) => {
                            semantic::supersede(&mut self.state, up.id, rival)?;
                            report.superseded.push((up.id, rival));
                        }
                        _ => {}
                    }
                }
            }
            self.state.update::<EpisodicTrace, _>(trace.id, |t| t.consolidated = true)?;
            report.selected.push(trace.id);
        }
        semantic::enforce_capacity(&mut self.state)?;
        Ok(report)
    }

    /// Capacity pruning plus the stale rule: unconsolidated, low-salience
    /// traces older than the horizon (relative to the newest ingest) go,
    /// unless protected or referenced from working memory.
    pub fn forget(&mut self) -> Result<Vec<MemoryId>> {
        self.state.ensure_writable()?;
        let mut pruned = self.enforce_capacity()?;
        let cfg = self.config().clone();
        let now = self
            .state
            .episodic
            .iter()
            .map(|t| t.ingest_time)
            .filter(|t| t.is_known())
            .max_by_key(|t| t.sort_key());
        let Some(now) = now else {
            return Ok(pruned);
        };
        let in_wm: HashSet<MemoryId> = self.state.working_memory.iter().map(|w| w.source_trace).collect();
        let stale: Vec<MemoryId> = self
            .state
            .episodic
            .iter()
            .filter(|t| !t.consolidated && t.salience < cfg.stale_salience)
            .filter(|t| !in_wm.contains(&t.id) && !hippocampus::is_protected(&self.state, t.id))
            .filter(|t| {
                t.ingest_time
                    .days_between(&now)
                    .is_some_and(|d| d > cfg.stale_horizon_days as f64)
            })
            .map(|t| t.id)
            .collect();
        if !stale.is_empty() {
            hippocampus::remove_traces(&mut self.state, &stale)?;
            self.unindex_traces(&stale);
            pruned.extend(stale);
        }
        Ok(pruned)
    }

    /// One select → consolidate → forget pass.
    pub fn run_cycle(&mut self) -> Result<ConsolidationReport> {
        self.state.ensure_writable()?;
        let start = Instant::now();
        let selected = self.select_candidates();
        let mut report = self.consolidate(&selected)?;
        report.pruned = self.forget()?;
        report.cycle_time = start.elapsed();
        log::debug!(
            "cycle: {} selected, {} created, {} updated, {} pruned",
            report.selected.len(),
            report.facts_created.len(),
            report.facts_updated.len(),
            report.pruned.len()
        );
        Ok(report)
    }

    /// Re-access of a trace. With a patch, the content is replaced and the
    /// trace re-extracted, re-indexed, and queued for consolidation again.
    pub fn reconsolidate(&mut self, id: MemoryId, patch: Option<&str>) -> Result<EpisodicTrace> {
        self.state.ensure_writable()?;
        if self.state.get::<EpisodicTrace>(id).is_none() {
            return Err(MemoryError::UnknownId(id));
        }
        if patch.is_some_and(|p| p.trim().is_empty()) {
            return Err(MemoryError::EmptyContent);
        }
        let mut trace = hippocampus::record_access(&mut self.state, id)?;
        let Some(patch) = patch else {
            return Ok(trace);
        };
        let content = patch.trim();
        let analysis = self.extractor.extract(content, &trace.speaker, trace.ingest_time)?;
        let event_time = analysis
            .temporal_expressions
            .iter()
            .map(|t| t.resolved)
            .find(|t| t.is_known())
            .unwrap_or(trace.ingest_time);
        trace = self.state.update::<EpisodicTrace, _>(id, |t| {
            t.content = content.to_string();
            t.entities = analysis.entities.clone();
            t.temporal_expressions = analysis.temporal_expressions.clone();
            t.event_time = event_time;
            t.consolidated = false;
            t.clone()
        })?;
        storyarc::unindex_trace(&mut self.state, id)?;
        if !trace.raw {
            storyarc::index_event(&mut self.state, &trace)?;
            self.index_trace(id, content)?;
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;
    use crate::hippocampus::ConversationTurn;
    use crate::semantic::query_facts;

    fn turn(session: &str, text: &str, ts: &str) -> ConversationTurn {
        ConversationTurn::new(session, 1, "user", text, ts.parse().unwrap())
    }

    #[test]
    fn diet_revision_chain() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.ingest(&turn("S2", "I'm vegetarian for health reasons.", "2023-02")).unwrap();
        e.run_cycle().unwrap();
        e.ingest(&turn("S15", "I've started eating fish occasionally, pescatarian now.", "2023-06")).unwrap();
        e.run_cycle().unwrap();
        e.ingest(&turn("S28", "I'm back to being fully vegetarian.", "2023-11")).unwrap();
        e.run_cycle().unwrap();
        let live = query_facts(e.state(), Some("user"), Some("diet"), false);
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].object, "vegetarian");
        assert_eq!(query_facts(e.state(), Some("user"), Some("diet"), true).len(), 3);
    }

    #[test]
    fn second_cycle_is_a_no_op() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.ingest(&turn("S1", "I work at Google.", "2023-01")).unwrap();
        e.run_cycle().unwrap();
        let d = e.state_digest();
        let r = e.run_cycle().unwrap();
        assert!(r.selected.is_empty() && r.pruned.is_empty());
        assert_eq!(e.state_digest(), d);
    }

    #[test]
    fn stale_traces_are_forgotten() {
        let mut e = Engine::new(EngineConfig {
            cap_working_memory: 1,
            disabled_regions: [Region::Amygdala].into(),
            ..EngineConfig::default()
        })
        .unwrap();
        let old = e.ingest(&turn("S1", "ok then", "2023-01-01")).unwrap().trace.unwrap();
        let recent = e.ingest(&turn("S1", "sure thing", "2023-08-01")).unwrap().trace.unwrap();
        let in_wm = e.ingest(&turn("S2", "fine by me", "2023-09-01")).unwrap().trace.unwrap();
        let pruned = e.forget().unwrap();
        assert_eq!(pruned, vec![old]);
        assert!(e.state().get::<EpisodicTrace>(recent).is_some());
        assert!(e.state().get::<EpisodicTrace>(in_wm).is_some());
    }

    #[test]
    fn reconsolidation_reindexes() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        let id = e.ingest(&turn("S1", "I work at Google.", "2023-01")).unwrap().trace.unwrap();
        e.run_cycle().unwrap();
        let t = e.reconsolidate(id, None).unwrap();
        assert_eq!(t.access_count, 1);
        assert!(t.consolidated);
        let t = e.reconsolidate(id, Some("I work at Microsoft.")).unwrap();
        assert!(!t.consolidated);
        assert_eq!(t.access_count, 2);
        assert!(storyarc::timeline(e.state(), "google").is_empty());
        assert_eq!(storyarc::timeline(e.state(), "microsoft").len(), 1);
        let b = e.retrieve("Microsoft").unwrap();
        assert_eq!(b.trace_ids()[0], id);
        assert!(matches!(e.reconsolidate(id, Some("  ")), Err(MemoryError::EmptyContent)));
    }
}
