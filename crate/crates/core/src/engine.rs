//! The memory engine: one store, its search indexes, and the adapters.
//!
//! Writes go through `&mut Engine` (ingest, recall, cycles); reads through
//! `&Engine`. [`SharedEngine`] wraps an engine in a reader-writer lock so
//! many readers can query one snapshot while a single writer mutates.

use std::collections::BTreeSet;
use std::sync::Arc;

use parking_lot::{RwLock, RwLockReadGuard, RwLockWriteGuard};
use serde::{Deserialize, Serialize};

use crate::adapters::{
    task_tags, Embedder, EmbeddingVector, ExtractionResult, Extractor, HashEmbedder, QueryClassifier,
    RuleClassifier, RuleExtractor,
};
use crate::amygdala::{self, ProtectionReason};
use crate::config::{EngineConfig, Region};
use crate::consolidation::ConsolidationReport;
use crate::error::{MemoryError, Result};
use crate::hippocampus::{self, ConversationTurn, EpisodicTrace};
use crate::prefrontal::{self, QueryProfile};
use crate::procedural;
use crate::retrieval::{self, fuse_rrf, rank_graph, Bm25Index, DenseIndex, EvidenceBundle, RankedList, Source};
use crate::semantic::{self, Triple};
use crate::storyarc;
use crate::substrate::{MemoryId, RecordCounts, StoreState};
use crate::text;
use crate::time::Timestamp;

/// Traces credited with an access by [`Engine::recall`].
pub const RECALL_ACCESS_DEPTH: usize = 3;

/// What one ingested turn produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub trace: Option<MemoryId>,
    pub timeline_events: Vec<MemoryId>,
    pub salience: Option<MemoryId>,
    pub protected: bool,
    pub patterns: Vec<MemoryId>,
    pub pruned: Vec<MemoryId>,
}

pub struct Engine {
    pub(crate) state: StoreState,
    pub(crate) lexical: Bm25Index,
    pub(crate) dense: DenseIndex,
    pub(crate) embedder: Box<dyn Embedder>,
    pub(crate) extractor: Box<dyn Extractor>,
    pub(crate) classifier: Box<dyn QueryClassifier>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("counts", &self.state.counts())
            .field("frozen", &self.state.is_frozen())
            .finish_non_exhaustive()
    }
}

impl Engine {
    /// Engine with the offline adapters.
    pub fn new(config: EngineConfig) -> Result<Self> {
        Self::from_state(StoreState::new(config)?)
    }

    /// Wraps an existing store (e.g. an imported archive), rebuilding the
    /// search indexes with the offline adapters.
    pub fn from_state(state: StoreState) -> Result<Self> {
        let dim = state.config().embed_dim;
        Self::with_adapters(
            state,
            Box::new(HashEmbedder::new(dim)),
            Box::new(RuleExtractor::default()),
            Box::new(RuleClassifier),
        )
    }

    pub fn with_adapters(
        state: StoreState,
        embedder: Box<dyn Embedder>,
        extractor: Box<dyn Extractor>,
        classifier: Box<dyn QueryClassifier>,
    ) -> Result<Self> {
        if embedder.dim() != state.config().embed_dim {
            return Err(MemoryError::BadConfig(format!(
                "embedder dimension {} does not match embed_dim {}",
                embedder.dim(),
                state.config().embed_dim
            )));
        }
        let config = state.config();
        let mut engine = Engine {
            lexical: Bm25Index::new(config.bm25_k1, config.bm25_b),
            dense: DenseIndex::new(),
            state,
            embedder,
            extractor,
            classifier,
        };
        let traces: Vec<(MemoryId, String)> = engine
            .state
            .episodic
            .iter()
            .filter(|t| !t.raw)
            .map(|t| (t.id, t.content.clone()))
            .collect();
        for (id, content) in traces {
            engine.index_trace(id, &content)?;
        }
        Ok(engine)
    }

    pub fn state(&self) -> &StoreState {
        &self.state
    }

    pub fn config(&self) -> &EngineConfig {
        self.state.config()
    }

    pub fn counts(&self) -> RecordCounts {
        self.state.counts()
    }

    pub fn state_digest(&self) -> String {
        self.state.state_digest()
    }

    pub fn is_frozen(&self) -> bool {
        self.state.is_frozen()
    }

    pub fn freeze(&mut self) {
        self.state.freeze();
    }

    pub fn into_state(self) -> StoreState {
        self.state
    }

    pub fn enabled(&self, region: Region) -> bool {
        self.state.config().is_enabled(region)
    }

    pub fn extractor(&self) -> &dyn Extractor {
        self.extractor.as_ref()
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        self.embedder.embed(text)
    }

    fn embed_opt(&self, text: &str) -> Result<Option<EmbeddingVector>> {
        match self.embedder.embed(text) {
            Ok(v) => Ok(Some(v)),
            Err(MemoryError::EmptyText) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub(crate) fn index_trace(&mut self, id: MemoryId, content: &str) -> Result<()> {
        self.lexical.insert(id, content);
        match self.embed_opt(content)? {
            Some(v) => self.dense.insert(id, v),
            None => self.dense.remove(id),
        }
        Ok(())
    }

    pub(crate) fn unindex_traces(&mut self, ids: &[MemoryId]) {
        for &id in ids {
            self.lexical.remove(id);
            self.dense.remove(id);
        }
    }

    /// Runs one turn through extraction, salience, encoding, timeline and
    /// procedural indexing, then enforces every capacity.
    pub fn ingest(&mut self, turn: &ConversationTurn) -> Result<IngestOutcome> {
        self.state.ensure_writable()?;
        if turn.text.trim().is_empty() {
            return Err(MemoryError::EmptyContent);
        }
        if !self.enabled(Region::Hippocampus) {
            let mut trace = EpisodicTrace::raw(
                &turn.session_id,
                &turn.speaker,
                turn.text.trim(),
                turn.timestamp,
                self.config().stability_initial,
            );
            trace.turn = turn.turn;
            trace.raw = true;
            let id = self.state.put_record(trace)?;
            let pruned = self.enforce_capacity()?;
            return Ok(IngestOutcome {
                trace: Some(id),
                pruned,
                ..IngestOutcome::default()
            });
        }

        let analysis = self.extractor.extract(&turn.text, &turn.speaker, turn.timestamp)?;
        let vector = self.embed_opt(&turn.text)?;

        let salience = if self.enabled(Region::Amygdala) {
            Some(self.salience_inputs(turn, &analysis, vector.as_ref()))
        } else {
            None
        };
        let threshold = self.config().protection_threshold;
        let (trace_salience, reason) = match &salience {
            Some(rec) => {
                let reason = if analysis.identity_flag {
                    Some(ProtectionReason::Identity)
                } else if rec.aggregate >= threshold {
                    Some(ProtectionReason::HighSalience)
                } else {
                    None
                };
                let s = if reason.is_some() { rec.aggregate.max(threshold) } else { rec.aggregate };
                (s, reason)
            }
            None => (0.0, None),
        };

        let id = if self.enabled(Region::Prefrontal) {
            hippocampus::encode_episode(&mut self.state, turn, &analysis, trace_salience)?
        } else {
            hippocampus::store_trace(&mut self.state, turn, &analysis, trace_salience)?
        };
        self.lexical.insert(id, &turn.text);
        if let Some(v) = vector {
            self.dense.insert(id, v);
        }

        let mut outcome = IngestOutcome {
            trace: Some(id),
            ..IngestOutcome::default()
        };
        if let Some(mut rec) = salience {
            rec.trace_ref = id;
            outcome.salience = Some(self.state.put_record(rec)?);
            if let Some(reason) = reason {
                amygdala::tag_protection(&mut self.state, id, reason)?;
                outcome.protected = true;
            }
        }
        let trace = self.state.get::<EpisodicTrace>(id).expect("just stored").clone();
        outcome.timeline_events = storyarc::index_event(&mut self.state, &trace)?;
        if self.enabled(Region::BasalGanglia) && !analysis.preference_statements.is_empty() {
            outcome.patterns =
                procedural::observe_statement(&mut self.state, &turn.session_id, &analysis.preference_statements)?;
        }
        outcome.pruned = self.enforce_capacity()?;
        Ok(outcome)
    }

    fn salience_inputs(
        &self,
        turn: &ConversationTurn,
        analysis: &ExtractionResult,
        vector: Option<&EmbeddingVector>,
    ) -> amygdala::SalienceRecord {
        let window = self.config().novelty_window;
        let novelty = match vector {
            Some(v) => amygdala::novelty(v, self.dense.iter().rev().take(window).map(|(_, c)| c)),
            None => 0.0,
        };
        let conflict = analysis.triples.iter().any(|t| {
            !semantic::detect_conflicts(&self.state, &Triple::new(&t.subject, &t.predicate, &t.object)).is_empty()
        });
        let feedback = turn
            .feedback
            .unwrap_or(if analysis.milestone { 1.0 } else { 0.0 });
        amygdala::score(
            MemoryId::unassigned(crate::substrate::RecordKind::Episodic),
            novelty,
            if conflict { 1.0 } else { 0.0 },
            feedback,
        )
    }

    /// Brings every store within its cap. Returns pruned trace ids.
    pub fn enforce_capacity(&mut self) -> Result<Vec<MemoryId>> {
        let out = hippocampus::enforce_capacity(&mut self.state)?;
        self.unindex_traces(&out.pruned);
        amygdala::enforce_capacity(&mut self.state)?;
        semantic::enforce_capacity(&mut self.state)?;
        procedural::enforce_capacity(&mut self.state)?;
        Ok(out.pruned)
    }

    /// Ingests every turn in order, running a consolidation cycle after every
    /// `cycle_every` turns when set.
    pub fn ingest_all<'a>(
        &mut self,
        turns: impl IntoIterator<Item = &'a ConversationTurn>,
        cycle_every: Option<usize>,
    ) -> Result<Vec<ConsolidationReport>> {
        let mut reports = Vec::new();
        for (i, turn) in turns.into_iter().enumerate() {
            self.ingest(turn)?;
            if let Some(n) = cycle_every.filter(|n| *n > 0) {
                if (i + 1) % n == 0 {
                    reports.push(self.run_cycle()?);
                }
            }
        }
        Ok(reports)
    }

    pub fn classify(&self, query: &str) -> Result<QueryProfile> {
        if query.trim().is_empty() {
            return Err(MemoryError::EmptyQuery);
        }
        if self.enabled(Region::Prefrontal) {
            self.classifier.classify(query)
        } else {
            Ok(QueryProfile::default())
        }
    }

    fn query_entities(&self, query: &str) -> Result<BTreeSet<String>> {
        let mut entities = self.extractor.extract(query, "user", Timestamp::unknown())?.entities;
        entities.extend(storyarc::entities_mentioned(&self.state, query));
        let tokens = text::tokenize(query);
        if tokens.iter().any(|t| matches!(t.as_str(), "i" | "my" | "me" | "im" | "mine")) {
            entities.insert("user".to_string());
        }
        Ok(entities)
    }

    fn run_rankers(
        &self,
        query: &str,
        profile: &QueryProfile,
        sources: impl Iterator<Item = Source>,
    ) -> Result<Vec<RankedList>> {
        let depth = self.config().ranker_depth;
        let mut lists = Vec::new();
        for source in sources {
            let list = match source {
                Source::Lexical => self.lexical.search(query, depth),
                Source::Dense => match self.embed_opt(query)? {
                    Some(v) => self.dense.search(&v, depth),
                    None => RankedList::empty(Source::Dense),
                },
                Source::Graph => {
                    let entities = self.query_entities(query)?;
                    rank_graph(&self.state, &entities, &text::term_set(query), depth)
                }
                Source::Temporal => storyarc::rank_temporal(&self.state, query, profile, depth).list,
            };
            lists.push(list);
        }
        Ok(lists)
    }

    /// Read-only retrieval: classify, route, try the working-memory fast
    /// path, run the selected rankers, fuse, and expand once more when the
    /// top result is uncertain and the plan allows a second round.
    pub fn retrieve(&self, query: &str) -> Result<EvidenceBundle> {
        let profile = self.classify(query)?;
        let mut plan = prefrontal::route(&profile);
        if !self.enabled(Region::Prefrontal) {
            plan.fast_path = false;
        }
        if !self.enabled(Region::TemporalLobe) {
            plan.weights.remove(&Source::Graph);
        }
        let mut bundle = EvidenceBundle {
            query: query.to_string(),
            profile,
            plan: plan.clone(),
            fused: Vec::new(),
            temporal_answers: Vec::new(),
            fast_path: None,
            rounds_used: 1,
            uncertainty: 1.0,
            lists: Default::default(),
        };
        if plan.fast_path {
            if let Some(item) = prefrontal::fast_path_check(&self.state, query, &profile) {
                bundle.fast_path = Some(item.clone());
                bundle.uncertainty = 0.0;
                return Ok(bundle);
            }
        }
        if plan.weights.contains_key(&Source::Temporal) {
            bundle.temporal_answers =
                storyarc::rank_temporal(&self.state, query, &profile, self.config().ranker_depth).answers;
        }

        let k = self.config().rrf_k;
        let lists = self.run_rankers(query, &profile, plan.sources())?;
        bundle.lists = lists.iter().map(|l| (l.source(), l.len())).collect();
        bundle.fused = fuse_rrf(&lists, &plan.weights, k)?;
        bundle.uncertainty = retrieval::uncertainty(&bundle.fused);

        if bundle.uncertainty > self.config().uncertainty_threshold
            && plan.max_rounds >= 2
            && !bundle.fused.is_empty()
        {
            let top = bundle.fused[0].candidate;
            let mut expanded = query.to_string();
            if let Some(t) = self.state.get::<EpisodicTrace>(top) {
                for e in &t.entities {
                    expanded.push(' ');
                    expanded.push_str(e);
                }
            }
            let mut weights = plan.weights.clone();
            if let Some(w) = weights.get_mut(&Source::Graph) {
                *w *= self.config().second_round_graph_boost;
            }
            let lists = self.run_rankers(&expanded, &profile, weights.keys().copied())?;
            bundle.lists = lists.iter().map(|l| (l.source(), l.len())).collect();
            bundle.fused = fuse_rrf(&lists, &weights, k)?;
            bundle.uncertainty = retrieval::uncertainty(&bundle.fused);
            bundle.rounds_used = 2;
        }
        Ok(bundle)
    }

    /// [`Engine::retrieve`] followed by an access (reconsolidation) on the
    /// top traces.
    pub fn recall(&mut self, query: &str) -> Result<EvidenceBundle> {
        self.state.ensure_writable()?;
        let bundle = self.retrieve(query)?;
        for id in bundle.trace_ids().into_iter().take(RECALL_ACCESS_DEPTH) {
            if self.state.get::<EpisodicTrace>(id).is_some() {
                hippocampus::record_access(&mut self.state, id)?;
            }
        }
        Ok(bundle)
    }

    /// Contents of the first `n` evidence traces.
    pub fn evidence_texts(&self, bundle: &EvidenceBundle, n: usize) -> Vec<String> {
        bundle
            .trace_ids()
            .into_iter()
            .filter_map(|id| self.state.get::<EpisodicTrace>(id).map(|t| t.content.clone()))
            .take(n)
            .collect()
    }

    /// Procedural constraints relevant to a task description.
    pub fn constraints_for(&self, task: &str) -> Vec<String> {
        if !self.enabled(Region::BasalGanglia) {
            return Vec::new();
        }
        procedural::apply_patterns(&self.state, &task_tags(task))
    }
}

/// Reader-writer wrapper: concurrent readers share a snapshot, one writer
/// at a time mutates.
#[derive(Clone)]
pub struct SharedEngine {
    inner: Arc<RwLock<Engine>>,
}

impl SharedEngine {
    pub fn new(engine: Engine) -> Self {
        SharedEngine {
            inner: Arc::new(RwLock::new(engine)),
        }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Engine> {
        self.inner.read()
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, Engine> {
        self.inner.write()
    }

    pub fn retrieve(&self, query: &str) -> Result<EvidenceBundle> {
        self.inner.read().retrieve(query)
    }

    pub fn ingest(&self, turn: &ConversationTurn) -> Result<IngestOutcome> {
        self.inner.write().ingest(turn)
    }

    pub fn run_cycle(&self) -> Result<ConsolidationReport> {
        self.inner.write().run_cycle()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn(session: &str, text: &str, ts: &str) -> ConversationTurn {
        ConversationTurn::new(session, 1, "user", text, ts.parse().unwrap())
    }

    #[test]
    fn empty_store_gives_empty_bundle() {
        let e = Engine::new(EngineConfig::default()).unwrap();
        let b = e.retrieve("When did I leave Google?").unwrap();
        assert!(b.fused.is_empty());
        assert_eq!(b.uncertainty, 1.0);
        assert_eq!(b.rounds_used, 1);
        assert!(matches!(e.retrieve("   "), Err(MemoryError::EmptyQuery)));
    }

    #[test]
    fn ingest_indexes_everything() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        let out = e.ingest(&turn("S1", "I just started my new job at Google.", "2023-01")).unwrap();
        assert_eq!(out.timeline_events.len(), 1);
        assert!(out.protected);
        assert_eq!(e.counts().episodic, 1);
        assert_eq!(e.counts().working_memory, 1);
        let b = e.retrieve("new job at Google").unwrap();
        assert_eq!(b.trace_ids()[0], out.trace.unwrap());
    }

    #[test]
    fn frozen_engine_rejects_writes() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.ingest(&turn("S1", "hello there", "2023-01")).unwrap();
        e.freeze();
        let d = e.state_digest();
        assert!(matches!(e.ingest(&turn("S1", "again", "2023-01")), Err(MemoryError::FrozenState)));
        assert!(matches!(e.recall("hello"), Err(MemoryError::FrozenState)));
        e.retrieve("hello").unwrap();
        assert_eq!(e.state_digest(), d);
    }

    #[test]
    fn shared_engine_readers() {
        let shared = SharedEngine::new(Engine::new(EngineConfig::default()).unwrap());
        shared.ingest(&turn("S1", "I moved to Lisbon in 2019.", "2023-01")).unwrap();
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let s = shared.clone();
                std::thread::spawn(move || s.retrieve("Lisbon").unwrap().fused.len())
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), 1);
        }
    }
}
