//! The four rankers and weighted reciprocal rank fusion.
//!
//! Each ranker produces a [`RankedList`]; [`fuse_rrf`] combines them as
//! `score(d) = Σ_s w_s / (k + rank_s(d))`. The orchestration (classify, route,
//! multi-round expansion) lives in [`crate::engine`].

mod dense;
mod fusion;
mod graph;
mod lexical;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dense::DenseIndex;
pub use fusion::{fuse_rrf, FusedResult};
pub use graph::rank_graph;
pub use lexical::Bm25Index;

use crate::error::{MemoryError, Result};
use crate::hippocampus::WmItem;
use crate::prefrontal::{QueryProfile, RetrievalPlan};
use crate::storyarc::TemporalAnswer;
use crate::substrate::MemoryId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Lexical,
    Dense,
    Graph,
    Temporal,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Lexical, Source::Dense, Source::Graph, Source::Temporal];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Lexical => "lexical",
            Source::Dense => "dense",
            Source::Graph => "graph",
            Source::Temporal => "temporal",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = MemoryError;

    fn from_str(s: &str) -> Result<Self> {
        Source::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| MemoryError::BadWeights(format!("unknown source `{s}`")))
    }
}

/// One ranker's output: candidates by descending score, ids unique.
/// Rank is the 1-based position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    source: Source,
    entries: Vec<(MemoryId, f64)>,
}

impl RankedList {
    pub fn new(source: Source, entries: Vec<(MemoryId, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].1 < w[1].1) {
            return Err(MemoryError::invariant("entries", "scores must be non-increasing"));
        }
        let mut ids: Vec<MemoryId> = entries.iter().map(|e| e.0).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(MemoryError::invariant("entries", "candidate ids must be unique"));
        }
        Ok(RankedList { source, entries })
    }

    /// A list in the given order, scored by descending position. Handy for
    /// callers that only have an ordering.
    pub fn from_order(source: Source, ids: Vec<MemoryId>) -> Result<Self> {
        let n = ids.len();
        Self::new(source, ids.into_iter().enumerate().map(|(i, id)| (id, (n - i) as f64)).collect())
    }

    pub fn empty(source: Source) -> Self {
        RankedList {
            source,
            entries: Vec::new(),
        }
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn entries(&self) -> &[(MemoryId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = MemoryId> + '_ {
        self.entries.iter().map(|e| e.0)
    }
}

/// Sorts `(id, score)` pairs by score descending, then id, and keeps `k_top`.
pub(crate) fn top_k(mut scored: Vec<(MemoryId, f64)>, k_top: usize) -> Vec<(MemoryId, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k_top);
    scored
}

/// Everything a query produced: fused candidates, timeline answers, the
/// profile and plan that drove them, and how certain the top result is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub query: String,
    pub profile: QueryProfile,
    pub plan: RetrievalPlan,
    pub fused: Vec<FusedResult>,
    pub temporal_answers: Vec<TemporalAnswer>,
    /// Working-memory item that answered the query without full retrieval.
    pub fast_path: Option<WmItem>,
    pub rounds_used: u32,
    pub uncertainty: f64,
    pub lists: BTreeMap<Source, usize>,
}

impl EvidenceBundle {
    pub fn is_empty(&self) -> bool {
        self.fused.is_empty() && self.temporal_answers.is_empty() && self.fast_path.is_none()
    }

    /// Trace ids in evidence order: fast-path source first, then fused.
    pub fn trace_ids(&self) -> Vec<MemoryId> {
        let mut out: Vec<MemoryId> = self.fast_path.iter().map(|w| w.source_trace).collect();
        for f in &self.fused {
            if !out.contains(&f.candidate) {
                out.push(f.candidate);
            }
        }
        out
    }
}

/// `1 − top / (top + runner_up)` for two or more results, else 1.
pub fn uncertainty(fused: &[FusedResult]) -> f64 {
    match fused {
        [top, second, ..] if top.fused_score + second.fused_score > 0.0 => {
            1.0 - top.fused_score / (top.fused_score + second.fused_score)
        }
        _ => 1.0,
    }
}
