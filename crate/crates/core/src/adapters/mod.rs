//! Model adapters: embedding, extraction and query classification.
//!
//! Every adapter is a trait with a deterministic offline implementation
//! (`HashEmbedder`, `RuleExtractor`, `RuleClassifier`). The engine only needs
//! these; an LLM- or API-backed implementation can be swapped in behind the
//! same traits, configured through [`OnlineAdapterConfig`].

mod classify;
mod embed;
mod extract;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use classify::{task_tags, RuleClassifier};
pub use embed::{cosine, EmbeddingVector, HashEmbedder};
pub use extract::RuleExtractor;

use crate::error::{MemoryError, Result};
use crate::prefrontal::QueryProfile;
use crate::time::Timestamp;

/// A temporal phrase found in text together with its resolved timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalExpression {
    pub surface: String,
    pub resolved: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedTriple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub confidence: f64,
}

/// An imperative or stated preference, keyed by `(domain, attribute)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceStatement {
    pub domain: String,
    pub attribute: String,
    /// Normalized preferred value; two statements agree iff values are equal.
    pub value: String,
    pub statement: String,
}

impl PreferenceStatement {
    pub fn key(&self) -> String {
        format!("{}.{}", self.domain, self.attribute)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub entities: BTreeSet<String>,
    pub temporal_expressions: Vec<TemporalExpression>,
    pub triples: Vec<ExtractedTriple>,
    pub preference_statements: Vec<PreferenceStatement>,
    /// Self-referential statement (name, thesis, preferences, personal facts).
    pub identity_flag: bool,
    /// Milestone or emphatic cue; the engine reads it as a feedback signal.
    pub milestone: bool,
}

impl ExtractionResult {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
            && self.temporal_expressions.is_empty()
            && self.triples.is_empty()
            && self.preference_statements.is_empty()
            && !self.identity_flag
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

pub trait Extractor: Send + Sync {
    fn extract(&self, text: &str, speaker: &str, timestamp: Timestamp) -> Result<ExtractionResult>;
}

pub trait QueryClassifier: Send + Sync {
    fn classify(&self, text: &str) -> Result<QueryProfile>;
}

/// Connection settings for an optional hosted model. The key is read from an
/// environment variable at call time, never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnlineAdapterConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
}

impl OnlineAdapterConfig {
    pub fn api_key(&self) -> Option<String> {
        std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty())
    }
}

/// Builds the classification prompt sent to a hosted classifier.
pub fn classifier_prompt(query: &str) -> String {
    format!(
        "Analyze this query and rate each dimension from 0.0 to 1.0:\n\
         Query: \"{query}\"\n\
         Dimensions:\n\
         - temporal: Time/sequence reasoning (when, before, after, order of events)\n\
         - identity: Personal info recall (my name, my preferences, what I told you)\n\
         - preference: Choice/comparison (prefer, favorite, which do I like better)\n\
         - factual: General fact lookup (what is X, define, explain)\n\
         Return ONLY valid JSON: {{\"temporal\": 0.X, \"identity\": 0.X, \"preference\": 0.X, \"factual\": 0.X}}"
    )
}

/// Parses a hosted classifier's JSON reply, clamping every value into [0, 1].
/// Missing dimensions default to 0.
pub fn parse_classifier_reply(reply: &str) -> Result<QueryProfile> {
    #[derive(Deserialize)]
    struct Reply {
        #[serde(default)]
        temporal: f64,
        #[serde(default)]
        identity: f64,
        #[serde(default)]
        preference: f64,
        #[serde(default)]
        factual: f64,
    }
    let start = reply.find('{');
    let end = reply.rfind('}');
    let body = match (start, end) {
        (Some(s), Some(e)) if s < e => &reply[s..=e],
        _ => return Err(MemoryError::ExtractorUnavailable(format!("no JSON object in `{reply}`"))),
    };
    let r: Reply = serde_json::from_str(body)
        .map_err(|e| MemoryError::ExtractorUnavailable(format!("bad classifier reply: {e}")))?;
    Ok(QueryProfile::new(r.temporal, r.identity, r.preference, r.factual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifier_reply_is_clamped() {
        let p = parse_classifier_reply("Sure! {\"temporal\": 1.4, \"identity\": -0.2, \"factual\": 0.5}")
            .unwrap();
        assert_eq!((p.temporal, p.identity, p.preference, p.factual), (1.0, 0.0, 0.0, 0.5));
        assert!(parse_classifier_reply("no json here").is_err());
    }

    #[test]
    fn prompt_embeds_query() {
        let p = classifier_prompt("When did I leave Google?");
        assert!(p.contains("Query: \"When did I leave Google?\""));
        assert!(p.contains("rate each dimension from 0.0 to 1.0"));
    }

    #[test]
    fn missing_online_key_is_not_an_error() {
        let cfg = OnlineAdapterConfig {
            endpoint: "https://example.invalid/v1".into(),
            model: "any".into(),
            api_key_env: "SOULMEM_TEST_KEY_THAT_IS_NOT_SET".into(),
        };
        assert_eq!(cfg.api_key(), None);
    }
}
