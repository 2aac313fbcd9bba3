//! Long-horizon memory for conversational agents.
//!
//! One [`StoreState`] holds episodic traces, per-entity timelines, semantic
//! facts, salience records, procedural patterns and a working-memory buffer.
//! An [`Engine`] drives it: [`Engine::ingest`] encodes turns,
//! [`Engine::retrieve`] fuses lexical, dense, graph and temporal rankings,
//! [`Engine::run_cycle`] consolidates and forgets, and the [`metrics`]
//! module scores how well the store keeps time, facts and identity.
//!
//! ```
//! use soulmem::{ConversationTurn, Engine, EngineConfig};
//!
//! let mut engine = Engine::new(EngineConfig::default()).unwrap();
//! let turn = ConversationTurn::new("S1", 1, "user", "I just started my new job at Google.", "2023-01".parse().unwrap());
//! engine.ingest(&turn).unwrap();
//! let bundle = engine.retrieve("When did I start at Google?").unwrap();
//! assert_eq!(bundle.temporal_answers[0].at.to_string(), "2023-01");
//! ```

pub mod adapters;
pub mod amygdala;
pub mod archive;
pub mod cli;
pub mod config;
pub mod consolidation;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod hippocampus;
pub mod metrics;
pub mod prefrontal;
pub mod procedural;
pub mod retrieval;
pub mod semantic;
pub mod storyarc;
pub mod substrate;
pub mod text;
pub mod time;

pub use config::{EngineConfig, Region};
pub use consolidation::ConsolidationReport;
pub use engine::{Engine, IngestOutcome, SharedEngine};
pub use error::{MemoryError, Result};
pub use hippocampus::{ConversationTurn, EpisodicTrace};
pub use metrics::{Probe, SoulComponents};
pub use retrieval::{EvidenceBundle, FusedResult, RankedList, Source};
pub use semantic::{SemanticFact, Triple};
pub use substrate::{MemoryId, StoreState};
pub use time::{Granularity, Timestamp};
