//! Soulfulness `S = αT + βC + γI` and erosion `E = S₀ − Sₜ`.
//!
//! `T` (temporal coherence) and `I` (identity preservation) come from probe
//! suites run against an engine; `C` (semantic consistency) is read off the
//! fact store.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::config::check_soul_weights;
use crate::engine::Engine;
use crate::error::{MemoryError, Result};
use crate::storyarc::{self, EventRef};
use crate::substrate::StoreState;
use crate::time::{TemporalRelation, Timestamp};

/// Evidence traces inspected by an identity probe.
pub const IDENTITY_EVIDENCE_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoulComponents {
    pub temporal: f64,
    pub consistency: f64,
    pub identity: f64,
    /// `(α, β, γ)`.
    pub weights: (f64, f64, f64),
}

impl SoulComponents {
    pub fn new(temporal: f64, consistency: f64, identity: f64, weights: (f64, f64, f64)) -> Self {
        SoulComponents {
            temporal,
            consistency,
            identity,
            weights,
        }
    }
}

/// `αT + βC + γI`.
pub fn soulfulness(c: &SoulComponents) -> Result<f64> {
    check_soul_weights(c.weights)?;
    for (name, v) in [("T", c.temporal), ("C", c.consistency), ("I", c.identity)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(MemoryError::invariant("components", format!("{name} = {v} is outside [0, 1]")));
        }
    }
    let (a, b, g) = c.weights;
    Ok(a * c.temporal + b * c.consistency + g * c.identity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErosionMeasurement {
    pub t0_score: f64,
    pub t_score: f64,
    pub erosion: f64,
}

pub fn erosion(s0: f64, st: f64) -> ErosionMeasurement {
    ErosionMeasurement {
        t0_score: s0,
        t_score: st,
        erosion: s0 - st,
    }
}

/// `1 − (live (subject, predicate) pairs with several objects) / (live
/// pairs)`; 1 on an empty store.
pub fn semantic_consistency(state: &StoreState) -> f64 {
    let mut objects: BTreeMap<(&str, &str), BTreeSet<&str>> = BTreeMap::new();
    for f in state.semantic.iter().filter(|f| f.is_live()) {
        objects
            .entry((f.subject.as_str(), f.predicate.as_str()))
            .or_default()
            .insert(f.object.as_str());
    }
    if objects.is_empty() {
        return 1.0;
    }
    let conflicted = objects.values().filter(|o| o.len() > 1).count();
    1.0 - conflicted as f64 / objects.len() as f64
}

/// Expected identity terms: a whitespace-separated string or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Terms {
    One(String),
    Many(Vec<String>),
}

impl Terms {
    pub fn lowercase(&self) -> Vec<String> {
        let raw: Vec<&str> = match self {
            Terms::One(s) => s.split_whitespace().collect(),
            Terms::Many(v) => v.iter().map(String::as_str).collect(),
        };
        raw.into_iter()
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect()
    }
}

/// One probe-file record.
///
/// A temporal probe either asks `query` and expects a timestamp, or names
/// two events `a` and `b` and expects their relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Probe {
    Temporal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        query: Option<String>,
        expected: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<EventRef>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<EventRef>,
    },
    Identity {
        query: String,
        expected: Terms,
    },
}

impl Probe {
    pub fn temporal(query: &str, expected: &str) -> Self {
        Probe::Temporal {
            query: Some(query.to_string()),
            expected: expected.to_string(),
            a: None,
            b: None,
        }
    }

    pub fn relation(a: EventRef, b: EventRef, expected: TemporalRelation) -> Self {
        Probe::Temporal {
            query: None,
            expected: expected.to_string(),
            a: Some(a),
            b: Some(b),
        }
    }

    pub fn identity(query: &str, expected: &[&str]) -> Self {
        Probe::Identity {
            query: query.to_string(),
            expected: Terms::Many(expected.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn is_temporal(&self) -> bool {
        matches!(self, Probe::Temporal { .. })
    }

    pub fn query_text(&self) -> String {
        match self {
            Probe::Temporal { query: Some(q), .. } | Probe::Identity { query: q, .. } => q.clone(),
            Probe::Temporal { a: Some(a), b: Some(b), .. } => {
                format!("{}: {} vs {}: {}", a.entity, a.pattern, b.entity, b.pattern)
            }
            Probe::Temporal { .. } => String::new(),
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        match self {
            Probe::Temporal { query, expected, a, b } => match (a, b) {
                (Some(_), Some(_)) => expected
                    .parse::<TemporalRelation>()
                    .map(|_| ())
                    .map_err(|_| format!("`{expected}` is not a relation")),
                (None, None) => {
                    if query.as_deref().is_none_or(|q| q.trim().is_empty()) {
                        return Err("temporal probe needs a query or both `a` and `b`".into());
                    }
                    match expected.parse::<Timestamp>() {
                        Ok(t) if t.is_known() => Ok(()),
                        _ => Err(format!("`{expected}` is not a known timestamp")),
                    }
                }
                _ => Err("relation probes need both `a` and `b`".into()),
            },
            Probe::Identity { query, expected } => {
                if query.trim().is_empty() {
                    return Err("identity probe has an empty query".into());
                }
                if expected.lowercase().is_empty() {
                    return Err("identity probe expects no terms".into());
                }
                Ok(())
            }
        }
    }
}

/// Parses a line-delimited probe file. Blank lines are skipped.
pub fn parse_probes(input: &str) -> Result<Vec<Probe>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |reason: String| MemoryError::InvalidProbe { line: n + 1, reason };
        let probe: Probe = serde_json::from_str(line).map_err(|e| invalid(e.to_string()))?;
        probe.check().map_err(invalid)?;
        out.push(probe);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub probe: usize,
    pub query: String,
    pub answer: Option<String>,
    pub correct: bool,
}

fn run_probe(engine: &Engine, index: usize, probe: &Probe) -> Result<ProbeResult> {
    let (answer, correct) = match probe {
        Probe::Temporal {
            a: Some(a), b: Some(b), expected, ..
        } => {
            let rel = storyarc::query_order(engine.state(), a, b);
            let want: TemporalRelation = expected.parse()?;
            (Some(rel.to_string()), rel == want)
        }
        Probe::Temporal {
            query: Some(q), expected, ..
        } => {
            let want: Timestamp = expected.parse()?;
            let bundle = engine.retrieve(q)?;
            match bundle.temporal_answers.first() {
                Some(ans) => {
                    let ok = ans.at.granularity().is_finer_or_equal(want.granularity())
                        && ans.at.at_granularity(want.granularity()) == want;
                    (Some(ans.at.to_string()), ok)
                }
                None => (None, false),
            }
        }
        Probe::Temporal { .. } => return Err(MemoryError::InvalidProbe { line: index + 1, reason: "incomplete".into() }),
        Probe::Identity { query, expected } => {
            let want = expected.lowercase();
            let bundle = engine.retrieve(query)?;
            let texts = engine.evidence_texts(&bundle, IDENTITY_EVIDENCE_DEPTH);
            let hit = texts.iter().find(|t| {
                let lower = t.to_lowercase();
                want.iter().all(|w| lower.contains(w.as_str()))
            });
            (hit.or(texts.first()).cloned(), hit.is_some())
        }
    };
    Ok(ProbeResult {
        probe: index,
        query: probe.query_text(),
        answer,
        correct,
    })
}

fn fraction(engine: &Engine, probes: &[Probe], kind_temporal: bool) -> Result<f64> {
    let picked: Vec<&Probe> = probes.iter().filter(|p| p.is_temporal() == kind_temporal).collect();
    if picked.is_empty() {
        return Err(MemoryError::EmptyProbeSet);
    }
    let mut correct = 0usize;
    for (i, p) in picked.iter().enumerate() {
        if run_probe(engine, i, p)?.correct {
            correct += 1;
        }
    }
    Ok(correct as f64 / picked.len() as f64)
}

/// Share of temporal probes answered at the expected granularity.
pub fn temporal_coherence(engine: &Engine, probes: &[Probe]) -> Result<f64> {
    fraction(engine, probes, true)
}

/// Share of identity probes whose top evidence holds every expected term.
pub fn identity_preservation(engine: &Engine, probes: &[Probe]) -> Result<f64> {
    fraction(engine, probes, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub components: SoulComponents,
    pub temporal_probes: usize,
    pub identity_probes: usize,
    pub soulfulness: f64,
    pub results: Vec<ProbeResult>,
}

/// Runs a mixed probe suite. A kind with no probes scores 1 (nothing to
/// get wrong), mirroring `C` on an empty store; an empty suite is an error.
pub fn evaluate(engine: &Engine, probes: &[Probe]) -> Result<MetricsReport> {
    if probes.is_empty() {
        return Err(MemoryError::EmptyProbeSet);
    }
    let mut results = Vec::with_capacity(probes.len());
    let (mut t_ok, mut t_n, mut i_ok, mut i_n) = (0usize, 0usize, 0usize, 0usize);
    for (i, p) in probes.iter().enumerate() {
        let r = run_probe(engine, i, p)?;
        if p.is_temporal() {
            t_n += 1;
            t_ok += r.correct as usize;
        } else {
            i_n += 1;
            i_ok += r.correct as usize;
        }
        results.push(r);
    }
    let share = |ok: usize, n: usize| if n == 0 { 1.0 } else { ok as f64 / n as f64 };
    let components = SoulComponents::new(
        share(t_ok, t_n),
        semantic_consistency(engine.state()),
        share(i_ok, i_n),
        engine.config().soul_weights(),
    );
    Ok(MetricsReport {
        soulfulness: soulfulness(&components)?,
        components,
        temporal_probes: t_n,
        identity_probes: i_n,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;
    use crate::semantic::{upsert_fact, Triple};
    use crate::substrate::{MemoryId, RecordKind};

    #[test]
    fn worked_value() {
        let s = soulfulness(&SoulComponents::new(0.623, 0.9, 0.489, (0.5, 0.3, 0.2))).unwrap();
        assert!((s - 0.6793).abs() < 1e-12);
        let third = 1.0 / 3.0;
        let s = soulfulness(&SoulComponents::new(1.0, 1.0, 1.0, (third, third, 1.0 - 2.0 * third))).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(matches!(
            soulfulness(&SoulComponents::new(1.0, 1.0, 1.0, (0.5, 0.5, 0.5))),
            Err(MemoryError::BadWeights(_))
        ));
    }

    #[test]
    fn erosion_basics() {
        assert_eq!(erosion(0.7, 0.7).erosion, 0.0);
        assert_eq!(erosion(0.9, 0.4).erosion, -erosion(0.4, 0.9).erosion);
    }

    #[test]
    fn consistency_counts_pairs() {
        let mut s = StoreState::new(EngineConfig::default()).unwrap();
        assert_eq!(semantic_consistency(&s), 1.0);
        let ep = MemoryId::new(RecordKind::Episodic, 0);
        for (p, o) in [("diet", "vegan"), ("diet", "vegetarian"), ("employer", "google"), ("city", "oslo"), ("pet", "cat")] {
            upsert_fact(&mut s, &Triple::new("user", p, o), 0.9, ep, Timestamp::unknown()).unwrap();
        }
        assert!((semantic_consistency(&s) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn probe_parsing() {
        let ok = r#"{"kind":"temporal","query":"When did I join Google?","expected":"2023-01"}
{"kind":"identity","query":"What is my favorite color?","expected":"teal"}

{"kind":"temporal","expected":"before","a":{"entity":"google","pattern":"join"},"b":{"entity":"techstartup","pattern":"offer"}}"#;
        assert_eq!(parse_probes(ok).unwrap().len(), 3);
        let bad = "{\"kind\":\"temporal\",\"query\":\"q\",\"expected\":\"soon\"}";
        assert!(matches!(parse_probes(bad), Err(MemoryError::InvalidProbe { line: 1, .. })));
        assert!(matches!(parse_probes("\n{"), Err(MemoryError::InvalidProbe { line: 2, .. })));
    }

    #[test]
    fn unmentioned_attribute_scores_zero() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.ingest(&crate::hippocampus::ConversationTurn::new("S1", 1, "user", "My favorite color is teal.", "2023-01".parse().unwrap()))
            .unwrap();
        let probes = [Probe::identity("What is my favorite color?", &["teal"]), Probe::identity("What is my blood type?", &["o-negative"])];
        let r = evaluate(&e, &probes).unwrap();
        assert!(r.results[0].correct);
        assert!(!r.results[1].correct);
        assert!(matches!(temporal_coherence(&e, &probes), Err(MemoryError::EmptyProbeSet)));
    }
}
