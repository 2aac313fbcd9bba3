use std::collections::BTreeSet;

use super::QueryClassifier;
use crate::error::{MemoryError, Result};
use crate::prefrontal::QueryProfile;
use crate::text;

/// Temporal cue phrases and the score each contributes. The strongest cue wins.
const TEMPORAL_CUES: &[(&[&str], f64)] = &[
    (&["when"], 0.9),
    (&["how", "long"], 0.9),
    (&["how", "many", "days"], 0.9),
    (&["what", "year"], 0.9),
    (&["before"], 0.6),
    (&["after"], 0.6),
    (&["first"], 0.5),
    (&["last"], 0.5),
    (&["earlier"], 0.5),
    (&["later"], 0.5),
    (&["since"], 0.5),
    (&["until"], 0.5),
    (&["ago"], 0.5),
    (&["year"], 0.3),
    (&["month"], 0.3),
    (&["date"], 0.3),
    (&["day"], 0.3),
    (&["time"], 0.3),
];

const FIRST_PERSON: &[&str] = &["i", "my", "me", "mine", "im", "ive", "id", "myself"];

const IDENTITY_BOOSTS: &[&[&str]] = &[&["my", "name"], &["i", "told", "you"], &["remember"], &["who", "am", "i"]];

const PREFERENCE_CUES: &[&str] = &[
    "prefer", "preferred", "preference", "favorite", "favourite", "rather", "like", "likes",
    "love", "enjoy",
];

const DEFINITIONAL: &[&[&str]] = &[
    &["what", "is"],
    &["what", "are"],
    &["what", "does"],
    &["who", "is"],
    &["define"],
    &["explain"],
    &["meaning"],
    &["describe"],
];

fn has_seq(tokens: &[String], seq: &[&str]) -> bool {
    tokens.windows(seq.len()).any(|w| w.iter().zip(seq).all(|(a, b)| a == b))
}

/// Lexicon-based four-dimension query scorer.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleClassifier;

impl QueryClassifier for RuleClassifier {
    fn classify(&self, input: &str) -> Result<QueryProfile> {
        let tokens = text::tokenize(input);
        if tokens.is_empty() {
            return Err(MemoryError::EmptyQuery);
        }
        let temporal = TEMPORAL_CUES
            .iter()
            .filter(|(cue, _)| has_seq(&tokens, cue))
            .map(|(_, w)| *w)
            .fold(0.0, f64::max);

        let first_person = tokens.iter().any(|t| FIRST_PERSON.contains(&t.as_str()));
        let mut identity = if first_person { 0.5 } else { 0.0 };
        if IDENTITY_BOOSTS.iter().any(|cue| has_seq(&tokens, cue)) {
            identity += 0.3;
        }

        let preference = if tokens.iter().any(|t| PREFERENCE_CUES.contains(&t.as_str())) {
            0.8
        } else {
            0.0
        };

        let mut factual = if first_person { 0.3 } else { 0.5 };
        if DEFINITIONAL.iter().any(|cue| has_seq(&tokens, cue)) {
            factual += 0.4;
        }
        Ok(QueryProfile::new(temporal, identity, preference, factual))
    }
}

const TASK_LEXICON: &[(&str, &[&str])] = &[
    (
        "code",
        &[
            "code", "coding", "function", "component", "components", "script", "program", "api",
            "bug", "refactor", "implement", "module", "typescript", "javascript", "react", "class",
            "compile", "test", "endpoint", "frontend", "backend",
        ],
    ),
    (
        "writing",
        &["write", "essay", "email", "letter", "draft", "blog", "article", "post", "reply", "summary"],
    ),
    ("cooking", &["recipe", "cook", "cooking", "dinner", "lunch", "meal", "bake", "ingredients"]),
];

/// Task-domain tags for a task description, used to select procedural
/// constraints.
pub fn task_tags(description: &str) -> BTreeSet<String> {
    let tokens = text::tokenize(description);
    TASK_LEXICON
        .iter()
        .filter(|(_, words)| tokens.iter().any(|t| words.contains(&t.as_str())))
        .map(|(tag, _)| tag.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify(q: &str) -> QueryProfile {
        RuleClassifier.classify(q).unwrap()
    }

    #[test]
    fn departure_query_is_temporal_and_personal() {
        let p = classify("When did I leave Google?");
        assert!(p.temporal >= 0.8);
        assert!(p.identity >= 0.5);
    }

    #[test]
    fn definitional_query_is_factual() {
        let p = classify("What is a knowledge graph?");
        assert!(p.factual > p.temporal && p.factual > p.identity && p.factual > p.preference);
        assert!(p.temporal <= 0.2);
    }

    #[test]
    fn empty_query_is_rejected() {
        assert!(matches!(RuleClassifier.classify(""), Err(MemoryError::EmptyQuery)));
        assert!(matches!(RuleClassifier.classify("  ?? "), Err(MemoryError::EmptyQuery)));
    }

    #[test]
    fn deterministic() {
        assert_eq!(classify("What is my favorite color?"), classify("What is my favorite color?"));
    }

    #[test]
    fn tags() {
        assert_eq!(
            task_tags("Write a React component for the login form"),
            BTreeSet::from(["code".to_string(), "writing".to_string()])
        );
        assert_eq!(task_tags("Suggest a dinner recipe"), BTreeSet::from(["cooking".to_string()]));
        assert!(task_tags("hello").is_empty());
    }
}
