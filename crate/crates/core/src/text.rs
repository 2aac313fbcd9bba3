//! Token normalization shared by every matcher in the crate.
//!
//! `tokenize` case-folds and splits on anything that is not alphanumeric
//! (apostrophes are dropped first so `I'm` becomes `im`). `terms` additionally
//! removes stopwords and folds inflections with a small suffix stemmer, so
//! `leaving`, `leave` and `left` all reduce to the same term. BM25, the hash
//! embedder, timeline pattern matching and the rule-based adapters all go
//! through `terms`, which keeps their notion of "the same word" identical.

use std::collections::BTreeSet;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as",
    "at", "be", "been", "being", "both", "but", "by", "can", "could", "d", "did", "didnt", "do",
    "does", "doing", "dont", "for", "from", "had", "has", "have", "having", "he", "her", "here",
    "hers", "him", "his", "how", "i", "id", "if", "im", "in", "into", "is", "it", "its", "ive",
    "just", "ll", "m", "me", "my", "myself", "of", "on", "or", "our", "ours", "re", "s", "she",
    "so", "some", "such", "t", "than", "that", "the", "their", "them", "then", "there", "these",
    "they", "this", "those", "to", "too", "us", "ve", "very", "was", "we", "were", "what", "whats",
    "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "youre",
    "yours",
];

/// Words the suffix rules would mangle into something misleading.
const KEEP_AS_IS: &[&str] = &[
    "thing", "nothing", "something", "everything", "anything", "morning", "evening", "spring",
    "string", "king", "ring", "sing", "wing", "bring", "during", "ceiling", "news", "series",
    "species", "always", "was", "has", "is", "this", "yes", "bus", "gas", "plus", "thus",
];

const IRREGULAR: &[(&str, &str)] = &[
    ("left", "leave"),
    ("began", "begin"),
    ("begun", "begin"),
    ("went", "go"),
    ("gone", "go"),
    ("took", "take"),
    ("taken", "take"),
    ("ate", "eat"),
    ("eaten", "eat"),
    ("made", "make"),
    ("got", "get"),
    ("gotten", "get"),
    ("moved", "move"),
    ("quit", "quit"),
    ("met", "meet"),
    ("bought", "buy"),
    ("told", "tell"),
    ("said", "say"),
    ("saw", "see"),
    ("seen", "see"),
    ("wrote", "write"),
    ("written", "write"),
    ("won", "win"),
    ("ran", "run"),
    ("came", "come"),
    ("felt", "feel"),
    ("kept", "keep"),
    ("found", "find"),
    ("gave", "give"),
    ("given", "give"),
    ("flew", "fly"),
    ("flown", "fly"),
    ("chose", "choose"),
    ("chosen", "choose"),
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Case-folds and splits `text` into alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch == '\'' || ch == '\u{2019}' {
            continue;
        }
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Reduces an already lowercased token to its folded form.
pub fn stem(token: &str) -> String {
    if let Some((_, base)) = IRREGULAR.iter().find(|(form, _)| *form == token) {
        return strip_final_e(base);
    }
    if token.len() < 4 || token.chars().any(|c| c.is_ascii_digit()) || KEEP_AS_IS.contains(&token)
    {
        return token.to_string();
    }
    let mut word = token.to_string();
    if let Some(base) = word.strip_suffix("ies").filter(|b| b.len() >= 2) {
        word = format!("{base}y");
    } else if let Some(base) = word.strip_suffix("ing").filter(|b| b.len() >= 2) {
        word = undouble(base);
    } else if let Some(base) = word.strip_suffix("ed").filter(|b| b.len() >= 3) {
        word = undouble(base);
    } else if word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") {
        word.pop();
    }
    strip_final_e(&word)
}

fn strip_final_e(word: &str) -> String {
    if word.len() >= 4 && word.ends_with('e') && !word.ends_with("ee") {
        word[..word.len() - 1].to_string()
    } else {
        word.to_string()
    }
}

fn undouble(base: &str) -> String {
    let bytes = base.as_bytes();
    let n = bytes.len();
    if n >= 3 && bytes[n - 1] == bytes[n - 2] && !matches!(bytes[n - 1], b'l' | b's' | b'z' | b'e')
    {
        base[..n - 1].to_string()
    } else {
        base.to_string()
    }
}

/// Normalized content terms: tokenized, stopwords removed, inflections folded.
pub fn terms(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .map(|t| stem(&t))
        .collect()
}

pub fn term_set(text: &str) -> BTreeSet<String> {
    terms(text).into_iter().collect()
}

/// Number of distinct terms shared by the two sets.
pub fn overlap(a: &BTreeSet<String>, b: &BTreeSet<String>) -> usize {
    a.intersection(b).count()
}

/// Entity normalization: case-fold, strip punctuation, collapse whitespace.
pub fn normalize_entity(raw: &str) -> String {
    tokenize(raw).join(" ")
}

/// Splits text into sentences on `.`, `!`, `?` and newlines.
pub fn sentences(text: &str) -> Vec<&str> {
    text.split(['.', '!', '?', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Prefix of `text` at most `max_chars` characters long, cut on a char boundary.
pub fn truncate_chars(text: &str, max_chars: usize) -> String {
    let trimmed = text.trim();
    match trimmed.char_indices().nth(max_chars) {
        Some((idx, _)) => format!("{}...", trimmed[..idx].trim_end()),
        None => trimmed.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopword_table_is_sorted() {
        let mut sorted = STOPWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, STOPWORDS);
    }

    #[test]
    fn tokenize_folds_case_and_apostrophes() {
        assert_eq!(tokenize("I'm at Google, OK?"), vec!["im", "at", "google", "ok"]);
        assert_eq!(tokenize("2-space"), vec!["2", "space"]);
        assert!(tokenize("  ...  ").is_empty());
    }

    #[test]
    fn inflections_share_a_stem() {
        assert_eq!(stem("leaving"), stem("leave"));
        assert_eq!(stem("left"), stem("leave"));
        assert_eq!(stem("accepted"), stem("accept"));
        assert_eq!(stem("started"), "start");
        assert_eq!(stem("visited"), stem("visit"));
        assert_eq!(stem("stopped"), "stop");
        assert_eq!(stem("offers"), "offer");
        assert_eq!(stem("stories"), "story");
        assert_ne!(stem("startup"), stem("start"));
    }

    #[test]
    fn terms_drop_stopwords() {
        assert_eq!(terms("When did I leave Google?"), vec!["when", "leav", "googl"]);
        assert_eq!(terms("I accepted the offer"), vec!["accept", "offer"]);
    }

    #[test]
    fn entity_normalization() {
        assert_eq!(normalize_entity("  TechStartup,  Inc. "), "techstartup inc");
        assert_eq!(normalize_entity("Google"), "google");
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        assert_eq!(truncate_chars("héllo wörld", 5), "héllo...");
        assert_eq!(truncate_chars("short", 10), "short");
    }
}
