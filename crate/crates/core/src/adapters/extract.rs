//! Rule-based extraction of entities, temporal expressions, triples and
//! preference statements.
//!
//! Coverage is deliberately narrow: capitalized spans plus a seed dictionary
//! for entities, a bounded date grammar (ISO dates, month-year, month-day,
//! standalone years, `today`/`yesterday`, `last|this|next month|year`), and a
//! handful of first-person templates. New templates go in the `TEMPLATES`
//! style tables below.

use std::collections::BTreeMap;

use super::{ExtractedTriple, ExtractionResult, Extractor, PreferenceStatement, TemporalExpression};
use crate::error::Result;
use crate::text;
use crate::time::{Granularity, Timestamp};

const MONTHS: &[(&str, u32)] = &[
    ("january", 1),
    ("jan", 1),
    ("february", 2),
    ("feb", 2),
    ("march", 3),
    ("mar", 3),
    ("april", 4),
    ("apr", 4),
    ("may", 5),
    ("june", 6),
    ("jun", 6),
    ("july", 7),
    ("jul", 7),
    ("august", 8),
    ("aug", 8),
    ("september", 9),
    ("sep", 9),
    ("sept", 9),
    ("october", 10),
    ("oct", 10),
    ("november", 11),
    ("nov", 11),
    ("december", 12),
    ("dec", 12),
];

const WEEKDAYS: &[&str] = &[
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
];

const CORPORATE_SUFFIXES: &[&str] = &["inc", "corp", "corporation", "llc", "ltd", "co", "gmbh"];

const DEFAULT_SEEDS: &[&str] = &[
    "Google", "Microsoft", "Apple", "Amazon", "Meta", "OpenAI", "TypeScript", "JavaScript",
    "Python", "Rust", "Java", "Kotlin", "Swift", "Ruby", "Prettier", "React", "Vue", "Angular",
    "PhD",
];

const DIETS: &[&str] = &[
    "vegetarian", "vegan", "pescatarian", "omnivore", "carnivore", "keto", "paleo", "flexitarian",
];

const HEDGES: &[&str] = &[
    "thinking", "considering", "planning", "maybe", "might", "perhaps", "possibly", "hoping",
    "wondering", "unsure",
];

const REPORTED: &[&str] = &["said", "says", "according", "mentioned", "heard", "claims"];

const MILESTONES: &[&str] = &[
    "finally", "defended", "graduated", "promoted", "married", "engaged", "born", "won",
    "achieved", "milestone", "anniversary", "retired",
];

const IDENTITY_NOUNS: &[&str] = &[
    "name", "thesis", "phd", "dissertation", "birthday", "favorite", "favourite", "wife",
    "husband", "partner", "daughter", "son", "sister", "brother", "mother", "father", "mom", "dad",
    "hometown", "career", "degree", "job", "allergy", "pet", "dog", "cat",
];

/// Cue token sequences that introduce an employer entity.
const EMPLOYER_CUES: &[&[&str]] = &[
    &["job", "at"],
    &["work", "at"],
    &["work", "for"],
    &["working", "at"],
    &["working", "for"],
    &["joined"],
    &["offer", "from"],
    &["hired", "by"],
    &["employed", "by"],
];

const LOCATION_CUES: &[&[&str]] = &[&["live", "in"], &["living", "in"], &["moved", "to"]];

const IMPERATIVE_OPENERS: &[&str] = &[
    "always", "never", "use", "format", "prefer", "please", "write", "dont", "avoid", "keep",
    "make", "stick", "indent",
];

const NEGATORS: &[&str] = &["never", "not", "no", "avoid", "dont", "instead", "over", "without"];

const LANGUAGES: &[&str] = &[
    "typescript", "javascript", "python", "rust", "java", "kotlin", "swift", "ruby", "golang",
    "csharp", "cpp",
];

const FORMATTERS: &[&str] = &["prettier", "black", "rustfmt", "gofmt", "eslint", "autopep8"];

const COMPONENT_STYLES: &[&str] = &["functional", "class", "hooks"];

const WRITING_STYLES: &[&str] = &["formal", "casual", "concise", "detailed", "friendly", "terse"];

#[derive(Debug, Clone)]
struct Word {
    raw: String,
    lower: String,
    breaks_after: bool,
}

fn words(sentence: &str) -> Vec<Word> {
    sentence
        .split_whitespace()
        .filter_map(|w| {
            let trimmed = w.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                return None;
            }
            let tail = &w[w.rfind(trimmed).map(|i| i + trimmed.len()).unwrap_or(w.len())..];
            Some(Word {
                raw: trimmed.to_string(),
                lower: trimmed.to_lowercase(),
                breaks_after: tail.chars().any(|c| matches!(c, ',' | ';' | ':' | ')' | '"')),
            })
        })
        .collect()
}

fn month_number(word: &str) -> Option<u32> {
    MONTHS.iter().find(|(n, _)| *n == word).map(|(_, m)| *m)
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

fn has_inner_capital(word: &str) -> bool {
    word.chars().skip(1).any(char::is_uppercase)
}

fn is_pronoun_i(word: &Word) -> bool {
    word.lower == "i" || (word.raw.starts_with("I'") || word.raw.starts_with("I\u{2019}"))
        || matches!(word.lower.as_str(), "im" | "ive" | "ill" | "id")
        || word.lower.starts_with("i'")
        || word.lower.starts_with("i\u{2019}")
}

/// Deterministic extractor used by default and by every acceptance test.
#[derive(Debug, Clone)]
pub struct RuleExtractor {
    seeds: BTreeMap<String, String>,
}

impl Default for RuleExtractor {
    fn default() -> Self {
        Self::with_seeds(DEFAULT_SEEDS.iter().copied())
    }
}

impl RuleExtractor {
    pub fn with_seeds<'a>(seeds: impl IntoIterator<Item = &'a str>) -> Self {
        let seeds = seeds
            .into_iter()
            .map(|s| (s.to_lowercase(), text::normalize_entity(s)))
            .collect();
        RuleExtractor { seeds }
    }

    /// Entities of one sentence with the index of their first word.
    fn sentence_entities(&self, ws: &[Word]) -> Vec<(String, usize)> {
        let mut found: Vec<(String, usize)> = Vec::new();
        let mut span: Vec<usize> = Vec::new();
        let flush = |span: &mut Vec<usize>, found: &mut Vec<(String, usize)>| {
            let mut idx: Vec<usize> = std::mem::take(span);
            if idx.first() == Some(&0) {
                let w = &ws[0];
                if !self.seeds.contains_key(&w.lower) && !has_inner_capital(&w.raw) {
                    idx.remove(0);
                }
            }
            while idx
                .last()
                .is_some_and(|&i| CORPORATE_SUFFIXES.contains(&ws[i].lower.as_str()))
                && idx.len() > 1
            {
                idx.pop();
            }
            if let Some(&first) = idx.first() {
                let raw: Vec<&str> = idx.iter().map(|&i| ws[i].raw.as_str()).collect();
                let name = text::normalize_entity(&raw.join(" "));
                if !name.is_empty() {
                    found.push((name, first));
                }
            }
        };
        for (i, w) in ws.iter().enumerate() {
            let excluded = is_pronoun_i(w)
                || month_number(&w.lower).is_some()
                || WEEKDAYS.contains(&w.lower.as_str())
                || w.raw.chars().next().is_some_and(|c| c.is_ascii_digit());
            if is_capitalized(&w.raw) && !excluded {
                span.push(i);
                if w.breaks_after {
                    flush(&mut span, &mut found);
                }
            } else {
                flush(&mut span, &mut found);
                if let Some(norm) = self.seeds.get(&w.lower) {
                    if !found.iter().any(|(n, _)| n == norm) {
                        found.push((norm.clone(), i));
                    }
                }
            }
        }
        flush(&mut span, &mut found);
        found
    }
}

fn temporal_expressions(ws: &[Word], anchor: Timestamp) -> Vec<TemporalExpression> {
    let mut out = Vec::new();
    let mut i = 0;
    let year_of = |w: &Word| -> Option<i32> {
        (w.lower.len() == 4)
            .then(|| w.lower.parse::<i32>().ok())
            .flatten()
            .filter(|y| (1900..=2100).contains(y))
    };
    let day_of = |w: &Word| -> Option<u32> {
        let digits = w.lower.trim_end_matches(|c: char| c.is_ascii_alphabetic());
        digits.parse::<u32>().ok().filter(|d| (1..=31).contains(d))
    };
    while i < ws.len() {
        let w = &ws[i];
        let next = ws.get(i + 1);
        let next2 = ws.get(i + 2);
        let prev = i.checked_sub(1).map(|p| ws[p].lower.as_str());

        // ISO forms survive whitespace splitting intact.
        if w.lower.len() >= 7 && w.lower.as_bytes()[4] == b'-' && w.lower[..4].parse::<i32>().is_ok() {
            if let Ok(ts) = w.lower.parse::<Timestamp>() {
                out.push(TemporalExpression { surface: w.raw.clone(), resolved: ts });
                i += 1;
                continue;
            }
        }
        if let Some(month) = month_number(&w.lower) {
            // "may" is only a month when capitalized.
            let plausible = w.lower != "may" || is_capitalized(&w.raw);
            if plausible {
                if let (Some(d), Some(y)) = (next.and_then(day_of), next2.and_then(year_of)) {
                    if let Some(ts) = checked_day(y, month, d) {
                        out.push(TemporalExpression {
                            surface: format!("{} {} {}", w.raw, next.unwrap().raw, next2.unwrap().raw),
                            resolved: ts,
                        });
                        i += 3;
                        continue;
                    }
                }
                if let Some(y) = next.and_then(year_of) {
                    out.push(TemporalExpression {
                        surface: format!("{} {}", w.raw, next.unwrap().raw),
                        resolved: Timestamp::month(y, month),
                    });
                    i += 2;
                    continue;
                }
                let inferred_year = infer_year(anchor, month);
                if let Some(d) = next.and_then(day_of) {
                    let resolved = inferred_year
                        .and_then(|y| checked_day(y, month, d))
                        .unwrap_or_else(Timestamp::unknown);
                    out.push(TemporalExpression {
                        surface: format!("{} {}", w.raw, next.unwrap().raw),
                        resolved,
                    });
                    i += 2;
                    continue;
                }
                if matches!(prev, Some("in" | "since" | "during" | "last" | "this" | "until" | "by")) {
                    let resolved = inferred_year
                        .map(|y| Timestamp::month(y, month))
                        .unwrap_or_else(Timestamp::unknown);
                    out.push(TemporalExpression { surface: w.raw.clone(), resolved });
                    i += 1;
                    continue;
                }
            }
        }
        if let Some(y) = year_of(w) {
            if matches!(prev, Some("in" | "since" | "during" | "of" | "until" | "by")) {
                out.push(TemporalExpression { surface: w.raw.clone(), resolved: Timestamp::year(y) });
                i += 1;
                continue;
            }
        }
        let relative = match w.lower.as_str() {
            "today" | "tonight" => Some((w.raw.clone(), day_level(anchor))),
            "yesterday" => Some((w.raw.clone(), day_level(anchor).shift_days(-1))),
            "tomorrow" => Some((w.raw.clone(), day_level(anchor).shift_days(1))),
            "last" | "this" | "next" => next.and_then(|n| {
                let shift = match w.lower.as_str() {
                    "last" => -1,
                    "this" => 0,
                    _ => 1,
                };
                let surface = format!("{} {}", w.raw, n.raw);
                match n.lower.as_str() {
                    "month" if anchor.is_known() => Some((
                        surface,
                        anchor.at_granularity(Granularity::Month).shift_months(shift),
                    )),
                    "year" if anchor.is_known() => Some((
                        surface,
                        anchor.at_granularity(Granularity::Year).shift_months(12 * shift),
                    )),
                    _ => None,
                }
            }),
            _ => None,
        };
        if let Some((surface, resolved)) = relative {
            let width = surface.split_whitespace().count();
            out.push(TemporalExpression { surface, resolved });
            i += width;
            continue;
        }
        i += 1;
    }
    out
}

fn checked_day(y: i32, m: u32, d: u32) -> Option<Timestamp> {
    chrono::NaiveDate::from_ymd_opt(y, m, d).map(|_| Timestamp::day(y, m, d))
}

fn day_level(anchor: Timestamp) -> Timestamp {
    anchor.at_granularity(Granularity::Day)
}

/// Year for a bare month name: the anchor's year, or the year before when the
/// month would otherwise lie in the future.
fn infer_year(anchor: Timestamp, month: u32) -> Option<i32> {
    use chrono::Datelike;
    let at = anchor.instant()?;
    if anchor.granularity() == Granularity::Year {
        return Some(at.year());
    }
    Some(if month > at.month() { at.year() - 1 } else { at.year() })
}

fn contains_seq(tokens: &[String], seq: &[&str]) -> Option<usize> {
    if seq.is_empty() || tokens.len() < seq.len() {
        return None;
    }
    (0..=tokens.len() - seq.len()).find(|&i| seq.iter().enumerate().all(|(k, s)| tokens[i + k] == *s))
}

fn confidence_class(tokens: &[String]) -> f64 {
    let has = |set: &[&str]| tokens.iter().any(|t| set.contains(&t.as_str()));
    if has(HEDGES) || contains_seq(tokens, &["want", "to"]).is_some() {
        0.5
    } else if has(REPORTED) || contains_seq(tokens, &["told", "me"]).is_some() {
        0.6
    } else {
        0.9
    }
}

fn is_first_person(tokens: &[String]) -> bool {
    tokens
        .iter()
        .any(|t| matches!(t.as_str(), "i" | "im" | "ive" | "id" | "my" | "me" | "mine"))
}

fn trim_phrase(tokens: &[String], max: usize) -> Option<String> {
    let mut t: Vec<&str> = tokens.iter().map(String::as_str).collect();
    while t.first().is_some_and(|w| matches!(*w, "a" | "an" | "the" | "really" | "very")) {
        t.remove(0);
    }
    t.truncate(max);
    while t.last().is_some_and(|w| text::is_stopword(w)) {
        t.pop();
    }
    (!t.is_empty()).then(|| t.join(" "))
}

fn user_triples(
    tokens: &[String],
    entities: &[(String, usize)],
    entity_token_pos: &BTreeMap<String, usize>,
) -> Vec<ExtractedTriple> {
    let mut out = Vec::new();
    if !is_first_person(tokens) {
        return out;
    }
    let confidence = confidence_class(tokens);
    let mut push = |predicate: &str, object: String| {
        if !out.iter().any(|t: &ExtractedTriple| t.predicate == predicate && t.object == object) {
            out.push(ExtractedTriple {
                subject: "user".into(),
                predicate: predicate.into(),
                object,
                confidence,
            });
        }
    };

    let negated_at = |i: usize| {
        i > 0 && matches!(tokens[i - 1].as_str(), "not" | "no" | "never" | "longer")
    };
    if let Some((i, diet)) = tokens
        .iter()
        .enumerate()
        .rev()
        .find(|(_, t)| DIETS.contains(&t.as_str()))
    {
        if !negated_at(i) {
            push("diet", diet.clone());
        }
    }

    let entity_after = |cue_end: usize| {
        entities
            .iter()
            .filter_map(|(e, _)| entity_token_pos.get(e).map(|&p| (p, e)))
            .filter(|(p, _)| *p >= cue_end)
            .min()
            .map(|(_, e)| e.clone())
    };
    for cue in EMPLOYER_CUES {
        if let Some(at) = contains_seq(tokens, cue) {
            if let Some(e) = entity_after(at + cue.len()) {
                push("employer", e);
                break;
            }
        }
    }
    for cue in LOCATION_CUES {
        if let Some(at) = contains_seq(tokens, cue) {
            let place = entity_after(at + cue.len())
                .or_else(|| trim_phrase(&tokens[at + cue.len()..], 3));
            if let Some(p) = place {
                push("location", p);
                break;
            }
        }
    }

    // "my <attribute> is|was|are <value>"
    if let Some(my) = tokens.iter().position(|t| t == "my") {
        if let Some(off) = tokens[my + 1..]
            .iter()
            .take(4)
            .position(|t| matches!(t.as_str(), "is" | "was" | "are" | "were"))
        {
            let cop = my + 1 + off;
            let attr = tokens[my + 1..cop].join(" ");
            if !attr.is_empty() {
                if let Some(value) = trim_phrase(&tokens[cop + 1..], 6) {
                    push(&attr, value);
                }
            }
        }
    }

    // "i love|like|enjoy X" (but not "like to")
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && tokens[i - 1] == "i" && matches!(t.as_str(), "love" | "like" | "enjoy") {
            if tokens.get(i + 1).is_some_and(|n| n == "to") {
                continue;
            }
            if let Some(obj) = trim_phrase(&tokens[i + 1..], 4) {
                push("likes", obj);
            }
        }
    }

    // "i'm a|an X" / "i am a|an X"
    for (i, t) in tokens.iter().enumerate() {
        let copular = t == "im" || (t == "am" && i > 0 && tokens[i - 1] == "i");
        if copular && tokens.get(i + 1).is_some_and(|n| n == "a" || n == "an") {
            if let Some(role) = trim_phrase(&tokens[i + 2..], 3) {
                push("role", role);
            }
        }
    }
    out
}

fn is_directive(tokens: &[String]) -> bool {
    let first = tokens.first().map(String::as_str).unwrap_or("");
    IMPERATIVE_OPENERS.contains(&first)
        || contains_seq(tokens, &["i", "prefer"]).is_some()
        || contains_seq(tokens, &["i", "like", "to"]).is_some()
        || contains_seq(tokens, &["i", "want", "you"]).is_some()
        || contains_seq(tokens, &["id", "rather"]).is_some()
}

/// First mention from `vocab` that is not negated by a preceding cue.
fn positive_mention(tokens: &[String], vocab: &[&str]) -> Option<String> {
    let mut negating = false;
    for t in tokens {
        if NEGATORS.contains(&t.as_str()) {
            negating = true;
            continue;
        }
        if vocab.contains(&t.as_str()) {
            if !negating {
                return Some(t.clone());
            }
            negating = false;
        }
    }
    None
}

fn preference_statements(tokens: &[String], sentence: &str) -> Vec<PreferenceStatement> {
    if !is_directive(tokens) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut push = |domain: &str, attribute: &str, value: String| {
        out.push(PreferenceStatement {
            domain: domain.into(),
            attribute: attribute.into(),
            value,
            statement: sentence.trim().to_string(),
        });
    };
    if let Some(lang) = positive_mention(tokens, LANGUAGES) {
        push("code", "language", lang);
    }
    let formatter = tokens.iter().find(|t| FORMATTERS.contains(&t.as_str())).cloned();
    let indentation = tokens.windows(2).find_map(|w| {
        (w[0].parse::<u32>().is_ok() && (w[1] == "space" || w[1] == "spaces"))
            .then(|| format!("{}-space", w[0]))
    });
    let indentation = indentation.or_else(|| tokens.iter().any(|t| t == "tabs").then(|| "tabs".into()));
    let format_value: Vec<String> = formatter.into_iter().chain(indentation).collect();
    if !format_value.is_empty() {
        push("code", "formatting", format_value.join(" "));
    }
    if tokens.iter().any(|t| t == "component" || t == "components") {
        if let Some(style) = positive_mention(tokens, COMPONENT_STYLES) {
            push("code", "component_style", style);
        }
    }
    let about_writing = tokens
        .iter()
        .any(|t| matches!(t.as_str(), "response" | "responses" | "answers" | "tone" | "replies" | "emails"));
    if about_writing {
        if let Some(style) = positive_mention(tokens, WRITING_STYLES) {
            push("writing", "style", style);
        }
    }
    out
}

fn identity_cue(tokens: &[String]) -> bool {
    tokens.iter().enumerate().any(|(i, t)| {
        t == "my"
            && tokens[i + 1..]
                .iter()
                .take(3)
                .any(|n| IDENTITY_NOUNS.contains(&n.as_str()))
    })
}

impl Extractor for RuleExtractor {
    fn extract(&self, input: &str, _speaker: &str, timestamp: Timestamp) -> Result<ExtractionResult> {
        let mut result = ExtractionResult::default();
        for sentence in text::sentences(input) {
            let ws = words(sentence);
            let tokens = text::tokenize(sentence);
            let entities = self.sentence_entities(&ws);
            let positions: BTreeMap<String, usize> = entities
                .iter()
                .filter_map(|(e, _)| {
                    let etoks: Vec<&str> = e.split(' ').collect();
                    contains_seq(&tokens, &etoks).map(|p| (e.clone(), p))
                })
                .collect();

            result.temporal_expressions.extend(temporal_expressions(&ws, timestamp));
            let triples = user_triples(&tokens, &entities, &positions);
            let prefs = preference_statements(&tokens, sentence);
            result.identity_flag |= !triples.is_empty() || !prefs.is_empty() || identity_cue(&tokens);
            result.milestone |= tokens.iter().any(|t| MILESTONES.contains(&t.as_str()));
            result.triples.extend(triples);
            result.preference_statements.extend(prefs);
            result.entities.extend(entities.into_iter().map(|(e, _)| e));
        }
        Ok(result)
    }
}
