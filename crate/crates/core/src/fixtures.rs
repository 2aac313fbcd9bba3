//! Scripted conversations and probe suites used by the examples, the CLI
//! smoke tests and the acceptance suite.
//!
//! Every builder is deterministic. [`to_jsonl`] renders turns in the CLI's
//! line-delimited wire format.

use crate::config::EngineConfig;
use crate::hippocampus::ConversationTurn;
use crate::metrics::Probe;
use crate::time::Timestamp;

fn ts(s: &str) -> Timestamp {
    s.parse().expect("fixture timestamps are valid")
}

fn turn(session: &str, n: u32, text: &str, at: &str) -> ConversationTurn {
    ConversationTurn::new(session, n, "user", text, ts(at))
}

/// Renders turns one JSON object per line.
pub fn to_jsonl(turns: &[ConversationTurn]) -> String {
    let mut out = String::new();
    for t in turns {
        out.push_str(&serde_json::to_string(t).expect("turns serialize"));
        out.push('\n');
    }
    out
}

/// Renders probes one JSON object per line.
pub fn probes_to_jsonl(probes: &[Probe]) -> String {
    let mut out = String::new();
    for p in probes {
        out.push_str(&serde_json::to_string(p).expect("probes serialize"));
        out.push('\n');
    }
    out
}

/// A new job, a tentative departure, and a later offer elsewhere, spread
/// over eight sessions.
pub fn job_change() -> Vec<ConversationTurn> {
    vec![
        turn("S1", 1, "I just started my new job at Google.", "2023-01-10"),
        turn("S2", 1, "The weather has been rainy all week.", "2023-01-24"),
        turn("S3", 1, "Been cooking a lot more pasta lately.", "2023-02-07"),
        turn("S4", 1, "Reading a good book about gardening.", "2023-02-21"),
        turn("S5", 1, "I'm thinking of leaving Google for a startup.", "2023-03-14"),
        turn("S6", 1, "Went for a long walk by the river.", "2023-04-11"),
        turn("S7", 1, "Trying to sleep earlier these days.", "2023-05-09"),
        turn("S8", 1, "I accepted the offer from TechStartup Inc.", "2023-06-13"),
    ]
}

/// The departure question plus two direct lookups on the same timeline.
pub fn job_change_probes() -> Vec<Probe> {
    vec![
        Probe::temporal("When did I leave Google?", "2023-06"),
        Probe::temporal("When did I start my job at Google?", "2023-01"),
        Probe::temporal("When did I accept the offer from TechStartup?", "2023-06"),
    ]
}

pub const DEPARTURE_QUERY: &str = "When did I leave Google?";

/// Diet statements months apart; run a consolidation cycle after each.
pub fn diet_revisions() -> Vec<ConversationTurn> {
    vec![
        turn("S2", 1, "I'm vegetarian for health reasons.", "2023-02-06"),
        turn("S15", 1, "I've started eating fish occasionally, pescatarian now.", "2023-06-12"),
        turn("S28", 1, "I'm back to being fully vegetarian.", "2023-11-20"),
    ]
}

pub const THESIS_TEXT: &str = "I finally defended my PhD thesis today! Five years of work on neural memory models.";

const FILLER_SUBJECTS: [&str; 11] = [
    "the garage", "the balcony plants", "the bike chain", "the kitchen shelves", "the old photos",
    "the spare room", "the laundry pile", "the bookshelf", "the fish tank", "the hallway lamp",
    "the winter coats",
];
const FILLER_ACTIONS: [&str; 6] = ["Tidied up", "Spent an hour on", "Finally sorted", "Cleaned", "Rearranged", "Looked over"];

/// `n` short, unremarkable turns with no entities, dates or first-person
/// statements. Distinct for `n ≤ 66`.
pub fn filler_texts(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let action = FILLER_ACTIONS[i % FILLER_ACTIONS.len()];
            let subject = FILLER_SUBJECTS[(i / FILLER_ACTIONS.len() + i) % FILLER_SUBJECTS.len()];
            format!("{action} {subject} in the afternoon, round {}.", i + 1)
        })
        .collect()
}

/// A milestone followed by `fillers` single-turn filler sessions, one per
/// day.
pub fn thesis_then_fillers(fillers: usize) -> Vec<ConversationTurn> {
    let start = ts("2023-09-14");
    let mut out = vec![ConversationTurn::new("T0", 1, "user", THESIS_TEXT, start)];
    for (i, text) in filler_texts(fillers).into_iter().enumerate() {
        let at = start.shift_days(i as i64 + 1);
        out.push(ConversationTurn::new(&format!("T{}", i + 1), 1, "user", &text, at));
    }
    out
}

/// Engine configuration for the thesis scenario: an episodic cap of five.
pub fn thesis_config() -> EngineConfig {
    EngineConfig {
        cap_hippocampus: 5,
        ..EngineConfig::default()
    }
}

pub fn thesis_probe() -> Probe {
    Probe::identity("Did I finish my PhD thesis?", &["phd", "thesis"])
}

/// Three coding preferences, each stated in two sessions.
pub fn coding_preferences() -> Vec<ConversationTurn> {
    vec![
        turn("P1", 1, "Always use TypeScript, never plain JavaScript.", "2023-03-01"),
        turn("P1", 2, "Format code with Prettier, 2-space indentation.", "2023-03-01"),
        turn("P1", 3, "I prefer functional components over class components in React.", "2023-03-01"),
        turn("P2", 1, "Use TypeScript for this one too, not JavaScript.", "2023-03-08"),
        turn("P2", 2, "Format it with Prettier and 2-space indents again.", "2023-03-08"),
        turn("P2", 3, "I prefer functional components with hooks, as usual.", "2023-03-08"),
    ]
}

pub const CODE_TASK: &str = "Write a login form component for the dashboard app";

const PLACE_PREFIXES: [&str; 5] = ["Port", "Lake", "Mount", "Glen", "North"];
const PLACE_NAMES: [&str; 10] = [
    "Alder", "Birch", "Cedar", "Dunmore", "Elmsworth", "Fairview", "Granby", "Hollis", "Ivel", "Juniper",
];
const MONTH_NAMES: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
    "November", "December",
];

/// Fifty trips to distinct places, one per session, with the month and year
/// of each trip stated in the turn.
pub fn trips() -> (Vec<ConversationTurn>, Vec<Probe>) {
    let mut turns = Vec::new();
    let mut probes = Vec::new();
    let told = ts("2024-02-01");
    for (i, (prefix, name)) in PLACE_PREFIXES
        .iter()
        .flat_map(|p| PLACE_NAMES.iter().map(move |n| (p, n)))
        .enumerate()
    {
        let place = format!("{prefix} {name}");
        let year = 2019 + (i % 5) as i32;
        let month = (i * 7) % 12;
        let text = format!("I visited {place} in {} {year}.", MONTH_NAMES[month]);
        turns.push(ConversationTurn::new(
            &format!("V{}", i + 1),
            1,
            "user",
            &text,
            told.shift_days(i as i64),
        ));
        probes.push(Probe::temporal(
            &format!("When did I visit {place}?"),
            &format!("{year}-{:02}", month + 1),
        ));
    }
    (turns, probes)
}

const FAVORITES: [(&str, &str); 10] = [
    ("color", "teal"),
    ("food", "ramen"),
    ("book", "Dune"),
    ("band", "Radiohead"),
    ("sport", "tennis"),
    ("city", "Kyoto"),
    ("movie", "Alien"),
    ("animal", "otter"),
    ("season", "autumn"),
    ("drink", "matcha"),
];

/// Ten personal facts followed by `fillers` filler sessions.
pub fn favorites_then_fillers(fillers: usize) -> (Vec<ConversationTurn>, Vec<Probe>) {
    let start = ts("2023-05-01");
    let mut turns = Vec::new();
    let mut probes = Vec::new();
    for (i, (thing, value)) in FAVORITES.iter().enumerate() {
        turns.push(ConversationTurn::new(
            &format!("F{}", i + 1),
            1,
            "user",
            &format!("My favorite {thing} is {value}."),
            start.shift_days(i as i64),
        ));
        probes.push(Probe::identity(&format!("What is my favorite {thing}?"), &[&value.to_lowercase()]));
    }
    for (i, text) in filler_texts(fillers).into_iter().enumerate() {
        turns.push(ConversationTurn::new(
            &format!("G{}", i + 1),
            1,
            "user",
            &text,
            start.shift_days((FAVORITES.len() + i) as i64),
        ));
    }
    (turns, probes)
}

/// Episodic cap used to put the favorites scenario under pressure.
pub const FAVORITES_CAP: usize = 20;

pub fn favorites_config() -> EngineConfig {
    EngineConfig {
        cap_hippocampus: FAVORITES_CAP,
        cap_amygdala: FAVORITES_CAP,
        ..EngineConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn fillers_are_distinct() {
        let f = filler_texts(66);
        assert_eq!(f.iter().collect::<BTreeSet<_>>().len(), 66);
    }

    #[test]
    fn trips_are_distinct() {
        let (turns, probes) = trips();
        assert_eq!(turns.len(), 50);
        assert_eq!(probes.len(), 50);
        assert_eq!(turns.iter().map(|t| &t.text).collect::<BTreeSet<_>>().len(), 50);
    }

    #[test]
    fn shipped_files_match_builders() {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
        let read = |name: &str| std::fs::read_to_string(format!("{dir}/{name}")).unwrap();
        assert_eq!(read("job_change.jsonl"), to_jsonl(&job_change()));
        assert_eq!(read("job_change_probes.jsonl"), probes_to_jsonl(&job_change_probes()));
        assert_eq!(read("diet_revisions.jsonl"), to_jsonl(&diet_revisions()));
        assert_eq!(read("coding_preferences.jsonl"), to_jsonl(&coding_preferences()));
        let (turns, probes) = trips();
        assert_eq!(read("trips.jsonl"), to_jsonl(&turns));
        assert_eq!(read("trips_probes.jsonl"), probes_to_jsonl(&probes));
    }
}
