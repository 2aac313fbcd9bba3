//! Unified storage for every record kind.
//!
//! Each kind lives in its own [`Table`], keyed by the store-wide creation
//! counter, so iteration order is insertion order. Tables can carry one
//! secondary key (entity for timeline events, trace ref for salience records,
//! subject/predicate for facts, pattern key for procedural patterns).
//!
//! The canonical form of a store is one line-delimited JSON file per table,
//! each line an object with lexicographically sorted field names. The state
//! digest and the `.bma` archive are both built from that form, so an archive
//! round trip reproduces the digest exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::amygdala::SalienceRecord;
use crate::config::EngineConfig;
use crate::error::{MemoryError, Result};
use crate::hippocampus::{EpisodicTrace, WmItem};
use crate::procedural::ProceduralPattern;
use crate::semantic::SemanticFact;
use crate::storyarc::TimelineEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Episodic,
    Semantic,
    Timeline,
    Salience,
    Procedural,
}

impl RecordKind {
    fn tag(self) -> &'static str {
        match self {
            RecordKind::Episodic => "ep",
            RecordKind::Semantic => "sf",
            RecordKind::Timeline => "tl",
            RecordKind::Salience => "sa",
            RecordKind::Procedural => "pp",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "ep" => RecordKind::Episodic,
            "sf" => RecordKind::Semantic,
            "tl" => RecordKind::Timeline,
            "sa" => RecordKind::Salience,
            "pp" => RecordKind::Procedural,
            _ => return None,
        })
    }
}

/// Store-scoped identifier: the creation counter plus a kind tag.
///
/// Ordering follows creation order. Text form is `<tag>:<seq>`, e.g. `ep:0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MemoryId {
    seq: u64,
    kind: RecordKind,
}

impl MemoryId {
    pub(crate) fn new(kind: RecordKind, seq: u64) -> Self {
        MemoryId { seq, kind }
    }

    /// Placeholder carried by records that have not been stored yet.
    pub(crate) fn unassigned(kind: RecordKind) -> Self {
        MemoryId { seq: u64::MAX, kind }
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn kind(&self) -> RecordKind {
        self.kind
    }
}

impl fmt::Display for MemoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.tag(), self.seq)
    }
}

impl FromStr for MemoryId {
    type Err = MemoryError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || MemoryError::invariant("id", format!("malformed memory id `{s}`"));
        let (tag, seq) = s.split_once(':').ok_or_else(bad)?;
        let kind = RecordKind::from_tag(tag).ok_or_else(bad)?;
        let seq = seq.parse().map_err(|_| bad())?;
        Ok(MemoryId { seq, kind })
    }
}

impl Serialize for MemoryId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MemoryId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// A record kind that lives in a [`Table`] of the store.
pub trait Record: Clone + Serialize + DeserializeOwned {
    const KIND: RecordKind;
    /// File name of the table inside archives.
    const FILE: &'static str;

    fn id(&self) -> MemoryId;
    fn set_id(&mut self, id: MemoryId);
    fn validate(&self) -> Result<()>;

    /// Secondary lookup key, if the table maintains one.
    fn index_key(&self) -> Option<String> {
        None
    }

    fn table(state: &StoreState) -> &Table<Self>;
    fn table_mut(state: &mut StoreState) -> &mut Table<Self>;
}

/// Rows ordered by creation counter, with an optional secondary index.
#[derive(Debug, Clone)]
pub struct Table<T> {
    rows: BTreeMap<u64, T>,
    index: HashMap<String, BTreeSet<u64>>,
}

impl<T> Default for Table<T> {
    fn default() -> Self {
        Table {
            rows: BTreeMap::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Record> Table<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: MemoryId) -> Option<&T> {
        if id.kind != T::KIND {
            return None;
        }
        self.rows.get(&id.seq)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &T> + '_ {
        self.rows.values()
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = MemoryId> + '_ {
        self.rows.keys().map(|&seq| MemoryId::new(T::KIND, seq))
    }

    /// Rows whose secondary key equals `key`, in creation order.
    pub fn by_key<'a>(&'a self, key: &str) -> impl Iterator<Item = &'a T> + 'a {
        self.index
            .get(key)
            .into_iter()
            .flat_map(move |seqs| seqs.iter().filter_map(move |s| self.rows.get(s)))
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> + '_ {
        self.index.keys()
    }

    fn insert(&mut self, row: T) {
        let seq = row.id().seq;
        if let Some(key) = row.index_key() {
            self.index.entry(key).or_default().insert(seq);
        }
        self.rows.insert(seq, row);
    }

    fn unindex(&mut self, seq: u64, key: Option<String>) {
        if let Some(key) = key {
            if let Some(set) = self.index.get_mut(&key) {
                set.remove(&seq);
                if set.is_empty() {
                    self.index.remove(&key);
                }
            }
        }
    }

    fn remove(&mut self, id: MemoryId) -> Option<T> {
        if id.kind != T::KIND {
            return None;
        }
        let row = self.rows.remove(&id.seq)?;
        self.unindex(id.seq, row.index_key());
        Some(row)
    }

    fn update<R>(&mut self, id: MemoryId, f: impl FnOnce(&mut T) -> R) -> Option<R> {
        if id.kind != T::KIND {
            return None;
        }
        let row = self.rows.get_mut(&id.seq)?;
        let before = row.index_key();
        let out = f(row);
        row.set_id(id);
        let after = row.index_key();
        if before != after {
            self.unindex(id.seq, before);
            if let Some(key) = after {
                self.index.entry(key).or_default().insert(id.seq);
            }
        }
        Some(out)
    }

    /// Visits every row filed under `key`. `f` must leave the key unchanged.
    pub(crate) fn for_each_keyed_mut(&mut self, key: &str, mut f: impl FnMut(&mut T)) {
        if let Some(seqs) = self.index.get(key) {
            for s in seqs {
                if let Some(row) = self.rows.get_mut(s) {
                    f(row);
                }
            }
        }
    }

    /// In-place edit that must leave the index key unchanged.
    pub(crate) fn update_unkeyed(&mut self, id: MemoryId, f: impl FnOnce(&mut T)) -> bool {
        match self.rows.get_mut(&id.seq).filter(|_| id.kind == T::KIND) {
            Some(row) => {
                f(row);
                debug_assert_eq!(row.id(), id);
                true
            }
            None => false,
        }
    }

    fn canonical_lines(&self) -> String {
        let mut out = String::new();
        for row in self.rows.values() {
            out.push_str(&canonical_json(row));
            out.push('\n');
        }
        out
    }
}

/// Compact JSON with lexicographically sorted object keys.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .expect("records serialize to JSON")
        .to_string()
}

/// The complete persistent state of one memory engine.
#[derive(Debug, Clone)]
pub struct StoreState {
    pub(crate) next_seq: u64,
    pub(crate) config: EngineConfig,
    pub(crate) episodic: Table<EpisodicTrace>,
    pub(crate) semantic: Table<SemanticFact>,
    pub(crate) timeline: Table<TimelineEvent>,
    pub(crate) salience: Table<SalienceRecord>,
    pub(crate) procedural: Table<ProceduralPattern>,
    pub(crate) working_memory: VecDeque<WmItem>,
}

/// Record counts per store.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub episodic: usize,
    pub semantic: usize,
    pub timeline: usize,
    pub salience: usize,
    pub procedural: usize,
    pub working_memory: usize,
}

pub(crate) const WORKING_MEMORY_FILE: &str = "working_memory.jsonl";

impl StoreState {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(StoreState {
            next_seq: 0,
            config,
            episodic: Table::default(),
            semantic: Table::default(),
            timeline: Table::default(),
            salience: Table::default(),
            procedural: Table::default(),
            working_memory: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Replaces the configuration of a writable store.
    pub(crate) fn set_config(&mut self, config: EngineConfig) -> Result<()> {
        self.ensure_writable()?;
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn is_frozen(&self) -> bool {
        self.config.frozen
    }

    pub(crate) fn ensure_writable(&self) -> Result<()> {
        if self.config.frozen {
            Err(MemoryError::FrozenState)
        } else {
            Ok(())
        }
    }

    pub fn freeze(&mut self) {
        self.config.frozen = true;
    }

    pub fn table<T: Record>(&self) -> &Table<T> {
        T::table(self)
    }

    /// Stores `record` under a fresh id. Capacity is not enforced here.
    pub fn put_record<T: Record>(&mut self, mut record: T) -> Result<MemoryId> {
        self.ensure_writable()?;
        record.validate()?;
        let id = MemoryId::new(T::KIND, self.next_seq);
        self.next_seq += 1;
        record.set_id(id);
        T::table_mut(self).insert(record);
        Ok(id)
    }

    /// All records of kind `T` accepted by `filter`, in insertion order.
    pub fn scan<T: Record>(&self, filter: impl Fn(&T) -> bool) -> Vec<&T> {
        T::table(self).iter().filter(|r| filter(r)).collect()
    }

    pub fn get<T: Record>(&self, id: MemoryId) -> Option<&T> {
        T::table(self).get(id)
    }

    pub fn len<T: Record>(&self) -> usize {
        T::table(self).len()
    }

    pub fn is_empty<T: Record>(&self) -> bool {
        T::table(self).len() == 0
    }

    /// Applies `f` to a stored record, re-validating it afterwards.
    pub(crate) fn update<T: Record, R>(
        &mut self,
        id: MemoryId,
        f: impl FnOnce(&mut T) -> R,
    ) -> Result<R> {
        self.ensure_writable()?;
        let table = T::table_mut(self);
        let out = table.update(id, f).ok_or(MemoryError::UnknownId(id))?;
        T::table(self)
            .get(id)
            .expect("row updated above")
            .validate()?;
        Ok(out)
    }

    pub(crate) fn remove<T: Record>(&mut self, id: MemoryId) -> Result<Option<T>> {
        self.ensure_writable()?;
        Ok(T::table_mut(self).remove(id))
    }

    pub fn working_memory(&self) -> &VecDeque<WmItem> {
        &self.working_memory
    }

    pub fn counts(&self) -> RecordCounts {
        RecordCounts {
            episodic: self.episodic.len(),
            semantic: self.semantic.len(),
            timeline: self.timeline.len(),
            salience: self.salience.len(),
            procedural: self.procedural.len(),
            working_memory: self.working_memory.len(),
        }
    }

    pub(crate) fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Canonical record files: `(file name, line-delimited content)`.
    pub fn canonical_files(&self) -> Vec<(&'static str, String)> {
        let mut wm = String::new();
        for item in &self.working_memory {
            wm.push_str(&canonical_json(item));
            wm.push('\n');
        }
        vec![
            (EpisodicTrace::FILE, self.episodic.canonical_lines()),
            (SemanticFact::FILE, self.semantic.canonical_lines()),
            (TimelineEvent::FILE, self.timeline.canonical_lines()),
            (SalienceRecord::FILE, self.salience.canonical_lines()),
            (ProceduralPattern::FILE, self.procedural.canonical_lines()),
            (WORKING_MEMORY_FILE, wm),
        ]
    }

    /// SHA-256 over the canonical serialization, as lowercase hex.
    pub fn state_digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"soulmem-state v1\n");
        hasher.update(format!("config {}\n", canonical_json(&self.config)));
        hasher.update(format!("next_seq {}\n", self.next_seq));
        for (name, content) in self.canonical_files() {
            let lines = content.lines().count();
            hasher.update(format!("== {name} {lines}\n"));
            hasher.update(content.as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Rebuilds a store from its canonical parts. Used by archive import.
    pub(crate) fn from_canonical(
        config: EngineConfig,
        next_seq: u64,
        files: &HashMap<String, String>,
    ) -> Result<Self> {
        let mut state = StoreState::new(config)?;
        state.next_seq = next_seq;
        load_table::<EpisodicTrace>(&mut state, files)?;
        load_table::<SemanticFact>(&mut state, files)?;
        load_table::<TimelineEvent>(&mut state, files)?;
        load_table::<SalienceRecord>(&mut state, files)?;
        load_table::<ProceduralPattern>(&mut state, files)?;
        let wm = files
            .get(WORKING_MEMORY_FILE)
            .ok_or_else(|| MemoryError::ArchiveCorrupt(format!("missing {WORKING_MEMORY_FILE}")))?;
        for (n, line) in wm.lines().enumerate() {
            let item: WmItem = serde_json::from_str(line).map_err(|e| {
                MemoryError::ArchiveCorrupt(format!("{WORKING_MEMORY_FILE} line {}: {e}", n + 1))
            })?;
            state.working_memory.push_back(item);
        }
        if state.working_memory.len() > state.config.cap_working_memory {
            return Err(MemoryError::ArchiveCorrupt("working memory exceeds its cap".into()));
        }
        Ok(state)
    }
}

fn load_table<T: Record>(state: &mut StoreState, files: &HashMap<String, String>) -> Result<()> {
    let content = files
        .get(T::FILE)
        .ok_or_else(|| MemoryError::ArchiveCorrupt(format!("missing {}", T::FILE)))?;
    let corrupt = |n: usize, why: String| {
        MemoryError::ArchiveCorrupt(format!("{} line {}: {why}", T::FILE, n + 1))
    };
    for (n, line) in content.lines().enumerate() {
        let row: T = serde_json::from_str(line).map_err(|e| corrupt(n, e.to_string()))?;
        let id = row.id();
        if id.kind != T::KIND || id.seq >= state.next_seq {
            return Err(corrupt(n, format!("id {id} out of range")));
        }
        if T::table(state).rows.contains_key(&id.seq) {
            return Err(corrupt(n, format!("duplicate id {id}")));
        }
        row.validate().map_err(|e| corrupt(n, e.to_string()))?;
        if canonical_json(&row) != line {
            return Err(corrupt(n, "record is not in canonical form".into()));
        }
        T::table_mut(state).insert(row);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hippocampus::EpisodicTrace;
    use crate::time::Timestamp;

    fn trace(session: &str, content: &str) -> EpisodicTrace {
        EpisodicTrace::raw(session, "user", content, Timestamp::month(2023, 1), 0.5)
    }

    fn store() -> StoreState {
        StoreState::new(EngineConfig::default()).unwrap()
    }

    #[test]
    fn first_insert_gets_creation_index_zero() {
        let mut s = store();
        let id = s.put_record(trace("S1", "hello")).unwrap();
        assert_eq!(id.seq(), 0);
        assert_eq!(id.kind(), RecordKind::Episodic);
        assert_eq!(id.to_string(), "ep:0");
        assert_eq!(s.get::<EpisodicTrace>(id).unwrap().content, "hello");
    }

    #[test]
    fn ids_are_distinct_and_scan_keeps_insertion_order() {
        let mut s = store();
        let a = s.put_record(trace("S1", "first")).unwrap();
        let b = s.put_record(trace("S1", "second")).unwrap();
        assert_ne!(a, b);
        let all: Vec<_> = s.scan::<EpisodicTrace>(|_| true).iter().map(|t| t.id).collect();
        assert_eq!(all, vec![a, b]);
    }

    #[test]
    fn scan_filters_and_empty_scan() {
        let mut s = store();
        assert!(s.scan::<EpisodicTrace>(|_| true).is_empty());
        s.put_record(trace("S1", "a")).unwrap();
        s.put_record(trace("S2", "b")).unwrap();
        s.put_record(trace("S1", "c")).unwrap();
        assert_eq!(s.scan::<EpisodicTrace>(|t| t.session_id == "S1").len(), 2);
    }

    #[test]
    fn frozen_store_rejects_puts_without_changing_digest() {
        let mut s = store();
        s.put_record(trace("S1", "a")).unwrap();
        s.freeze();
        let before = s.state_digest();
        assert!(matches!(s.put_record(trace("S1", "b")), Err(MemoryError::FrozenState)));
        assert_eq!(s.state_digest(), before);
    }

    #[test]
    fn invalid_record_names_the_field() {
        let mut s = store();
        let mut t = trace("S1", "a");
        t.salience = 1.5;
        match s.put_record(t) {
            Err(MemoryError::InvariantViolation { field, .. }) => assert_eq!(field, "salience"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(s.put_record(trace("S1", "   ")), Err(MemoryError::InvariantViolation { field: "content", .. })));
    }

    #[test]
    fn digest_is_deterministic_and_detects_mutation() {
        let mut s = store();
        let d0 = s.state_digest();
        assert_eq!(d0, s.state_digest());
        assert_eq!(d0.len(), 64);
        s.put_record(trace("S1", "a")).unwrap();
        assert_ne!(d0, s.state_digest());
    }

    #[test]
    fn canonical_lines_have_sorted_keys() {
        let mut s = store();
        s.put_record(trace("S1", "a")).unwrap();
        let files = s.canonical_files();
        let line = files[0].1.lines().next().unwrap();
        let keys: Vec<String> = serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(line)
            .unwrap()
            .keys()
            .cloned()
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(line.starts_with("{\"access_count\":0,"));
    }

    #[test]
    fn memory_id_text_round_trip() {
        let id = MemoryId::new(RecordKind::Semantic, 42);
        assert_eq!(id.to_string().parse::<MemoryId>().unwrap(), id);
        assert!("xx:1".parse::<MemoryId>().is_err());
        assert!("ep:".parse::<MemoryId>().is_err());
    }
}
