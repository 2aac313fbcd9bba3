//! Command-line driver. The binary is a thin wrapper around [`run`], which
//! takes its arguments and output streams explicitly so it can be tested
//! in-process.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid input
//! (malformed records, bad probes, unknown regions, corrupt archives), 3
//! the store is frozen.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::archive;
use crate::config::{EngineConfig, Region};
use crate::consolidation::ConsolidationReport;
use crate::engine::Engine;
use crate::error::{MemoryError, Result};
use crate::hippocampus::{ConversationTurn, EpisodicTrace};
use crate::metrics::{self, ErosionMeasurement, MetricsReport};
use crate::retrieval::EvidenceBundle;
use crate::substrate::{MemoryId, RecordCounts, StoreState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_FROZEN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "soulmem", version, about = "Long-horizon agent memory engine")]
pub struct Cli {
    /// Store archive read and written by every command.
    #[arg(long, global = true, default_value = "memory.bma")]
    pub store: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest line-delimited conversation turns.
    Ingest {
        file: PathBuf,
        /// Run a consolidation cycle after every N turns.
        #[arg(long)]
        cycle_every: Option<usize>,
        /// Freeze the store once the file is ingested.
        #[arg(long)]
        freeze_after: bool,
        /// Turn a region into a pass-through (repeatable).
        #[arg(long = "disable-region")]
        disable_region: Vec<Region>,
        /// TOML configuration used when the store does not exist yet.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Retrieve evidence for a query (read-only).
    Query {
        text: String,
        #[arg(long)]
        json: bool,
        /// Fused results to print.
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Run one consolidation cycle.
    Cycle {
        #[arg(long)]
        json: bool,
    },
    /// Score a probe suite and report soulfulness.
    Metrics {
        #[arg(long)]
        probes: PathBuf,
        /// Archive to measure erosion against.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Copy the store to an archive.
    Export { path: PathBuf },
    /// Verify an archive and make it the store.
    Import { path: PathBuf },
    /// Show or create configuration.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
    /// Print the state digest.
    Digest,
    /// Print record counts and the frozen flag.
    Status,
}

#[derive(Debug, Subcommand)]
pub enum ConfigAction {
    /// Print the store's configuration (defaults if there is no store).
    Show,
    /// Write the default configuration to a file, or print it.
    Init { path: Option<PathBuf> },
}

/// Exit code for an engine error.
pub fn exit_code(e: &MemoryError) -> i32 {
    match e {
        MemoryError::FrozenState => EXIT_FROZEN,
        MemoryError::Io(_) | MemoryError::InvariantViolation { .. } => EXIT_FAILURE,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load_state(path: &Path) -> Result<Option<StoreState>> {
    if path.exists() {
        archive::import_from(path).map(Some)
    } else {
        Ok(None)
    }
}

fn load_engine(path: &Path) -> Result<Engine> {
    match load_state(path)? {
        Some(state) => Engine::from_state(state),
        None => Engine::new(EngineConfig::default()),
    }
}

/// Parses line-delimited turns, checking that turn numbers increase within
/// each session.
pub fn parse_turns(input: &str) -> Result<Vec<ConversationTurn>> {
    let mut last: HashMap<String, u32> = HashMap::new();
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| MemoryError::MalformedRecord { line: n + 1, reason };
        let turn: ConversationTurn = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if turn.text.trim().is_empty() {
            return Err(malformed("text is empty".into()));
        }
        if turn.feedback.is_some_and(|f| !(0.0..=1.0).contains(&f)) {
            return Err(malformed("feedback must be in [0, 1]".into()));
        }
        if let Some(prev) = last.get(&turn.session_id) {
            if turn.turn <= *prev {
                return Err(malformed(format!(
                    "turn {} does not follow turn {prev} in session {}",
                    turn.turn, turn.session_id
                )));
            }
        }
        last.insert(turn.session_id.clone(), turn.turn);
        out.push(turn);
    }
    Ok(out)
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| MemoryError::invariant("json", e.to_string()))?;
    writeln!(out, "{s}")?;
    Ok(())
}

fn write_counts(out: &mut dyn Write, c: &RecordCounts) -> Result<()> {
    writeln!(
        out,
        "episodic {}  semantic {}  timeline {}  salience {}  procedural {}  working_memory {}",
        c.episodic, c.semantic, c.timeline, c.salience, c.procedural, c.working_memory
    )?;
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Ingest {
            file,
            cycle_every,
            freeze_after,
            disable_region,
            config,
        } => {
            let state = match load_state(&cli.store)? {
                Some(s) => s,
                None => {
                    let cfg = match config {
                        Some(p) => EngineConfig::load(p)?,
                        None => EngineConfig::default(),
                    };
                    StoreState::new(cfg)?
                }
            };
            if state.is_frozen() {
                return Err(MemoryError::FrozenState);
            }
            let mut state = state;
            if !disable_region.is_empty() {
                let mut cfg = state.config().clone();
                cfg.disabled_regions.extend(disable_region.iter().copied());
                state.set_config(cfg)?;
            }
            let mut engine = Engine::from_state(state)?;
            let turns = parse_turns(&std::fs::read_to_string(file)?)?;
            let reports = engine.ingest_all(&turns, *cycle_every)?;
            if *freeze_after {
                engine.freeze();
            }
            archive::export_to(engine.state(), &cli.store)?;
            writeln!(out, "ingested {} turns, {} cycles", turns.len(), reports.len())?;
            write_counts(out, &engine.counts())?;
            writeln!(out, "frozen {}", engine.is_frozen())?;
            writeln!(out, "digest {}", engine.state_digest())?;
        }
        Command::Query { text, json, top } => {
            let engine = load_engine(&cli.store)?;
            let bundle = engine.retrieve(text)?;
            let report = QueryReport::new(&engine, bundle, *top);
            if *json {
                write_json(out, &report)?;
            } else {
                report.write_text(out)?;
            }
        }
        Command::Cycle { json } => {
            let Some(state) = load_state(&cli.store)? else {
                return Err(MemoryError::BadConfig(format!("no store at {}", cli.store.display())));
            };
            let mut engine = Engine::from_state(state)?;
            let report = engine.run_cycle()?;
            archive::export_to(engine.state(), &cli.store)?;
            if *json {
                write_json(out, &report)?;
            } else {
                write_cycle(out, &report)?;
            }
        }
        Command::Metrics { probes, baseline, json } => {
            let engine = load_engine(&cli.store)?;
            let probes = metrics::parse_probes(&std::fs::read_to_string(probes)?)?;
            let report = metrics::evaluate(&engine, &probes)?;
            let erosion = match baseline {
                Some(path) => {
                    let base = Engine::from_state(archive::import_from(path)?)?;
                    let s0 = metrics::evaluate(&base, &probes)?.soulfulness;
                    Some(metrics::erosion(s0, report.soulfulness))
                }
                None => None,
            };
            let portable = archive::round_trip_fidelity(engine.state())?;
            if *json {
                write_json(out, &MetricsOutput { report: &report, erosion, portable })?;
            } else {
                let c = &report.components;
                writeln!(out, "T {:.4}  ({} temporal probes)", c.temporal, report.temporal_probes)?;
                writeln!(out, "C {:.4}", c.consistency)?;
                writeln!(out, "I {:.4}  ({} identity probes)", c.identity, report.identity_probes)?;
                writeln!(out, "S {:.4}", report.soulfulness)?;
                if let Some(e) = erosion {
                    writeln!(out, "E {:.4}  (baseline S {:.4})", e.erosion, e.t0_score)?;
                }
                writeln!(out, "archive round trip {}", if portable { "ok" } else { "FAILED" })?;
                for r in &report.results {
                    writeln!(
                        out,
                        "{} [{}] {} -> {}",
                        if r.correct { "ok  " } else { "miss" },
                        r.probe,
                        r.query,
                        r.answer.as_deref().unwrap_or("-")
                    )?;
                }
            }
        }
        Command::Export { path } => {
            let engine = load_engine(&cli.store)?;
            archive::export_to(engine.state(), path)?;
            writeln!(out, "exported {} ({})", path.display(), engine.state_digest())?;
        }
        Command::Import { path } => {
            let state = archive::import_from(path)?;
            archive::export_to(&state, &cli.store)?;
            writeln!(out, "imported {} ({})", path.display(), state.state_digest())?;
            write_counts(out, &state.counts())?;
        }
        Command::Config { action } => match action {
            ConfigAction::Show => {
                let cfg = match load_state(&cli.store)? {
                    Some(s) => s.config().clone(),
                    None => EngineConfig::default(),
                };
                write!(out, "{}", cfg.to_toml_string())?;
            }
            ConfigAction::Init { path } => {
                let text = EngineConfig::default().to_toml_string();
                match path {
                    Some(p) => {
                        std::fs::write(p, text)?;
                        writeln!(out, "wrote {}", p.display())?;
                    }
                    None => write!(out, "{text}")?,
                }
            }
        },
        Command::Digest => {
            writeln!(out, "{}", load_engine(&cli.store)?.state_digest())?;
        }
        Command::Status => {
            let engine = load_engine(&cli.store)?;
            write_counts(out, &engine.counts())?;
            writeln!(out, "frozen {}", engine.is_frozen())?;
            let disabled: Vec<&str> = engine.config().disabled_regions.iter().map(|r| r.as_str()).collect();
            writeln!(out, "disabled {}", if disabled.is_empty() { "-".to_string() } else { disabled.join(",") })?;
        }
    }
    Ok(())
}

fn write_cycle(out: &mut dyn Write, r: &ConsolidationReport) -> Result<()> {
    writeln!(
        out,
        "selected {}  created {}  updated {}  superseded {}  pruned {}  ({:.1} ms)",
        r.selected.len(),
        r.facts_created.len(),
        r.facts_updated.len(),
        r.superseded.len(),
        r.pruned.len(),
        r.cycle_time.as_secs_f64() * 1000.0
    )?;
    Ok(())
}

#[derive(Serialize)]
struct MetricsOutput<'a> {
    #[serde(flatten)]
    report: &'a MetricsReport,
    erosion: Option<ErosionMeasurement>,
    portable: bool,
}

#[derive(Debug, Serialize)]
pub struct EvidenceLine {
    pub trace: MemoryId,
    pub score: f64,
    pub content: String,
}

/// `query --json` output: the evidence bundle plus the text of the top
/// fused traces.
#[derive(Debug, Serialize)]
pub struct QueryReport {
    #[serde(flatten)]
    pub bundle: EvidenceBundle,
    pub evidence: Vec<EvidenceLine>,
}

impl QueryReport {
    fn new(engine: &Engine, mut bundle: EvidenceBundle, top: usize) -> Self {
        bundle.fused.truncate(top);
        let evidence = bundle
            .fused
            .iter()
            .filter_map(|f| {
                engine.state().get::<EpisodicTrace>(f.candidate).map(|t| EvidenceLine {
                    trace: f.candidate,
                    score: f.fused_score,
                    content: t.content.clone(),
                })
            })
            .collect();
        QueryReport { bundle, evidence }
    }

    fn write_text(&self, out: &mut dyn Write) -> Result<()> {
        let b = &self.bundle;
        let p = &b.profile;
        writeln!(
            out,
            "profile  temporal {:.2}  identity {:.2}  preference {:.2}  factual {:.2}",
            p.temporal, p.identity, p.preference, p.factual
        )?;
        let weights: Vec<String> = b.plan.weights.iter().map(|(s, w)| format!("{s}={w:.2}")).collect();
        writeln!(out, "plan     {}  max_rounds {}", weights.join(" "), b.plan.max_rounds)?;
        writeln!(out, "rounds   {}  uncertainty {:.3}", b.rounds_used, b.uncertainty)?;
        if let Some(wm) = &b.fast_path {
            writeln!(out, "working memory: {}", wm.summary)?;
        }
        for a in &b.temporal_answers {
            writeln!(out, "when     {} [{}] {}", a.at, a.entity, a.description)?;
        }
        if self.evidence.is_empty() && b.fast_path.is_none() {
            writeln!(out, "no evidence")?;
        }
        for (i, e) in self.evidence.iter().enumerate() {
            writeln!(out, "{:>2}. {:.5}  {}  {}", i + 1, e.score, e.trace, e.content)?;
        }
        Ok(())
    }
}
