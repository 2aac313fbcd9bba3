//! Ingests the job-change conversation and asks when things happened.
//!
//! The departure question is interesting: the first mention of leaving is
//! only a plan, so the answer comes from the later offer instead.

use soulmem::{fixtures, Engine, EngineConfig};

fn main() -> soulmem::Result<()> {
    let mut engine = Engine::new(EngineConfig::default())?;
    for turn in fixtures::job_change() {
        engine.ingest(&turn)?;
    }
    for probe in fixtures::job_change_probes() {
        let query = probe.query_text();
        let bundle = engine.retrieve(&query)?;
        match bundle.temporal_answers.first() {
            Some(a) => {
                let via = if a.resolved_from.is_some() { " (resolved from a tentative mention)" } else { "" };
                println!("{query}\n  -> {} [{}] {}{via}", a.at, a.entity, a.description);
            }
            None => println!("{query}\n  -> no timeline answer"),
        }
    }
    Ok(())
}
