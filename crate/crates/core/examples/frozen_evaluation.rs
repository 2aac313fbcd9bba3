//! Freezes a store and runs an evaluation against it. Reads work, writes
//! are refused, and the digest does not move.

use soulmem::{fixtures, metrics, Engine, EngineConfig, MemoryError};

fn main() -> soulmem::Result<()> {
    let (trips, probes) = fixtures::trips();
    let mut engine = Engine::new(EngineConfig::default())?;
    engine.ingest_all(&trips, Some(10))?;
    engine.freeze();
    let before = engine.state_digest();

    let report = metrics::evaluate(&engine, &probes)?;
    println!("T = {:.3} over {} probes", report.components.temporal, report.temporal_probes);

    match engine.ingest(&trips[0]) {
        Err(MemoryError::FrozenState) => println!("ingest refused: store is frozen"),
        other => println!("unexpected: {other:?}"),
    }
    match engine.recall("When did I visit Port Alder?") {
        Err(MemoryError::FrozenState) => println!("recall refused: it would record access"),
        other => println!("unexpected: {other:?}"),
    }
    println!("digest unchanged: {}", before == engine.state_digest());
    Ok(())
}
