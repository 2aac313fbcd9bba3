//! A diet that changes twice. Each consolidation cycle folds the new trace
//! into the fact store and supersedes the fact it contradicts.

use soulmem::{fixtures, semantic, Engine, EngineConfig};

fn main() -> soulmem::Result<()> {
    let mut engine = Engine::new(EngineConfig::default())?;
    for turn in fixtures::diet_revisions() {
        engine.ingest(&turn)?;
        let report = engine.run_cycle()?;
        println!(
            "{} {:<60} created {} superseded {}",
            turn.timestamp,
            turn.text,
            report.facts_created.len(),
            report.superseded.len()
        );
    }

    println!("\nall diet facts:");
    for f in semantic::query_facts(engine.state(), Some("user"), Some("diet"), true) {
        let status = if f.is_live() { "live" } else { "superseded" };
        println!("  {} {} = {:<12} conf {:.2}  {status}", f.id, f.predicate, f.object, f.confidence);
    }
    let first = semantic::query_facts(engine.state(), Some("user"), Some("diet"), true)
        .iter()
        .map(|f| f.id)
        .min()
        .expect("facts were created");
    let chain: Vec<String> = semantic::lineage(engine.state(), first).iter().map(|id| id.to_string()).collect();
    println!("lineage: {}", chain.join(" -> "));
    Ok(())
}
