//! Shows how the four rankers contribute to one fused list.

use std::collections::BTreeMap;

use soulmem::retrieval::{fuse_rrf, RankedList, Source};
use soulmem::{fixtures, Engine, EngineConfig, MemoryId};

fn main() -> soulmem::Result<()> {
    // By hand: one candidate on top of the lexical list and third on the
    // dense one.
    let id = |s: &str| s.parse::<MemoryId>().expect("valid id");
    let weights: BTreeMap<Source, f64> = Source::ALL.iter().map(|s| (*s, 1.0)).collect();
    let fused = fuse_rrf(
        &[
            RankedList::from_order(Source::Lexical, vec![id("ep:1"), id("ep:2")])?,
            RankedList::from_order(Source::Dense, vec![id("ep:2"), id("ep:3"), id("ep:1")])?,
        ],
        &weights,
        60.0,
    )?;
    for f in &fused {
        println!("{}  {:.6}  ranks {:?}", f.candidate, f.fused_score, f.per_source_ranks);
    }

    // Through the engine.
    let mut engine = Engine::new(EngineConfig::default())?;
    engine.ingest_all(&fixtures::job_change(), Some(4))?;
    let bundle = engine.retrieve("What did I say about Google and startups?")?;
    println!("\nplan:");
    for s in bundle.plan.sources() {
        println!("  {:<8} weight {:.2}  list length {}", s.as_str(), bundle.plan.weight(s), bundle.lists.get(&s).unwrap_or(&0));
    }
    println!("rounds {}  uncertainty {:.3}", bundle.rounds_used, bundle.uncertainty);
    for (text, f) in engine.evidence_texts(&bundle, 3).iter().zip(&bundle.fused) {
        println!("  {:.5}  {text}", f.fused_score);
    }
    Ok(())
}
