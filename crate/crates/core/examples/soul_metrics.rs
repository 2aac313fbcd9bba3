//! Scores a store on the trips probe suite, then again after ablating the
//! hippocampus, and reports the erosion between the two.

use soulmem::{fixtures, metrics, Engine, EngineConfig, Region};

fn evaluate(cfg: EngineConfig) -> soulmem::Result<metrics::MetricsReport> {
    let (turns, probes) = fixtures::trips();
    let mut engine = Engine::new(cfg)?;
    engine.ingest_all(&turns, Some(10))?;
    metrics::evaluate(&engine, &probes)
}

fn main() -> soulmem::Result<()> {
    let full = evaluate(EngineConfig::default())?;
    let mut cfg = EngineConfig::default();
    cfg.disabled_regions.insert(Region::Hippocampus);
    let ablated = evaluate(cfg)?;
    for (name, r) in [("full", &full), ("no hippocampus", &ablated)] {
        let c = &r.components;
        println!(
            "{name:<15} T {:.3}  C {:.3}  I {:.3}  S {:.4}  ({} temporal, {} identity probes)",
            c.temporal, c.consistency, c.identity, r.soulfulness, r.temporal_probes, r.identity_probes
        );
    }
    let e = metrics::erosion(full.soulfulness, ablated.soulfulness);
    println!("erosion {:.4}", e.erosion);

    let worked = metrics::soulfulness(&metrics::SoulComponents::new(0.623, 0.9, 0.489, (0.5, 0.3, 0.2)))?;
    println!("S(0.623, 0.9, 0.489) with weights (0.5, 0.3, 0.2) = {worked:.4}");
    Ok(())
}
