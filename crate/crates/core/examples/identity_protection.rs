//! A milestone followed by a long run of small talk under a five-trace cap,
//! with and without salience tagging.

use soulmem::{fixtures, metrics, Engine, EpisodicTrace, Region};

fn run(disable_amygdala: bool) -> soulmem::Result<()> {
    let mut cfg = fixtures::thesis_config();
    if disable_amygdala {
        cfg.disabled_regions.insert(Region::Amygdala);
    }
    let mut engine = Engine::new(cfg)?;
    let turns = fixtures::thesis_then_fillers(33);
    let thesis = engine.ingest(&turns[0])?.trace.expect("hippocampus is enabled");
    for t in &turns[1..] {
        engine.ingest(t)?;
    }
    let kept = engine.state().get::<EpisodicTrace>(thesis).is_some();
    let i = metrics::identity_preservation(&engine, &[fixtures::thesis_probe()])?;
    println!(
        "amygdala {:<8} traces {}  thesis kept {kept:<5}  identity {i:.2}",
        if disable_amygdala { "off" } else { "on" },
        engine.counts().episodic
    );
    Ok(())
}

fn main() -> soulmem::Result<()> {
    run(false)?;
    run(true)
}
