use soulmem::{fixtures, procedural, Engine, EngineConfig};

fn main() -> soulmem::Result<()> {
    let mut engine = Engine::new(EngineConfig::default())?;
    for turn in fixtures::coding_preferences() {
        engine.ingest(&turn)?;
    }
    println!("patterns seen in two or more sessions:");
    for p in procedural::fixed_point_patterns(engine.state()) {
        println!("  {:<28} support {}  {}", p.key, p.support, p.value);
    }
    println!("\nconstraints for `{}`:", fixtures::CODE_TASK);
    for c in engine.constraints_for(fixtures::CODE_TASK) {
        println!("  - {c}");
    }
    Ok(())
}
