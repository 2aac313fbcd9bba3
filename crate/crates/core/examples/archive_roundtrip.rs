use soulmem::{archive, fixtures, Engine, EngineConfig};

fn main() -> soulmem::Result<()> {
    let mut engine = Engine::new(EngineConfig::default())?;
    engine.ingest_all(&fixtures::diet_revisions(), Some(1))?;
    engine.ingest_all(&fixtures::job_change(), Some(4))?;

    let bytes = archive::export_bytes(engine.state())?;
    let manifest = archive::read_manifest(&bytes)?;
    println!("archive {} bytes, format v{}", bytes.len(), manifest.format_version);
    for (file, sum) in &manifest.checksums {
        println!("  {file:<24} {}", &sum[..16]);
    }

    let restored = Engine::from_state(archive::import_bytes(&bytes)?)?;
    println!("digest before {}", engine.state_digest());
    println!("digest after  {}", restored.state_digest());
    assert_eq!(engine.state_digest(), restored.state_digest());

    let mut damaged = bytes.clone();
    let mid = damaged.len() / 2;
    damaged[mid] ^= 0xff;
    match archive::import_bytes(&damaged) {
        Ok(_) => println!("damaged archive accepted?!"),
        Err(e) => println!("damaged archive rejected: {e}"),
    }
    Ok(())
}
