//! End-to-end scenarios over the shipped fixtures and region ablations.

use soulmem::hippocampus::ConversationTurn;
use soulmem::retrieval::Source;
use soulmem::semantic;
use soulmem::time::Granularity;
use soulmem::{fixtures, metrics, Engine, EngineConfig, MemoryError, Region, SharedEngine, Timestamp};

fn engine_with(turns: &[ConversationTurn], cfg: EngineConfig) -> Engine {
    let mut e = Engine::new(cfg).unwrap();
    for t in turns {
        e.ingest(t).unwrap();
    }
    e
}

fn without(region: Region) -> EngineConfig {
    let mut cfg = EngineConfig::default();
    cfg.disabled_regions.insert(region);
    cfg
}

#[test]
fn tentative_departure_resolves_to_the_later_offer() {
    let e = engine_with(&fixtures::job_change(), EngineConfig::default());
    let b = e.retrieve(fixtures::DEPARTURE_QUERY).unwrap();
    let a = &b.temporal_answers[0];
    assert_eq!(a.at.at_granularity(Granularity::Month).to_string(), "2023-06");
    assert!(a.resolved_from.is_some());
}

#[test]
fn start_date_comes_from_the_first_session() {
    let e = engine_with(&fixtures::job_change(), EngineConfig::default());
    let b = e.retrieve("When did I start my job at Google?").unwrap();
    assert_eq!(b.temporal_answers[0].at.at_granularity(Granularity::Month).to_string(), "2023-01");
}

#[test]
fn job_change_probes_all_pass() {
    let mut e = Engine::new(EngineConfig::default()).unwrap();
    e.ingest_all(&fixtures::job_change(), Some(4)).unwrap();
    assert_eq!(metrics::temporal_coherence(&e, &fixtures::job_change_probes()).unwrap(), 1.0);
}

#[test]
fn diet_revisions_leave_one_live_fact_with_full_lineage() {
    let mut e = Engine::new(EngineConfig::default()).unwrap();
    for t in fixtures::diet_revisions() {
        e.ingest(&t).unwrap();
        e.run_cycle().unwrap();
    }
    let live = semantic::query_facts(e.state(), Some("user"), Some("diet"), false);
    assert_eq!(live.len(), 1);
    assert_eq!(live[0].object, "vegetarian");
    let all = semantic::query_facts(e.state(), Some("user"), Some("diet"), true);
    assert_eq!(all.len(), 3);
    let first = all.iter().map(|f| f.id).min().unwrap();
    assert_eq!(semantic::lineage(e.state(), first).len(), 3);
    assert_eq!(metrics::semantic_consistency(e.state()), 1.0);
}

#[test]
fn milestone_survives_capacity_pressure() {
    let turns = fixtures::thesis_then_fillers(33);
    let mut e = Engine::new(fixtures::thesis_config()).unwrap();
    let out = e.ingest(&turns[0]).unwrap();
    assert!(out.protected);
    let thesis = out.trace.unwrap();
    for t in &turns[1..] {
        e.ingest(t).unwrap();
    }
    assert_eq!(e.counts().episodic, 5);
    assert!(e.state().get::<soulmem::EpisodicTrace>(thesis).is_some());
}

#[test]
fn milestone_is_lost_without_the_amygdala() {
    let turns = fixtures::thesis_then_fillers(33);
    let mut cfg = fixtures::thesis_config();
    cfg.disabled_regions.insert(Region::Amygdala);
    let mut e = Engine::new(cfg).unwrap();
    let thesis = e.ingest(&turns[0]).unwrap().trace.unwrap();
    for t in &turns[1..] {
        e.ingest(t).unwrap();
    }
    assert!(e.state().get::<soulmem::EpisodicTrace>(thesis).is_none());
    assert_eq!(metrics::identity_preservation(&e, &[fixtures::thesis_probe()]).unwrap(), 0.0);
}

#[test]
fn repeated_preferences_become_task_constraints() {
    let e = engine_with(&fixtures::coding_preferences(), EngineConfig::default());
    let c = e.constraints_for(fixtures::CODE_TASK);
    assert_eq!(c.len(), 3, "{c:?}");
    let joined = c.join(" ").to_lowercase();
    assert!(joined.contains("typescript"));
    assert!(joined.contains("prettier"));
    assert!(joined.contains("functional"));
}

#[test]
fn single_session_preferences_are_not_constraints() {
    let turns: Vec<_> = fixtures::coding_preferences().into_iter().filter(|t| t.session_id == "P1").collect();
    let e = engine_with(&turns, EngineConfig::default());
    assert!(e.constraints_for(fixtures::CODE_TASK).is_empty());
}

#[test]
fn procedural_ablation_yields_no_constraints() {
    let e = engine_with(&fixtures::coding_preferences(), without(Region::BasalGanglia));
    assert!(e.constraints_for(fixtures::CODE_TASK).is_empty());
    assert_eq!(e.counts().procedural, 0);
}

#[test]
fn hippocampus_ablation_stores_raw_turns_only() {
    let (turns, probes) = fixtures::trips();
    let e = engine_with(&turns, without(Region::Hippocampus));
    assert_eq!(e.counts().episodic, 50);
    assert_eq!(e.counts().timeline, 0);
    assert_eq!(metrics::temporal_coherence(&e, &probes).unwrap(), 0.0);
}

#[test]
fn temporal_lobe_ablation_skips_consolidation_and_graph() {
    let mut e = Engine::new(without(Region::TemporalLobe)).unwrap();
    e.ingest_all(&fixtures::diet_revisions(), Some(1)).unwrap();
    assert_eq!(e.counts().semantic, 0);
    let b = e.retrieve("What is my diet?").unwrap();
    assert!(!b.plan.sources().any(|s| s == Source::Graph));
}

#[test]
fn prefrontal_ablation_disables_working_memory() {
    let e = engine_with(&fixtures::job_change(), without(Region::Prefrontal));
    assert_eq!(e.counts().working_memory, 0);
    let b = e.retrieve("Where do I work?").unwrap();
    assert!(b.fast_path.is_none());
}

#[test]
fn recall_bumps_access_counts() {
    let mut e = engine_with(&fixtures::job_change(), EngineConfig::default());
    let b = e.recall("Tell me about gardening books").unwrap();
    let top = b.trace_ids()[0];
    assert_eq!(e.state().get::<soulmem::EpisodicTrace>(top).unwrap().access_count, 1);
}

#[test]
fn blank_inputs_are_rejected() {
    let mut e = Engine::new(EngineConfig::default()).unwrap();
    assert!(matches!(e.retrieve("   "), Err(MemoryError::EmptyQuery)));
    let blank = ConversationTurn::new("S", 1, "user", "  ", Timestamp::unknown());
    assert!(matches!(e.ingest(&blank), Err(MemoryError::EmptyContent)));
}

#[test]
fn shared_engine_serves_concurrent_readers() {
    let shared = SharedEngine::new(engine_with(&fixtures::job_change(), EngineConfig::default()));
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let s = shared.clone();
            std::thread::spawn(move || s.retrieve(fixtures::DEPARTURE_QUERY).unwrap().temporal_answers[0].at)
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap().at_granularity(Granularity::Month).to_string(), "2023-06");
    }
}
