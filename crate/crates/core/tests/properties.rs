use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use soulmem::adapters::{cosine, Embedder, HashEmbedder};
use soulmem::archive;
use soulmem::hippocampus::ConversationTurn;
use soulmem::metrics::{self, SoulComponents};
use soulmem::retrieval::{fuse_rrf, RankedList, Source};
use soulmem::semantic::ema;
use soulmem::storyarc;
use soulmem::text;
use soulmem::time::Timestamp;
use soulmem::{amygdala, Engine, EngineConfig, MemoryId};

fn ep(n: u64) -> MemoryId {
    format!("ep:{n}").parse().unwrap()
}

fn ranked_lists() -> impl Strategy<Value = Vec<RankedList>> {
    let list = |source: Source| {
        proptest::collection::btree_set(0u64..40, 0..20)
            .prop_shuffle_ids()
            .prop_map(move |ids| RankedList::from_order(source, ids.into_iter().map(ep).collect()).unwrap())
    };
    (list(Source::Lexical), list(Source::Dense), list(Source::Graph), list(Source::Temporal), 1usize..=4)
        .prop_map(|(a, b, c, d, n)| vec![a, b, c, d].into_iter().take(n).collect())
}

trait ShuffleIds {
    fn prop_shuffle_ids(self) -> BoxedStrategy<Vec<u64>>;
}

impl<S: Strategy<Value = BTreeSet<u64>> + 'static> ShuffleIds for S {
    fn prop_shuffle_ids(self) -> BoxedStrategy<Vec<u64>> {
        self.prop_map(|s| s.into_iter().collect::<Vec<_>>()).prop_shuffle().boxed()
    }
}

fn weights() -> impl Strategy<Value = BTreeMap<Source, f64>> {
    proptest::array::uniform4(0.01f64..5.0).prop_map(|w| Source::ALL.iter().copied().zip(w).collect())
}

fn timestamp() -> impl Strategy<Value = Timestamp> {
    prop_oneof![
        Just(Timestamp::unknown()),
        (1990i32..2030).prop_map(Timestamp::year),
        (1990i32..2030, 1u32..=12).prop_map(|(y, m)| Timestamp::month(y, m)),
        (1990i32..2030, 1u32..=12, 1u32..=28).prop_map(|(y, m, d)| Timestamp::day(y, m, d)),
        (1990i32..2030, 1u32..=12, 1u32..=28, 0u32..24, 0u32..60)
            .prop_map(|(y, m, d, h, mi)| Timestamp::minute(y, m, d, h, mi)),
    ]
}

const SENTENCES: [&str; 10] = [
    "I work at Google.",
    "I moved to Lisbon in 2019.",
    "I'm vegetarian for health reasons.",
    "My favorite color is teal.",
    "My sister lives in Oslo.",
    "Always use TypeScript, never plain JavaScript.",
    "I visited Port Alder in May 2021.",
    "Cooked pasta for dinner.",
    "I started at Acme in March 2020.",
    "I left Acme in 2022.",
];

fn turns(max: usize) -> impl Strategy<Value = Vec<ConversationTurn>> {
    proptest::collection::vec((0..SENTENCES.len(), 0i64..30), 1..max).prop_map(|picks| {
        let mut at = Timestamp::day(2023, 1, 1);
        picks
            .into_iter()
            .enumerate()
            .map(|(i, (s, gap))| {
                at = at.shift_days(gap);
                ConversationTurn::new(&format!("S{i}"), 1, "user", &format!("{} ({i})", SENTENCES[s]), at)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fusion_is_sorted_and_covers_the_union(lists in ranked_lists(), w in weights()) {
        let fused = fuse_rrf(&lists, &w, 60.0).unwrap();
        let union: BTreeSet<MemoryId> = lists.iter().flat_map(|l| l.ids().collect::<Vec<_>>()).collect();
        prop_assert_eq!(fused.iter().map(|f| f.candidate).collect::<BTreeSet<_>>(), union);
        for pair in fused.windows(2) {
            prop_assert!(pair[0].fused_score >= pair[1].fused_score);
        }
        prop_assert!(fused.iter().all(|f| f.fused_score > 0.0));
    }

    #[test]
    fn fusion_ignores_list_order(mut lists in ranked_lists(), w in weights()) {
        let a = fuse_rrf(&lists, &w, 60.0).unwrap();
        lists.reverse();
        let b = fuse_rrf(&lists, &w, 60.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fusion_scales_with_weights(lists in ranked_lists(), w in weights(), c in 0.1f64..10.0) {
        let scaled: BTreeMap<Source, f64> = w.iter().map(|(s, v)| (*s, v * c)).collect();
        let a = fuse_rrf(&lists, &w, 60.0).unwrap();
        let b = fuse_rrf(&lists, &scaled, 60.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.fused_score * c - y.fused_score).abs() <= 1e-12 * c.max(1.0));
        }
    }

    #[test]
    fn ema_stays_in_unit_interval_and_converges(p in 0.0f64..=1.0, target in 0.0f64..=1.0, lambda in 0.001f64..0.999) {
        let next = ema(p, target, lambda);
        prop_assert!((0.0..=1.0).contains(&next));
        prop_assert!((next - target).abs() <= (p - target).abs() + 1e-15);
    }

    #[test]
    fn salience_is_bounded_and_monotone(n in 0.0f64..=1.0, c in 0.0f64..=1.0, f in 0.0f64..=1.0, bump in 0.0f64..=1.0) {
        let s = amygdala::aggregate(n, c, f);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!(amygdala::aggregate((n + bump).min(1.0), c, f) >= s);
        prop_assert!(amygdala::aggregate(n, (c + bump).min(1.0), f) >= s);
        prop_assert!(amygdala::aggregate(n, c, (f + bump).min(1.0)) >= s);
    }

    #[test]
    fn timestamp_text_round_trips(t in timestamp()) {
        let back: Timestamp = t.to_string().parse().unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn relation_is_antisymmetric(a in timestamp(), b in timestamp()) {
        prop_assert_eq!(a.relation(&b), b.relation(&a).inverse());
    }

    #[test]
    fn coarsening_is_idempotent(t in timestamp(), g in 0usize..3) {
        let g = [soulmem::Granularity::Year, soulmem::Granularity::Month, soulmem::Granularity::Day][g];
        let once = t.at_granularity(g);
        prop_assert_eq!(once.at_granularity(g), once);
    }

    #[test]
    fn text_processing_is_deterministic(s in "[A-Za-z' ,.!?]{0,80}") {
        prop_assert_eq!(text::terms(&s), text::terms(&s));
        let once = text::normalize_entity(&s);
        prop_assert_eq!(text::normalize_entity(&once), once.clone());
        let e = HashEmbedder::new(64);
        if let (Ok(a), Ok(b)) = (e.embed(&s), e.embed(&s)) {
            prop_assert_eq!(a.dim(), 64);
            prop_assert!((cosine(&a, &b) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn soulfulness_lies_between_components(t in 0.0f64..=1.0, c in 0.0f64..=1.0, i in 0.0f64..=1.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let s = metrics::soulfulness(&SoulComponents::new(t, c, i, (lo, hi - lo, 1.0 - hi))).unwrap();
        prop_assert!(s >= t.min(c).min(i) - 1e-12 && s <= t.max(c).max(i) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn capacities_hold_after_every_ingest(ts in turns(40), cap in 2usize..8) {
        let cfg = EngineConfig {
            cap_hippocampus: cap,
            cap_amygdala: cap,
            cap_temporal_lobe: cap,
            cap_working_memory: 2,
            ..EngineConfig::default()
        };
        let mut e = Engine::new(cfg).unwrap();
        for (i, t) in ts.iter().enumerate() {
            e.ingest(t).unwrap();
            if i % 5 == 4 {
                e.run_cycle().unwrap();
            }
            let c = e.counts();
            prop_assert!(c.episodic <= cap && c.salience <= cap && c.semantic <= cap && c.working_memory <= 2);
        }
    }

    #[test]
    fn timelines_keep_seq_in_time_order(ts in turns(30)) {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.ingest_all(&ts, Some(7)).unwrap();
        let entities: BTreeSet<String> = e.state().scan::<storyarc::TimelineEvent>(|_| true).iter().map(|ev| ev.entity.clone()).collect();
        for entity in entities {
            let tl = storyarc::timeline(e.state(), &entity);
            for w in tl.windows(2) {
                prop_assert!(w[0].seq < w[1].seq);
                prop_assert!(w[0].at.sort_key() <= w[1].at.sort_key());
            }
        }
    }

    #[test]
    fn archives_round_trip(ts in turns(25), cycle in proptest::bool::ANY) {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.ingest_all(&ts, cycle.then_some(4)).unwrap();
        let bytes = archive::export_bytes(e.state()).unwrap();
        let back = archive::import_bytes(&bytes).unwrap();
        prop_assert_eq!(back.state_digest(), e.state_digest());
        prop_assert_eq!(archive::export_bytes(&back).unwrap(), bytes);
    }
}
