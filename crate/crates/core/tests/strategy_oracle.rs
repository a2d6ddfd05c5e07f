use std::path::PathBuf;

use proptest::prelude::*;
use timefork_core::chain::*;
use timefork_core::strategy::*;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/success_boundary.csv")
}

fn render(boundary: &[(u64, u64)]) -> String {
    let mut s = String::from("t0,t1a,t1h\n");
    for (a, h) in boundary {
        s.push_str(&format!("0,{a},{h}\n"));
    }
    s
}

#[test]
fn success_boundary_matches_golden() {
    let audit = audit_success_grid(1..=60, 2..=120);
    assert!(!audit.boundary.is_empty());
    // Brute-force oracle: the predicate never over-claims; the only
    // disagreements are bucket crossings with a gap below nine seconds.
    for &(a, h) in &audit.boundary {
        assert!(h > a && h - a < 9 && h / 9 > a / 9, "({a},{h})");
    }
    let expected = render(&audit.boundary);
    if std::env::var_os("TIMEFORK_BLESS").is_some() {
        std::fs::write(golden_path(), &expected).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path()).expect("golden file present");
    assert_eq!(golden, expected);
    assert_eq!(audit.points, audit.agreements + audit.boundary.len() as u64);
}

#[test]
fn oracle_decisions_always_win() {
    let audit = audit_success_grid(1..=60, 2..=1200);
    assert!(audit.publishes > 0);
    assert_eq!(audit.publishes, audit.publish_wins);
}

fn tip_pair(t0: u64, dt: u64) -> (BlockHeader, BlockHeader) {
    let mut p = BlockHeader::genesis(BlockId(0), 4_000_000);
    p.timestamp = t0;
    let h = BlockHeader::child(&p, BlockId(1), t0 + dt, Participant::Honest, Vec::new(), &ChainConstants::ETHEREUM).unwrap();
    (p, h)
}

proptest! {
    #[test]
    fn honest_only_publishes_clamped_arrival(t0 in 0u64..10_000, arrive in 0.0f64..20_000.0, honest: bool) {
        let (p, _) = tip_pair(t0, 1);
        let ev = MiningEvent {
            finder: if honest { Finder::Honest } else { Finder::Adversary },
            arrival_time: arrive,
            tip: &p,
            tip_parent: None,
            private_tip: None,
        };
        match honest_on_event(&ev) {
            Action::Publish { parent, timestamp } => {
                prop_assert!(honest);
                prop_assert_eq!(parent, p.id);
                prop_assert_eq!(timestamp, (arrive.floor() as u64).max(t0 + 1));
            }
            Action::NoOp => prop_assert!(!honest),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn uum_publications_are_valid_and_dominant(t0 in 0u64..5000, dt in 9u64..3000) {
        let (p, h) = tip_pair(t0, dt);
        let ts = uum_choose_timestamp(&p, &h).unwrap();
        let a = BlockHeader::child(&p, BlockId(2), ts, Participant::Adversary, Vec::new(), &ChainConstants::ETHEREUM).unwrap();
        prop_assert_eq!(validate_header(&a, &p, &ChainConstants::ETHEREUM), Ok(()));
        prop_assert!(a.difficulty > h.difficulty);
        prop_assert!(ts > t0 && ts < t0 + 900);
    }

    #[test]
    fn suum_release_is_certified_or_infeasible(t0 in 0u64..5000, dt in 1u64..2000) {
        let (p, h) = tip_pair(t0, dt);
        match suum_release_timestamp(&p, &h, &p) {
            Ok(ts) => {
                let a = BlockHeader::child(&p, BlockId(2), ts, Participant::Adversary, Vec::new(), &ChainConstants::ETHEREUM).unwrap();
                prop_assert!(a.difficulty > h.difficulty);
                if dt >= 10 && dt < 908 {
                    // Minimal-risk equality reached exactly.
                    prop_assert_eq!(dt - (ts - t0), 9);
                }
            }
            Err(e) => {
                prop_assert_eq!(e, StrategyError::AttackInfeasible);
                prop_assert!(dt < 9);
            }
        }
    }

    #[test]
    fn table_explains_every_step(events in proptest::collection::vec((any::<bool>(), 1u64..60), 1..200)) {
        for kind in [StrategyKind::Rum, StrategyKind::Uum, StrategyKind::Suum] {
            let mut state = kind.initial_state();
            let mut t = 0u64;
            for &(adversary, dt) in &events {
                let (p, h) = tip_pair(t, dt);
                t += dt;
                let finder = if adversary { Finder::Adversary } else { Finder::Honest };
                let ev = MiningEvent { finder, arrival_time: t as f64, tip: &h, tip_parent: Some(&p), private_tip: None };
                let before = state;
                let (after, action) = state.on_event(&ev);
                let withholds = matches!(action, Action::Withhold { .. } | Action::Release { .. });
                prop_assert!(!withholds || kind == StrategyKind::Suum);
                if !matches!(action, Action::AttackInfeasible { .. }) {
                    let row = explain_transition(kind, before.control(), finder, dt, after.control());
                    prop_assert!(row.is_some(), "{:?} {:?} {:?} dt={} to {:?}", kind, before, finder, dt, after);
                }
                state = after;
            }
        }
    }
}
