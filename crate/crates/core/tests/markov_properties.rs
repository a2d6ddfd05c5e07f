use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use timefork_core::markov::*;
use timefork_core::strategy::{ControlState, StrategyKind};

const ATTACKERS: [StrategyKind; 3] = [StrategyKind::Rum, StrategyKind::Uum, StrategyKind::Suum];

fn grid() -> impl Iterator<Item = f64> {
    (1..=10).map(|k| 0.05 * k as f64)
}

#[test]
fn rows_stochastic_and_residual_small() {
    for tm in TimingDistribution::ALL.map(|d| TimingModel { mean_block_time: 13.0, distribution: d }) {
        for s in StrategyKind::ALL {
            for a in grid().filter(|a| *a < 1.0) {
                let m = build_chain(s, a, &tm, DEFAULT_TRUNCATION).unwrap();
                for row in &m.matrix {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
                let d = stationary(&m).unwrap();
                assert!(d.residual <= 1e-10);
                assert!(d.probabilities.iter().all(|p| *p >= 0.0));
                assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn honest_baseline_is_fair() {
    let m = build_chain(StrategyKind::Honest, 0.3, &TimingModel::default(), 1).unwrap();
    let d = stationary(&m).unwrap();
    let (rh, ra) = absolute_shares(&d, &m);
    assert!((rh - 0.7).abs() < 1e-15 && (ra - 0.3).abs() < 1e-15);
    assert_eq!(forking_rate(&m, &d), 0.0);
}

#[test]
fn uum_deficit_equals_forking_rate() {
    for a in grid() {
        let m = build_chain(StrategyKind::Uum, a, &TimingModel::default(), 1).unwrap();
        let d = stationary(&m).unwrap();
        assert!((orphan_rate(&d, &m) - forking_rate(&m, &d)).abs() < 1e-12);
        let (rh, ra) = absolute_shares(&d, &m);
        assert!(rh + ra <= 1.0 + 1e-12);
    }
}

#[test]
fn relative_share_monotone_and_ordered() {
    let tm = TimingModel::default();
    let mut prev = [0.0; 3];
    for a in grid().filter(|a| *a <= 0.5 + 1e-9) {
        let e: Vec<f64> = ATTACKERS
            .iter()
            .map(|&s| evaluate(s, a, &tm, DEFAULT_TRUNCATION).unwrap().e_a)
            .collect();
        for i in 0..3 {
            assert!(e[i] > prev[i], "{:?} not increasing at {a}", ATTACKERS[i]);
            prev[i] = e[i];
        }
        let (rum, uum, suum) = (e[0], e[1], e[2]);
        assert!(suum > uum && uum > rum && rum > a, "ordering at {a}: {suum} {uum} {rum}");
    }
}

#[test]
fn truncation_stable() {
    let tm = TimingModel::default();
    let e32 = evaluate(StrategyKind::Suum, 0.45, &tm, 32).unwrap().e_a;
    let e64 = evaluate(StrategyKind::Suum, 0.45, &tm, 64).unwrap().e_a;
    assert!((e32 - e64).abs() < 1e-6);
}

#[test]
fn suum_closed_form_share() {
    // Every adversary block eventually orphans one honest block.
    for a in grid().filter(|a| *a < 0.5) {
        let p = evaluate(StrategyKind::Suum, a, &TimingModel::default(), 64).unwrap();
        assert!((p.e_a - a / (1.0 - a)).abs() < 1e-9);
        assert!(p.r_h < 1.0 - a);
    }
}

#[test]
fn uum_attack_probability_matches_chain_walk() {
    let m = build_chain(StrategyKind::Uum, 0.25, &TimingModel::default(), 1).unwrap();
    let d = stationary(&m).unwrap();
    let attack = m.index_of(ControlState::Attack).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let steps = 10_000_000u64;
    let mut s = 0usize;
    let mut hits = 0u64;
    for _ in 0..steps {
        let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let mut acc = 0.0;
        let row = &m.matrix[s];
        let mut next = row.len() - 1;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = j;
                break;
            }
        }
        s = next;
        hits += u64::from(s == attack);
    }
    let pi = d.probabilities[attack];
    let est = hits as f64 / steps as f64;
    // Correlated walk: inflate the iid error by the chain's mixing factor.
    let lambda = 1.0 - m.matrix[attack][0] - m.matrix[0][attack];
    let sigma = (pi * (1.0 - pi) / steps as f64 * (1.0 + lambda) / (1.0 - lambda)).sqrt();
    assert!((est - pi).abs() < 3.0 * sigma, "{est} vs {pi} (sigma {sigma})");
}
