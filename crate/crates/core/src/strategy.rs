//! Mining strategies as event-driven state machines.
//!
//! Every adversarial timestamp is certified by the exact difficulty rule
//! before it is emitted; the floor-based success predicates are kept as
//! separate, testable approximations and never drive a decision.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::chain::{BlockHeader, BlockId, ChainConstants, Difficulty, Timestamp};

/// Difficulty used when a predicate is evaluated without a concrete parent.
pub const DEFAULT_PARENT_DIFFICULTY: Difficulty = 4_000_000;

/// Timestamp difference the RUM adversary uses against its parent.
pub const RUM_ADVERSARY_DT: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("timestamps must be strictly increasing")]
    InvalidInput,
    #[error("honest gap is below one adjustment bucket, no attack was initiated")]
    InitiationViolated,
    #[error("no timestamp in the valid window gives strict difficulty dominance")]
    AttackInfeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Honest,
    Rum,
    Uum,
    Suum,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::Honest, Self::Rum, Self::Uum, Self::Suum];

    pub fn name(self) -> &'static str {
        match self {
            Self::Honest => "honest",
            Self::Rum => "rum",
            Self::Uum => "uum",
            Self::Suum => "suum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    pub fn initial_state(self) -> StrategyState {
        match self {
            Self::Honest => StrategyState::Honest,
            Self::Rum => StrategyState::Rum(Phase::Deployment),
            Self::Uum => StrategyState::Uum(Phase::Deployment),
            Self::Suum => StrategyState::Suum(SuumPhase::Deployment),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Deployment,
    Attack,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SuumPhase {
    Deployment,
    Downgrade,
    /// Private-chain lead; always at least one.
    Attack(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyState {
    Honest,
    Rum(Phase),
    Uum(Phase),
    Suum(SuumPhase),
}

/// Strategy-independent view of a control state; the Markov states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControlState {
    Deployment,
    Downgrade,
    Attack,
    AttackLevel(u32),
}

impl StrategyState {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Self::Honest => StrategyKind::Honest,
            Self::Rum(_) => StrategyKind::Rum,
            Self::Uum(_) => StrategyKind::Uum,
            Self::Suum(_) => StrategyKind::Suum,
        }
    }

    pub fn control(&self) -> ControlState {
        match self {
            Self::Honest
            | Self::Rum(Phase::Deployment)
            | Self::Uum(Phase::Deployment)
            | Self::Suum(SuumPhase::Deployment) => ControlState::Deployment,
            Self::Rum(Phase::Attack) | Self::Uum(Phase::Attack) => ControlState::Attack,
            Self::Suum(SuumPhase::Downgrade) => ControlState::Downgrade,
            Self::Suum(SuumPhase::Attack(i)) => ControlState::AttackLevel(*i),
        }
    }

    /// Number of withheld blocks the state implies.
    pub fn private_lead(&self) -> u32 {
        match self {
            Self::Suum(SuumPhase::Attack(i)) => *i,
            _ => 0,
        }
    }

    pub fn on_event(self, ev: &MiningEvent<'_>) -> (StrategyState, Action) {
        match self {
            Self::Honest => (self, honest_on_event(ev)),
            Self::Rum(p) => {
                let (p, a) = rum_on_event(p, ev);
                (Self::Rum(p), a)
            }
            Self::Uum(p) => {
                let (p, a) = uum_on_event(p, ev);
                (Self::Uum(p), a)
            }
            Self::Suum(p) => {
                let (p, a) = suum_on_event(p, ev);
                (Self::Suum(p), a)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Finder {
    Adversary,
    Honest,
}

/// A block-finding event as seen by a strategy.
///
/// For honest finds, `tip` is the honest block that was just published and
/// `tip_parent` its parent. For adversary finds, `tip` is the current public
/// tip. `private_tip` is the provisional timestamp of the newest withheld
/// block, if any.
#[derive(Clone, Copy, Debug)]
pub struct MiningEvent<'a> {
    pub finder: Finder,
    pub arrival_time: f64,
    pub tip: &'a BlockHeader,
    pub tip_parent: Option<&'a BlockHeader>,
    pub private_tip: Option<Timestamp>,
}

impl MiningEvent<'_> {
    /// Timestamp difference between the tip and its parent.
    pub fn tip_dt(&self) -> Option<u64> {
        self.tip_parent.map(|p| self.tip.timestamp.saturating_sub(p.timestamp))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    NoOp,
    Publish { parent: BlockId, timestamp: Timestamp },
    Withhold { timestamp: Timestamp },
    /// Releases the oldest withheld blocks on top of the honest block's parent.
    Release { count: u32, timestamps: Vec<Timestamp> },
    /// The withheld chain cannot beat the honest block and is dropped.
    AttackInfeasible { discarded: u32 },
}

/// Truthful timestamp: arrival time floored to whole seconds, at least one
/// second after the parent.
pub fn honest_timestamp(parent: &BlockHeader, arrival_time: f64) -> Timestamp {
    let floored = if arrival_time <= 0.0 { 0 } else { libm::floor(arrival_time) as u64 };
    floored.max(parent.timestamp + 1)
}

/// Honest population: publishes its own finds on the tip, never withholds.
pub fn honest_on_event(ev: &MiningEvent<'_>) -> Action {
    match ev.finder {
        Finder::Honest => Action::Publish {
            parent: ev.tip.id,
            timestamp: honest_timestamp(ev.tip, ev.arrival_time),
        },
        Finder::Adversary => Action::NoOp,
    }
}

fn floor_div9(x: i64) -> i64 {
    x.div_euclid(9)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredicateId {
    UumInitiation,
    UumSuccess,
    UumMinRisk,
    Downgrade,
    SuumSuccessFirst,
    SuumSuccessLater,
    SuumMinRisk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateReport {
    pub predicate_id: PredicateId,
    pub holds: bool,
    /// Ground truth from the difficulty rule.
    pub exact_dominance: bool,
}

/// UUM initiation: `floor((t1h - t0h) / 9) >= 1`.
pub fn predicate_uum_initiation(t1h: Timestamp, t0h: Timestamp) -> Result<bool, StrategyError> {
    if t1h <= t0h {
        return Err(StrategyError::InvalidInput);
    }
    Ok((t1h - t0h) / 9 >= 1)
}

/// UUM downgrades to RUM: `floor((t1h - t0h) / 9) == 1`.
pub fn predicate_downgrade(t1h: Timestamp, t0h: Timestamp) -> Result<bool, StrategyError> {
    if t1h <= t0h {
        return Err(StrategyError::InvalidInput);
    }
    Ok((t1h - t0h) / 9 == 1)
}

fn dominance(parent_difficulty: Difficulty, pu: bool, dt_adversary: u64, dt_honest: u64) -> bool {
    let c = ChainConstants::ETHEREUM;
    match (
        c.compute_difficulty(parent_difficulty, pu, dt_adversary),
        c.compute_difficulty(parent_difficulty, pu, dt_honest),
    ) {
        (Ok(a), Ok(h)) => a > h,
        _ => false,
    }
}

fn in_window(dt: i64) -> bool {
    (1..900).contains(&dt)
}

/// UUM success (common parent at `t0a`), evaluated with the default parent.
pub fn predicate_uum_success(
    t1h: Timestamp,
    t1a: Timestamp,
    t0a: Timestamp,
) -> Result<PredicateReport, StrategyError> {
    predicate_uum_success_with(DEFAULT_PARENT_DIFFICULTY, false, t1h, t1a, t0a)
}

pub fn predicate_uum_success_with(
    parent_difficulty: Difficulty,
    parent_refs_uncles: bool,
    t1h: Timestamp,
    t1a: Timestamp,
    t0a: Timestamp,
) -> Result<PredicateReport, StrategyError> {
    if t1a <= t0a || t1h <= t0a {
        return Err(StrategyError::InvalidInput);
    }
    let (h, a, o) = (t1h as i64, t1a as i64, t0a as i64);
    Ok(PredicateReport {
        predicate_id: PredicateId::UumSuccess,
        holds: floor_div9(h - a) >= 1 && in_window(a - o),
        exact_dominance: dominance(parent_difficulty, parent_refs_uncles, t1a - t0a, t1h - t0a),
    })
}

/// UUM success with minimal risk: `floor((t1h - t1a) / 9) == 1`.
pub fn predicate_uum_minrisk(
    t1h: Timestamp,
    t1a: Timestamp,
    t0a: Timestamp,
) -> Result<PredicateReport, StrategyError> {
    let mut r = predicate_uum_success(t1h, t1a, t0a)?;
    r.predicate_id = PredicateId::UumMinRisk;
    r.holds = floor_div9(t1h as i64 - t1a as i64) == 1 && in_window(t1a as i64 - t0a as i64);
    Ok(r)
}

/// Gaps of one SUUM height: the honest block against its parent and the
/// released private block against its parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeightGaps {
    pub honest_gap: u64,
    pub private_gap: u64,
}

/// SUUM success at a height: `i = 1` compares the honest block with the
/// shared parent, `i >= 2` compares the gap difference. Dominance assumes
/// equal parent difficulties.
pub fn predicate_suum_success(i: u32, gaps: HeightGaps) -> Result<PredicateReport, StrategyError> {
    suum_predicate(i, gaps, false)
}

/// SUUM success with minimal risk (floor exactly one).
pub fn predicate_suum_minrisk(i: u32, gaps: HeightGaps) -> Result<PredicateReport, StrategyError> {
    suum_predicate(i, gaps, true)
}

fn suum_predicate(i: u32, gaps: HeightGaps, minimal: bool) -> Result<PredicateReport, StrategyError> {
    if i == 0 || gaps.honest_gap == 0 || gaps.private_gap == 0 {
        return Err(StrategyError::InvalidInput);
    }
    let (h, a) = (gaps.honest_gap as i64, gaps.private_gap as i64);
    let lhs = if i == 1 { floor_div9(h) } else { floor_div9(h - a) };
    let floor_ok = if minimal { lhs == 1 } else { lhs >= 1 };
    let predicate_id = match (minimal, i) {
        (true, _) => PredicateId::SuumMinRisk,
        (false, 1) => PredicateId::SuumSuccessFirst,
        (false, _) => PredicateId::SuumSuccessLater,
    };
    Ok(PredicateReport {
        predicate_id,
        holds: floor_ok && in_window(a),
        exact_dominance: dominance(DEFAULT_PARENT_DIFFICULTY, false, gaps.private_gap, gaps.honest_gap),
    })
}

/// Largest timestamp at or below `target` (clamped into the valid window
/// above `private_parent`) whose block strictly out-weighs
/// `honest_difficulty`.
fn certified_timestamp(
    private_parent: &BlockHeader,
    target: i128,
    honest_difficulty: Difficulty,
) -> Option<Timestamp> {
    let c = ChainConstants::ETHEREUM;
    let lo = private_parent.timestamp + 1;
    let hi = private_parent.timestamp + c.dt_max_for_nonfloor - 1;
    let start = target.clamp(lo as i128, hi as i128) as u64;
    (lo..=start).rev().find(|&t| {
        c.compute_difficulty(private_parent.difficulty, private_parent.refs_uncles(), t - private_parent.timestamp)
            .is_ok_and(|d| d > honest_difficulty)
    })
}

/// UUM publication timestamp against the honest block `honest` that shares
/// `parent` with the adversary's block: the minimal-risk point
/// `t1h - 9` when it is certified, otherwise the closest certified timestamp
/// below it.
pub fn uum_choose_timestamp(parent: &BlockHeader, honest: &BlockHeader) -> Result<Timestamp, StrategyError> {
    if honest.timestamp < parent.timestamp + 9 {
        return Err(StrategyError::InitiationViolated);
    }
    certified_timestamp(parent, honest.timestamp as i128 - 9, honest.difficulty)
        .ok_or(StrategyError::AttackInfeasible)
}

/// RUM publication timestamp: eight seconds after the shared parent.
pub fn rum_choose_timestamp(parent: &BlockHeader, honest: &BlockHeader) -> Result<Timestamp, StrategyError> {
    certified_timestamp(parent, (parent.timestamp + RUM_ADVERSARY_DT) as i128, honest.difficulty)
        .ok_or(StrategyError::AttackInfeasible)
}

/// Provisional timestamp of a newly withheld block.
pub fn suum_withhold_timestamp(t_prev_private: Timestamp) -> Timestamp {
    t_prev_private + 1
}

/// Release timestamp of the next private block against the honest block
/// just published. The target keeps the gap difference at exactly nine
/// seconds; anything else falls back to the closest certified timestamp.
pub fn suum_release_timestamp(
    honest_parent: &BlockHeader,
    honest: &BlockHeader,
    private_parent: &BlockHeader,
) -> Result<Timestamp, StrategyError> {
    let honest_gap = honest.timestamp as i128 - honest_parent.timestamp as i128;
    let target = private_parent.timestamp as i128 + honest_gap - 9;
    certified_timestamp(private_parent, target, honest.difficulty).ok_or(StrategyError::AttackInfeasible)
}

fn honest_publish(ev: &MiningEvent<'_>) -> Action {
    Action::Publish {
        parent: ev.tip.id,
        timestamp: honest_timestamp(ev.tip, ev.arrival_time),
    }
}

fn fork_publish(
    ev: &MiningEvent<'_>,
    choose: fn(&BlockHeader, &BlockHeader) -> Result<Timestamp, StrategyError>,
) -> Action {
    match ev.tip_parent.map(|p| (p, choose(p, ev.tip))) {
        Some((parent, Ok(timestamp))) => Action::Publish {
            parent: parent.id,
            timestamp,
        },
        _ => honest_publish(ev),
    }
}

fn window_9_18(dt: Option<u64>) -> bool {
    matches!(dt, Some(9..=17))
}

fn at_least_9(dt: Option<u64>) -> bool {
    matches!(dt, Some(d) if d >= 9)
}

/// UUM: attack whenever the honest tip is at least one bucket after its
/// parent.
pub fn uum_on_event(phase: Phase, ev: &MiningEvent<'_>) -> (Phase, Action) {
    match (phase, ev.finder) {
        (Phase::Deployment, Finder::Adversary) => (Phase::Deployment, honest_publish(ev)),
        (Phase::Attack, Finder::Adversary) => (Phase::Deployment, fork_publish(ev, uum_choose_timestamp)),
        (_, Finder::Honest) if at_least_9(ev.tip_dt()) => (Phase::Attack, Action::NoOp),
        (_, Finder::Honest) => (Phase::Deployment, Action::NoOp),
    }
}

/// RUM: attack only when the honest tip lies in the `[9, 18)` window, where
/// the adversary's block costs no extra difficulty.
pub fn rum_on_event(phase: Phase, ev: &MiningEvent<'_>) -> (Phase, Action) {
    match (phase, ev.finder) {
        (Phase::Deployment, Finder::Adversary) => (Phase::Deployment, honest_publish(ev)),
        (Phase::Attack, Finder::Adversary) => (Phase::Deployment, fork_publish(ev, rum_choose_timestamp)),
        (_, Finder::Honest) if window_9_18(ev.tip_dt()) => (Phase::Attack, Action::NoOp),
        (_, Finder::Honest) => (Phase::Deployment, Action::NoOp),
    }
}

/// SUUM: withhold from deployment, release one block per honest block, and
/// fall back to UUM behaviour in the downgrade phase.
pub fn suum_on_event(phase: SuumPhase, ev: &MiningEvent<'_>) -> (SuumPhase, Action) {
    match (phase, ev.finder) {
        (SuumPhase::Deployment, Finder::Adversary) => (
            SuumPhase::Attack(1),
            Action::Withhold {
                timestamp: suum_withhold_timestamp(ev.tip.timestamp),
            },
        ),
        (SuumPhase::Downgrade, Finder::Adversary) => {
            (SuumPhase::Deployment, fork_publish(ev, uum_choose_timestamp))
        }
        (SuumPhase::Attack(i), Finder::Adversary) => {
            let prev = ev.private_tip.unwrap_or(ev.tip.timestamp);
            (
                SuumPhase::Attack(i + 1),
                Action::Withhold {
                    timestamp: suum_withhold_timestamp(prev),
                },
            )
        }
        (SuumPhase::Attack(i), Finder::Honest) => {
            assert!(i >= 1, "release with an empty private chain");
            let released = ev
                .tip_parent
                .ok_or(StrategyError::InvalidInput)
                .and_then(|parent| suum_release_timestamp(parent, ev.tip, parent));
            match released {
                Ok(t) => {
                    let next = if i == 1 { SuumPhase::Deployment } else { SuumPhase::Attack(i - 1) };
                    (
                        next,
                        Action::Release {
                            count: 1,
                            timestamps: vec![t],
                        },
                    )
                }
                Err(_) => (SuumPhase::Deployment, Action::AttackInfeasible { discarded: i }),
            }
        }
        (SuumPhase::Deployment | SuumPhase::Downgrade, Finder::Honest) => {
            if at_least_9(ev.tip_dt()) {
                (SuumPhase::Downgrade, Action::NoOp)
            } else {
                (SuumPhase::Deployment, Action::NoOp)
            }
        }
    }
}

/// Result of comparing the floor predicate with the difficulty oracle over
/// a timestamp grid with the common parent at time zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateAudit {
    pub points: u64,
    pub agreements: u64,
    /// `(t1a, t1h)` pairs where predicate and oracle disagree.
    pub boundary: Vec<(Timestamp, Timestamp)>,
    /// Honest timestamps for which the UUM policy publishes.
    pub publishes: u64,
    /// Publications that win the fork against the honest block.
    pub publish_wins: u64,
}

pub fn audit_success_grid(
    t1a: core::ops::RangeInclusive<Timestamp>,
    t1h: core::ops::RangeInclusive<Timestamp>,
) -> PredicateAudit {
    let c = ChainConstants::ETHEREUM;
    let mut audit = PredicateAudit {
        points: 0,
        agreements: 0,
        boundary: Vec::new(),
        publishes: 0,
        publish_wins: 0,
    };
    for a in t1a.clone() {
        for h in t1h.clone() {
            let Ok(r) = predicate_uum_success(h, a, 0) else { continue };
            audit.points += 1;
            if r.holds == r.exact_dominance {
                audit.agreements += 1;
            } else {
                audit.boundary.push((a, h));
            }
        }
    }
    let parent = BlockHeader::genesis(BlockId(0), DEFAULT_PARENT_DIFFICULTY);
    for h in t1h {
        let Ok(honest) = BlockHeader::child(&parent, BlockId(1), h, crate::chain::Participant::Honest, Vec::new(), &c)
        else {
            continue;
        };
        if let Ok(ts) = uum_choose_timestamp(&parent, &honest) {
            audit.publishes += 1;
            let adv = BlockHeader::child(&parent, BlockId(2), ts, crate::chain::Participant::Adversary, Vec::new(), &c)
                .expect("chosen timestamps are valid");
            let choice = crate::chain::fork_select(&adv, &honest, honest.id).expect("siblings");
            if choice.winner == adv.id {
                audit.publish_wins += 1;
            }
        }
    }
    audit
}

/// Timing guard of a transition-table row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Guard {
    Any,
    Below9,
    AtLeast9,
    Window9To18,
    OutsideWindow,
}

impl Guard {
    pub fn admits(self, dt: u64) -> bool {
        match self {
            Self::Any => true,
            Self::Below9 => dt < 9,
            Self::AtLeast9 => dt >= 9,
            Self::Window9To18 => (9..18).contains(&dt),
            Self::OutsideWindow => !(9..18).contains(&dt),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSource {
    Fixed(ControlState),
    /// `AttackLevel(i)` with `i >= min`.
    LevelAtLeast(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowDestination {
    Fixed(ControlState),
    LevelUp,
    LevelDown,
}

/// One row of a strategy's transition table with its per-transition
/// coin-base rewards (honest, adversary).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub row: u8,
    pub from: RowSource,
    pub finder: Finder,
    pub guard: Guard,
    pub to: RowDestination,
    pub reward_honest: i8,
    pub reward_adversary: i8,
    /// Orphans an honest block (prepaid recall of `-1`).
    pub recall: bool,
}

impl TableRow {
    pub fn matches_source(&self, s: ControlState) -> bool {
        match (self.from, s) {
            (RowSource::Fixed(f), s) => f == s,
            (RowSource::LevelAtLeast(min), ControlState::AttackLevel(i)) => i >= min,
            _ => false,
        }
    }

    pub fn destination(&self, s: ControlState) -> ControlState {
        match (self.to, s) {
            (RowDestination::Fixed(d), _) => d,
            (RowDestination::LevelUp, ControlState::AttackLevel(i)) => ControlState::AttackLevel(i + 1),
            (RowDestination::LevelDown, ControlState::AttackLevel(i)) => ControlState::AttackLevel(i - 1),
            (_, s) => s,
        }
    }
}

const fn row(
    row: u8,
    from: RowSource,
    finder: Finder,
    guard: Guard,
    to: RowDestination,
    reward_honest: i8,
    reward_adversary: i8,
) -> TableRow {
    TableRow {
        row,
        from,
        finder,
        guard,
        to,
        reward_honest,
        reward_adversary,
        recall: reward_honest < 0,
    }
}

use ControlState::{Attack as A, Deployment as D, Downgrade as G};
use RowDestination::{Fixed as To, LevelDown, LevelUp};
use RowSource::{Fixed as From, LevelAtLeast};

const HONEST_TABLE: [TableRow; 2] = [
    row(1, From(D), Finder::Adversary, Guard::Any, To(D), 0, 1),
    row(2, From(D), Finder::Honest, Guard::Any, To(D), 1, 0),
];

const RUM_TABLE: [TableRow; 6] = [
    row(1, From(D), Finder::Adversary, Guard::Any, To(D), 0, 1),
    row(2, From(D), Finder::Honest, Guard::OutsideWindow, To(D), 1, 0),
    row(3, From(D), Finder::Honest, Guard::Window9To18, To(A), 1, 0),
    row(4, From(A), Finder::Honest, Guard::Window9To18, To(A), 1, 0),
    row(5, From(A), Finder::Honest, Guard::OutsideWindow, To(D), 1, 0),
    row(6, From(A), Finder::Adversary, Guard::Any, To(D), -1, 1),
];

const UUM_TABLE: [TableRow; 6] = [
    row(1, From(D), Finder::Adversary, Guard::Any, To(D), 0, 1),
    row(2, From(D), Finder::Honest, Guard::Below9, To(D), 1, 0),
    row(3, From(D), Finder::Honest, Guard::AtLeast9, To(A), 1, 0),
    row(4, From(A), Finder::Honest, Guard::AtLeast9, To(A), 1, 0),
    row(5, From(A), Finder::Honest, Guard::Below9, To(D), 1, 0),
    row(6, From(A), Finder::Adversary, Guard::Any, To(D), -1, 1),
];

const SUUM_TABLE: [TableRow; 9] = [
    row(1, From(D), Finder::Adversary, Guard::Any, To(ControlState::AttackLevel(1)), 0, 1),
    row(2, From(D), Finder::Honest, Guard::Below9, To(D), 1, 0),
    row(3, From(D), Finder::Honest, Guard::AtLeast9, To(G), 1, 0),
    row(4, From(G), Finder::Honest, Guard::Below9, To(D), 1, 0),
    row(5, From(G), Finder::Honest, Guard::AtLeast9, To(G), 1, 0),
    row(6, From(G), Finder::Adversary, Guard::Any, To(D), -1, 1),
    row(7, From(ControlState::AttackLevel(1)), Finder::Honest, Guard::Any, To(D), 0, 0),
    row(8, LevelAtLeast(1), Finder::Adversary, Guard::Any, LevelUp, -1, 1),
    row(9, LevelAtLeast(2), Finder::Honest, Guard::Any, LevelDown, 1, 0),
];

/// Transition table of a strategy, including per-row rewards.
pub fn transition_table(kind: StrategyKind) -> &'static [TableRow] {
    match kind {
        StrategyKind::Honest => &HONEST_TABLE,
        StrategyKind::Rum => &RUM_TABLE,
        StrategyKind::Uum => &UUM_TABLE,
        StrategyKind::Suum => &SUUM_TABLE,
    }
}

/// Finds the table row explaining an observed transition, if any. `dt` is
/// the honest tip's timestamp difference (ignored for adversary finds).
pub fn explain_transition(
    kind: StrategyKind,
    from: ControlState,
    finder: Finder,
    dt: u64,
    to: ControlState,
) -> Option<&'static TableRow> {
    transition_table(kind).iter().find(|r| {
        r.finder == finder && r.matches_source(from) && r.guard.admits(dt) && r.destination(from) == to
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Participant;

    fn header(id: u64, ts: Timestamp, parent: Option<&BlockHeader>) -> BlockHeader {
        match parent {
            None => {
                let mut g = BlockHeader::genesis(BlockId(id), DEFAULT_PARENT_DIFFICULTY);
                g.timestamp = ts;
                g
            }
            Some(p) => BlockHeader::child(p, BlockId(id), ts, Participant::Honest, Vec::new(), &ChainConstants::ETHEREUM)
                .unwrap(),
        }
    }

    fn uum_ts(t0a: Timestamp, t1h: Timestamp) -> Result<Timestamp, StrategyError> {
        let parent = header(0, t0a, None);
        let honest = header(1, t1h, Some(&parent));
        uum_choose_timestamp(&parent, &honest)
    }

    #[test]
    fn honest_publishes_clamped_arrival() {
        let parent = header(0, 90, None);
        let ev = |t, finder| MiningEvent {
            finder,
            arrival_time: t,
            tip: &parent,
            tip_parent: None,
            private_tip: None,
        };
        assert_eq!(
            honest_on_event(&ev(100.0, Finder::Honest)),
            Action::Publish { parent: BlockId(0), timestamp: 100 }
        );
        assert_eq!(
            honest_on_event(&ev(90.4, Finder::Honest)),
            Action::Publish { parent: BlockId(0), timestamp: 91 }
        );
        assert_eq!(honest_on_event(&ev(100.0, Finder::Adversary)), Action::NoOp);
    }

    #[test]
    fn t1_examples() {
        assert_eq!(predicate_uum_initiation(9, 0), Ok(true));
        assert_eq!(predicate_uum_initiation(8, 0), Ok(false));
        assert_eq!(predicate_uum_initiation(9000, 0), Ok(true));
        assert_eq!(predicate_uum_initiation(5, 5), Err(StrategyError::InvalidInput));
        assert_eq!(predicate_downgrade(17, 0), Ok(true));
        assert_eq!(predicate_downgrade(18, 0), Ok(false));
    }

    #[test]
    fn t2_examples() {
        let r = predicate_uum_success(10, 1, 0).unwrap();
        assert!(r.holds && r.exact_dominance);
        let r = predicate_uum_success(910, 900, 0).unwrap();
        assert!(!r.holds);
        let r = predicate_uum_success(9, 8, 0).unwrap();
        assert!(!r.holds && r.exact_dominance);
        assert_eq!(predicate_uum_success(9, 0, 0), Err(StrategyError::InvalidInput));
    }

    #[test]
    fn t3_minrisk() {
        assert!(predicate_uum_minrisk(20, 11, 0).unwrap().holds);
        assert!(!predicate_uum_minrisk(20, 2, 0).unwrap().holds);
    }

    #[test]
    fn uum_timestamp_examples() {
        assert_eq!(uum_ts(0, 20), Ok(11));
        assert_eq!(uum_ts(0, 9), Ok(1));
        assert_eq!(uum_ts(0, 1000), Ok(899));
        assert_eq!(uum_ts(0, 8), Err(StrategyError::InitiationViolated));
    }

    #[test]
    fn uum_timestamp_matches_exhaustive_scan() {
        // Oracle: the largest t1a in [1, min(t1h - 9, 899)] (or 1) whose
        // difficulty beats the honest block.
        let parent = header(0, 0, None);
        for t1h in 9..1200u64 {
            let honest = header(1, t1h, Some(&parent));
            let upper = t1h.saturating_sub(9).clamp(1, 899);
            let expected = (1..=upper).rev().find(|&t| {
                ChainConstants::ETHEREUM.compute_difficulty(parent.difficulty, false, t).unwrap() > honest.difficulty
            });
            assert_eq!(uum_choose_timestamp(&parent, &honest).ok(), expected, "t1h={t1h}");
        }
    }

    #[test]
    fn rum_timestamp_is_eight_seconds() {
        let parent = header(0, 0, None);
        for t1h in 9..18 {
            let honest = header(1, t1h, Some(&parent));
            assert_eq!(rum_choose_timestamp(&parent, &honest), Ok(8));
        }
    }

    #[test]
    fn suum_timestamps() {
        assert_eq!(suum_withhold_timestamp(100), 101);
        assert_eq!(suum_withhold_timestamp(0), 1);
        assert_eq!(suum_withhold_timestamp(899), 900);

        let p = header(0, 0, None);
        let h = header(1, 18, Some(&p));
        assert_eq!(suum_release_timestamp(&p, &h, &p), Ok(9));

        // Separate parents at height 1, honest gap 20 -> private gap 11.
        let hp = header(2, 100, None);
        let hb = header(3, 120, Some(&hp));
        let pp = header(4, 50, None);
        assert_eq!(suum_release_timestamp(&hp, &hb, &pp), Ok(61));

        let fast = header(5, 101, Some(&hp));
        assert_eq!(suum_release_timestamp(&hp, &fast, &hp), Err(StrategyError::AttackInfeasible));
    }

    #[test]
    fn suum_predicates() {
        let r = predicate_suum_minrisk(2, HeightGaps { honest_gap: 20, private_gap: 11 }).unwrap();
        assert!(r.holds && r.exact_dominance);
        let r = predicate_suum_success(2, HeightGaps { honest_gap: 1, private_gap: 1 }).unwrap();
        assert!(!r.holds && !r.exact_dominance);
        let r = predicate_suum_success(1, HeightGaps { honest_gap: 18, private_gap: 3 }).unwrap();
        assert_eq!(r.predicate_id, PredicateId::SuumSuccessFirst);
        assert!(r.holds);
    }

    fn honest_event<'a>(tip: &'a BlockHeader, parent: &'a BlockHeader) -> MiningEvent<'a> {
        MiningEvent {
            finder: Finder::Honest,
            arrival_time: tip.timestamp as f64,
            tip,
            tip_parent: Some(parent),
            private_tip: None,
        }
    }

    #[test]
    fn uum_table_examples() {
        let p = header(0, 0, None);
        let h12 = header(1, 12, Some(&p));
        let h5 = header(2, 5, Some(&p));
        assert_eq!(uum_on_event(Phase::Deployment, &honest_event(&h12, &p)), (Phase::Attack, Action::NoOp));
        assert_eq!(uum_on_event(Phase::Attack, &honest_event(&h5, &p)), (Phase::Deployment, Action::NoOp));
        let ev = MiningEvent {
            finder: Finder::Adversary,
            arrival_time: 20.0,
            tip: &h12,
            tip_parent: Some(&p),
            private_tip: None,
        };
        assert_eq!(
            uum_on_event(Phase::Attack, &ev),
            (Phase::Deployment, Action::Publish { parent: BlockId(0), timestamp: 3 })
        );
    }

    #[test]
    fn rum_table_examples() {
        let p = header(0, 0, None);
        let h17 = header(1, 17, Some(&p));
        let h18 = header(2, 18, Some(&p));
        assert_eq!(rum_on_event(Phase::Deployment, &honest_event(&h17, &p)).0, Phase::Attack);
        assert_eq!(rum_on_event(Phase::Deployment, &honest_event(&h18, &p)).0, Phase::Deployment);
        let ev = MiningEvent {
            finder: Finder::Adversary,
            arrival_time: 30.0,
            tip: &h17,
            tip_parent: Some(&p),
            private_tip: None,
        };
        assert_eq!(
            rum_on_event(Phase::Attack, &ev),
            (Phase::Deployment, Action::Publish { parent: BlockId(0), timestamp: 8 })
        );
    }

    #[test]
    fn suum_table_examples() {
        let p = header(0, 0, None);
        let h = header(1, 30, Some(&p));
        let adv = MiningEvent {
            finder: Finder::Adversary,
            arrival_time: 3.0,
            tip: &p,
            tip_parent: None,
            private_tip: None,
        };
        assert_eq!(
            suum_on_event(SuumPhase::Deployment, &adv),
            (SuumPhase::Attack(1), Action::Withhold { timestamp: 1 })
        );
        let (next, action) = suum_on_event(SuumPhase::Attack(3), &honest_event(&h, &p));
        assert_eq!(next, SuumPhase::Attack(2));
        assert!(matches!(action, Action::Release { count: 1, .. }));
        let adv_downgrade = MiningEvent {
            finder: Finder::Adversary,
            arrival_time: 35.0,
            tip: &h,
            tip_parent: Some(&p),
            private_tip: None,
        };
        let (next, action) = suum_on_event(SuumPhase::Downgrade, &adv_downgrade);
        assert_eq!(next, SuumPhase::Deployment);
        assert_eq!(action, Action::Publish { parent: BlockId(0), timestamp: 21 });

        let fast = header(2, 4, Some(&p));
        assert_eq!(
            suum_on_event(SuumPhase::Attack(2), &honest_event(&fast, &p)),
            (SuumPhase::Deployment, Action::AttackInfeasible { discarded: 2 })
        );
    }

    #[test]
    fn tables_explain_examples() {
        use ControlState::*;
        assert_eq!(
            explain_transition(StrategyKind::Uum, Attack, Finder::Adversary, 0, Deployment).map(|r| r.row),
            Some(6)
        );
        assert_eq!(
            explain_transition(StrategyKind::Suum, AttackLevel(3), Finder::Honest, 4, AttackLevel(2)).map(|r| r.row),
            Some(9)
        );
        assert_eq!(
            explain_transition(StrategyKind::Suum, AttackLevel(1), Finder::Adversary, 0, AttackLevel(2)).map(|r| r.row),
            Some(8)
        );
        assert!(explain_transition(StrategyKind::Suum, AttackLevel(1), Finder::Honest, 4, AttackLevel(2)).is_none());
    }
}
