//! Analytic evaluation of the strategy state machines as finite Markov
//! chains with per-transition reward pairs.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainConstants, Difficulty};
use crate::strategy::{transition_table, ControlState, Finder, Guard, StrategyKind, TableRow};

/// Default private-chain truncation for SUUM.
pub const DEFAULT_TRUNCATION: u32 = 32;

const ROW_TOLERANCE: f64 = 1e-12;
const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarkovError {
    #[error("mean block time must be positive and finite")]
    InvalidMeanBlockTime,
    #[error("alpha must lie in [0, 1)")]
    InvalidAlpha,
    #[error("truncation level must be at least 1")]
    InvalidTruncation,
    #[error("row {0} sums to {1}, not 1")]
    NotStochastic(usize, f64),
    #[error("chain has no unique stationary distribution")]
    NoUniqueStationary,
    #[error("total reward is zero")]
    ZeroTotal,
    #[error("attack cost needs d0 >= d1")]
    NegativeCost,
    #[error("mu must lie in [0, 1]")]
    InvalidMu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingDistribution {
    /// Real-valued exponential gaps.
    ExponentialContinuous,
    /// Exponential arrivals with timestamps floored to whole seconds.
    ExponentialDiscretized,
}

impl TimingDistribution {
    pub const ALL: [Self; 2] = [Self::ExponentialContinuous, Self::ExponentialDiscretized];

    pub fn name(self) -> &'static str {
        match self {
            Self::ExponentialContinuous => "continuous",
            Self::ExponentialDiscretized => "discretized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "continuous" | "exponential_continuous" => Some(Self::ExponentialContinuous),
            "discretized" | "exponential_discretized" => Some(Self::ExponentialDiscretized),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub mean_block_time: f64,
    pub distribution: TimingDistribution,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self {
            mean_block_time: 13.0,
            distribution: TimingDistribution::ExponentialContinuous,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingProbabilities {
    pub p_lt9: f64,
    pub p_9to18: f64,
    pub p_ge9: f64,
}

impl TimingProbabilities {
    pub fn guard(&self, g: Guard) -> f64 {
        match g {
            Guard::Any => 1.0,
            Guard::Below9 => self.p_lt9,
            Guard::AtLeast9 => self.p_ge9,
            Guard::Window9To18 => self.p_9to18,
            Guard::OutsideWindow => 1.0 - self.p_9to18,
        }
    }
}

/// Probability that a timestamp difference is at least `k` seconds.
fn tail(tm: &TimingModel, k: f64) -> f64 {
    let m = tm.mean_block_time;
    match tm.distribution {
        TimingDistribution::ExponentialContinuous => libm::exp(-k / m),
        // floor(u + X) >= k with a uniform phase u in [0, 1).
        TimingDistribution::ExponentialDiscretized => (m * libm::expm1(1.0 / m) * libm::exp(-k / m)).min(1.0),
    }
}

pub fn timing_probabilities(tm: &TimingModel) -> Result<TimingProbabilities, MarkovError> {
    if !(tm.mean_block_time > 0.0 && tm.mean_block_time.is_finite()) {
        return Err(MarkovError::InvalidMeanBlockTime);
    }
    let p_ge9 = tail(tm, 9.0);
    let p_ge18 = tail(tm, 18.0);
    Ok(TimingProbabilities {
        p_lt9: 1.0 - p_ge9,
        p_9to18: p_ge9 - p_ge18,
        p_ge9,
    })
}

/// One weighted edge of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub probability: f64,
    pub reward_honest: f64,
    pub reward_adversary: f64,
    pub table_row: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub strategy: StrategyKind,
    pub alpha: f64,
    pub states: Vec<ControlState>,
    /// Row-stochastic, `matrix[i][j] = P(i -> j)`.
    pub matrix: Vec<Vec<f64>>,
    pub transitions: Vec<Transition>,
}

impl TransitionModel {
    pub fn index_of(&self, s: ControlState) -> Option<usize> {
        self.states.iter().position(|&x| x == s)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn step_state(r: &TableRow, s: ControlState, cap: u32) -> ControlState {
    match r.destination(s) {
        ControlState::AttackLevel(i) if i > cap => ControlState::AttackLevel(cap),
        d => d,
    }
}

/// Builds the chain of `strategy` from its transition table. SUUM levels
/// are kept up to `truncate_n + 1`; the top level loops on itself when the
/// adversary finds another block.
pub fn build_chain(
    strategy: StrategyKind,
    alpha: f64,
    tm: &TimingModel,
    truncate_n: u32,
) -> Result<TransitionModel, MarkovError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(MarkovError::InvalidAlpha);
    }
    if strategy == StrategyKind::Suum && truncate_n < 1 {
        return Err(MarkovError::InvalidTruncation);
    }
    let tp = timing_probabilities(tm)?;
    let table = transition_table(strategy);
    let cap = truncate_n.saturating_add(1);

    let mut states = vec![ControlState::Deployment];
    let mut index: BTreeMap<ControlState, usize> = BTreeMap::new();
    index.insert(ControlState::Deployment, 0);
    let mut transitions = Vec::new();
    let mut cursor = 0;
    while cursor < states.len() {
        let s = states[cursor];
        for r in table.iter().filter(|r| r.matches_source(s)) {
            let d = step_state(r, s, cap);
            let to = *index.entry(d).or_insert_with(|| {
                states.push(d);
                states.len() - 1
            });
            let finder_p = match r.finder {
                Finder::Adversary => alpha,
                Finder::Honest => 1.0 - alpha,
            };
            transitions.push(Transition {
                from: cursor,
                to,
                probability: finder_p * tp.guard(r.guard),
                reward_honest: f64::from(r.reward_honest),
                reward_adversary: f64::from(r.reward_adversary),
                table_row: r.row,
            });
        }
        cursor += 1;
    }

    // Deterministic state order: Deployment, Downgrade, Attack, levels.
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by_key(|&i| states[i]);
    let mut remap = vec![0; states.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let states: Vec<ControlState> = order.iter().map(|&i| states[i]).collect();
    for t in &mut transitions {
        t.from = remap[t.from];
        t.to = remap[t.to];
    }
    transitions.sort_by_key(|t| (t.from, t.to, t.table_row));

    let n = states.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for t in &transitions {
        matrix[t.from][t.to] += t.probability;
    }
    for (i, row) in matrix.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if libm::fabs(sum - 1.0) > ROW_TOLERANCE {
            return Err(MarkovError::NotStochastic(i, sum));
        }
    }
    Ok(TransitionModel {
        strategy,
        alpha,
        states,
        matrix,
        transitions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    pub residual: f64,
}

impl StationaryDistribution {
    pub fn of(&self, model: &TransitionModel, s: ControlState) -> f64 {
        model.index_of(s).map_or(0.0, |i| self.probabilities[i])
    }

    /// Total mass of all attack states (`Attack` and every level).
    pub fn attack_total(&self, model: &TransitionModel) -> f64 {
        model
            .states
            .iter()
            .zip(&self.probabilities)
            .filter(|(s, _)| matches!(s, ControlState::Attack | ControlState::AttackLevel(_)))
            .map(|(_, p)| p)
            .sum()
    }
}

fn residual(matrix: &[Vec<f64>], pi: &[f64]) -> f64 {
    let n = pi.len();
    (0..n)
        .map(|j| {
            let next: f64 = (0..n).map(|i| pi[i] * matrix[i][j]).sum();
            libm::fabs(next - pi[j])
        })
        .fold(0.0, f64::max)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| libm::fabs(a[x][col]).total_cmp(&libm::fabs(a[y][col])))?;
        if libm::fabs(a[pivot][col]) < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..n {
                    a[r][c] -= factor * a[col][c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn power_iteration(matrix: &[Vec<f64>], start: Vec<f64>) -> Vec<f64> {
    let n = start.len();
    let mut pi = start;
    for _ in 0..200_000 {
        let mut next = vec![0.0; n];
        for (i, row) in matrix.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        // Lazy step keeps periodic chains convergent.
        for j in 0..n {
            next[j] = 0.5 * (next[j] + pi[j]);
        }
        pi = next;
        if residual(matrix, &pi) <= RESIDUAL_TOLERANCE * 0.01 {
            break;
        }
    }
    pi
}

/// Solves `pi P = pi`, `sum(pi) = 1`.
pub fn stationary(model: &TransitionModel) -> Result<StationaryDistribution, MarkovError> {
    let n = model.len();
    if n == 0 {
        return Err(MarkovError::NoUniqueStationary);
    }
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[j][i] = model.matrix[i][j];
        }
        a[i][i] -= 1.0;
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;

    let mut pi = solve_dense(a, b).unwrap_or_else(|| vec![1.0 / n as f64; n]);
    if residual(&model.matrix, &pi) > RESIDUAL_TOLERANCE || pi.iter().any(|&p| p < -1e-12) {
        pi = power_iteration(&model.matrix, vec![1.0 / n as f64; n]);
    }
    for p in &mut pi {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) {
        return Err(MarkovError::NoUniqueStationary);
    }
    for p in &mut pi {
        *p /= total;
    }
    let r = residual(&model.matrix, &pi);
    if r > RESIDUAL_TOLERANCE {
        return Err(MarkovError::NoUniqueStationary);
    }
    Ok(StationaryDistribution {
        probabilities: pi,
        residual: r,
    })
}

/// Absolute coin-base shares per step `(R_H, R_A)`.
pub fn absolute_shares(dist: &StationaryDistribution, model: &TransitionModel) -> (f64, f64) {
    model.transitions.iter().fold((0.0, 0.0), |(h, a), t| {
        let w = dist.probabilities[t.from] * t.probability;
        (h + w * t.reward_honest, a + w * t.reward_adversary)
    })
}

/// Relative shares `(E_H, E_A)`.
pub fn relative_shares(shares: (f64, f64)) -> Result<(f64, f64), MarkovError> {
    let total = shares.0 + shares.1;
    if !(total > 0.0) {
        return Err(MarkovError::ZeroTotal);
    }
    Ok((shares.0 / total, shares.1 / total))
}

/// Rate of honest blocks orphaned per step; the deficit `1 - R_H - R_A`.
pub fn orphan_rate(dist: &StationaryDistribution, model: &TransitionModel) -> f64 {
    let (h, a) = absolute_shares(dist, model);
    1.0 - h - a
}

/// Stationary forking rate per strategy.
///
/// SUUM counts one fork for every attack-state step plus downgrade attacks.
pub fn forking_rate(model: &TransitionModel, dist: &StationaryDistribution) -> f64 {
    let alpha = model.alpha;
    match model.strategy {
        StrategyKind::Honest => 0.0,
        StrategyKind::Rum | StrategyKind::Uum => dist.of(model, ControlState::Attack) * alpha,
        StrategyKind::Suum => dist.attack_total(model) + dist.of(model, ControlState::Downgrade) * alpha,
    }
}

/// Rate of forks completed per step under the event accounting used by the
/// simulator: each successful competing publication (UUM, RUM, SUUM
/// downgrade) and each completed SUUM cascade counts once.
pub fn fork_event_rate(model: &TransitionModel, dist: &StationaryDistribution) -> f64 {
    let alpha = model.alpha;
    match model.strategy {
        StrategyKind::Honest => 0.0,
        StrategyKind::Rum | StrategyKind::Uum => dist.of(model, ControlState::Attack) * alpha,
        StrategyKind::Suum => {
            dist.of(model, ControlState::Downgrade) * alpha
                + dist.of(model, ControlState::AttackLevel(1)) * (1.0 - alpha)
        }
    }
}

/// Exact attack cost `mu * (d0 - d1) / max_target`.
pub fn attack_cost(
    mu: &BigRational,
    d0: &BigUint,
    d1: &BigUint,
    constants: &ChainConstants,
) -> Result<BigRational, MarkovError> {
    if mu.is_negative() || *mu > BigRational::from_integer(BigInt::from(1)) {
        return Err(MarkovError::InvalidMu);
    }
    if d0 < d1 {
        return Err(MarkovError::NegativeCost);
    }
    let gap = BigInt::from(d0 - d1);
    if gap.is_zero() {
        return Ok(BigRational::zero());
    }
    Ok(mu * BigRational::new(gap, BigInt::from(constants.max_target())))
}

/// Difficulty gap a strategy's winning block carries over the honest block
/// in the worst case, as a multiple of the parent's adjustment quantum.
pub fn worst_case_gap_quanta(strategy: StrategyKind) -> Difficulty {
    match strategy {
        StrategyKind::Honest | StrategyKind::Rum => 0,
        StrategyKind::Uum | StrategyKind::Suum => 1,
    }
}

/// One analytic grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPoint {
    pub strategy: StrategyKind,
    pub alpha: f64,
    pub timing: TimingDistribution,
    pub pi_deploy: f64,
    pub pi_downgrade: f64,
    pub pi_attack_total: f64,
    pub r_h: f64,
    pub r_a: f64,
    pub e_a: f64,
    pub e_h: f64,
    pub fr: f64,
    pub fork_event_rate: f64,
    pub ac: f64,
}

/// Evaluates one `(strategy, alpha)` point. Attack cost uses
/// `mu = alpha` and a gap of `2^39` for the difficulty-raising strategies.
pub fn evaluate(
    strategy: StrategyKind,
    alpha: f64,
    tm: &TimingModel,
    truncate_n: u32,
) -> Result<AnalyticPoint, MarkovError> {
    let model = build_chain(strategy, alpha, tm, truncate_n)?;
    let dist = stationary(&model)?;
    let shares = absolute_shares(&dist, &model);
    let (e_h, e_a) = relative_shares(shares)?;
    let ac = if worst_case_gap_quanta(strategy) == 0 {
        0.0
    } else {
        alpha * libm::exp2(39.0 - 256.0)
    };
    Ok(AnalyticPoint {
        strategy,
        alpha,
        timing: tm.distribution,
        pi_deploy: dist.of(&model, ControlState::Deployment),
        pi_downgrade: dist.of(&model, ControlState::Downgrade),
        pi_attack_total: dist.attack_total(&model),
        r_h: shares.0,
        r_a: shares.1,
        e_a,
        e_h,
        fr: forking_rate(&model, &dist),
        fork_event_rate: fork_event_rate(&model, &dist),
        ac,
    })
}
