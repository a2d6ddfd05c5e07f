//! Discrete-event Monte Carlo engine.
//!
//! One trial mines `n_blocks` blocks on a real-valued clock. Honest blocks
//! carry their floored arrival time; the adversary runs a strategy state
//! machine and every competing publication is resolved by difficulty.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::chain::{
    fork_select_with, validate_header, BlockHeader, BlockId, ChainConstants, Difficulty, Participant, Reward,
    TieBreak,
};
use crate::markov::TimingDistribution;
use crate::strategy::{explain_transition, Action, Finder, MiningEvent, StrategyKind, StrategyState};

pub const DEFAULT_GENESIS_DIFFICULTY: Difficulty = 4_000_000;
pub const DEFAULT_N_BLOCKS: u64 = 100_000;
pub const DEFAULT_N_TRIALS: u32 = 30;
/// Below this many blocks the headline metrics are too noisy to report.
pub const MIN_BLOCKS_FOR_METRICS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("alpha must lie in [0, 1), got {0}")]
    Alpha(f64),
    #[error("mean block time must be positive, got {0}")]
    MeanBlockTime(f64),
    #[error("n_blocks must be positive")]
    Blocks,
    #[error("n_trials must be positive")]
    Trials,
    #[error("genesis difficulty must be positive")]
    GenesisDifficulty,
    #[error("fee rate must be non-negative")]
    FeeRate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub alpha: f64,
    pub strategy: StrategyKind,
    pub mean_block_time: f64,
    pub n_blocks: u64,
    pub n_trials: u32,
    pub seed: u64,
    /// Discretized: timestamps floor a real-valued clock. Continuous: the
    /// clock restarts at each truthful timestamp, so honest gaps are floored
    /// exponential draws.
    pub timing: TimingDistribution,
    pub genesis_difficulty: Difficulty,
    pub fee_rate_lambda: Reward,
    pub include_uncle_rewards: bool,
    pub tie_break: TieBreak,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            strategy: StrategyKind::Honest,
            mean_block_time: 13.0,
            n_blocks: DEFAULT_N_BLOCKS,
            n_trials: DEFAULT_N_TRIALS,
            seed: 0,
            timing: TimingDistribution::ExponentialContinuous,
            genesis_difficulty: DEFAULT_GENESIS_DIFFICULTY,
            fee_rate_lambda: Reward::zero(),
            include_uncle_rewards: false,
            tie_break: TieBreak::FirstSeen,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        if !(self.mean_block_time > 0.0 && self.mean_block_time.is_finite()) {
            return Err(ConfigError::MeanBlockTime(self.mean_block_time));
        }
        if self.n_blocks == 0 {
            return Err(ConfigError::Blocks);
        }
        if self.n_trials == 0 {
            return Err(ConfigError::Trials);
        }
        if self.genesis_difficulty == 0 {
            return Err(ConfigError::GenesisDifficulty);
        }
        if self.fee_rate_lambda < Reward::zero() {
            return Err(ConfigError::FeeRate);
        }
        Ok(())
    }

    /// True when `n_blocks` is large enough for meaningful metrics.
    pub fn metrics_valid(&self) -> bool {
        self.n_blocks >= MIN_BLOCKS_FOR_METRICS
    }
}

/// Per-trial counters and rewards.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: u64,
    pub adversary_reward: Reward,
    pub honest_reward: Reward,
    /// Coin-base of honest blocks that ended up off the main chain.
    pub recalled_reward: Reward,
    pub total_blocks_mined: u64,
    pub total_mainchain_blocks: u64,
    pub induced_forks: u64,
    pub orphaned_honest_blocks: u64,
    pub orphaned_adversary_blocks: u64,
    pub attack_infeasible_count: u64,
    pub discarded_private_blocks: u64,
    /// Withheld blocks never released before the run ended.
    pub withheld_at_end: u64,
    /// Sum over fork events of the difficulty gap in parent quanta.
    pub gap_quanta_sum: Ratio<i128>,
    /// Largest single-event gap in parent quanta.
    pub max_difficulty_gap_quanta: Ratio<i128>,
    pub final_difficulty: Difficulty,
    /// Occurrences of each transition-table row, indexed by row number.
    pub row_counts: Vec<u64>,
    /// Strategy steps no table row explains (always zero when conforming).
    pub unexplained_transitions: u64,
}

impl TrialResult {
    pub fn rr_attack(&self) -> f64 {
        let total = self.adversary_reward + self.honest_reward;
        if total.is_zero() {
            return 0.0;
        }
        (self.adversary_reward / total).to_f64().unwrap_or(0.0)
    }

    pub fn rr_honest(&self) -> f64 {
        let total = self.adversary_reward + self.honest_reward;
        if total.is_zero() {
            return 0.0;
        }
        (self.honest_reward / total).to_f64().unwrap_or(0.0)
    }

    /// Induced forks per block mined.
    pub fn fr(&self) -> f64 {
        self.induced_forks as f64 / self.total_blocks_mined.max(1) as f64
    }

    /// Difficulty gap quanta per block mined.
    pub fn mr(&self) -> f64 {
        (self.gap_quanta_sum / Ratio::from_integer(self.total_blocks_mined.max(1) as i128))
            .to_f64()
            .unwrap_or(0.0)
    }

    /// Mean gap per fork event; zero without fork events.
    pub fn mr_per_event(&self) -> f64 {
        measure_mr(self.gap_quanta_sum, self.induced_forks).to_f64().unwrap_or(0.0)
    }
}

/// Mean difficulty gap over fork events, in adjustment quanta.
pub fn measure_mr(gap_quanta_sum: Ratio<i128>, fork_events: u64) -> Ratio<i128> {
    if fork_events == 0 {
        return Ratio::zero();
    }
    gap_quanta_sum / Ratio::from_integer(fork_events as i128)
}

/// SplitMix64 finalizer over `(seed, index)`.
pub fn splitmix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Under the continuous reading, a truthful timestamp resets the clock to
/// whole seconds so every honest gap is a floored exponential draw.
fn snap(clock: &mut f64, timestamp: u64, timing: TimingDistribution) {
    if timing == TimingDistribution::ExponentialContinuous {
        *clock = timestamp as f64;
    }
}

/// Uniform draw in `(0, 1]`.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct Trial<'a> {
    cfg: &'a SimConfig,
    constants: ChainConstants,
    blocks: Vec<BlockHeader>,
    tip: usize,
    /// Unreferenced off-chain honest blocks, oldest first.
    uncle_pool: VecDeque<usize>,
    /// Provisional timestamps of withheld blocks, oldest first.
    private: VecDeque<u64>,
    result: TrialResult,
}

impl<'a> Trial<'a> {
    fn new(cfg: &'a SimConfig, trial_index: u64) -> Self {
        let table_len = crate::strategy::transition_table(cfg.strategy).len();
        Self {
            cfg,
            constants: ChainConstants::ETHEREUM,
            blocks: alloc::vec![BlockHeader::genesis(BlockId(0), cfg.genesis_difficulty)],
            tip: 0,
            uncle_pool: VecDeque::new(),
            private: VecDeque::new(),
            result: TrialResult {
                trial_index,
                adversary_reward: Reward::zero(),
                honest_reward: Reward::zero(),
                recalled_reward: Reward::zero(),
                total_blocks_mined: 0,
                total_mainchain_blocks: 0,
                induced_forks: 0,
                orphaned_honest_blocks: 0,
                orphaned_adversary_blocks: 0,
                attack_infeasible_count: 0,
                discarded_private_blocks: 0,
                withheld_at_end: 0,
                gap_quanta_sum: Ratio::zero(),
                max_difficulty_gap_quanta: Ratio::zero(),
                final_difficulty: cfg.genesis_difficulty,
                row_counts: alloc::vec![0; table_len + 1],
                unexplained_transitions: 0,
            },
        }
    }

    fn push(&mut self, parent: usize, timestamp: u64, miner: Participant, uncles: Vec<BlockId>) -> usize {
        let id = BlockId(self.blocks.len() as u64);
        let header = BlockHeader::child(&self.blocks[parent], id, timestamp, miner, uncles, &self.constants)
            .expect("strategies emit valid timestamps");
        debug_assert_eq!(validate_header(&header, &self.blocks[parent], &self.constants), Ok(()));
        self.blocks.push(header);
        self.blocks.len() - 1
    }

    /// Oldest unreferenced off-chain blocks within the uncle window of a
    /// block built on `parent`.
    fn take_uncles(&mut self, parent: usize) -> Vec<BlockId> {
        let height = self.blocks[parent].height + 1;
        let max_d = self.constants.uncle_max_distance;
        let blocks = &self.blocks;
        self.uncle_pool.retain(|&u| blocks[u].height + max_d >= height);
        let mut picked = Vec::new();
        self.uncle_pool.retain(|&u| {
            let h = blocks[u].height;
            if picked.len() < 2 && h < height {
                picked.push(blocks[u].id);
                false
            } else {
                true
            }
        });
        picked
    }

    /// Competing sibling `challenger` against the current tip.
    fn compete(&mut self, challenger: usize, fork_event: bool) {
        let incumbent = self.tip;
        let choice = fork_select_with(
            &self.blocks[challenger],
            &self.blocks[incumbent],
            self.blocks[incumbent].id,
            self.cfg.tie_break,
        )
        .expect("competitors are siblings");
        let (winner, loser) = if choice.winner == self.blocks[challenger].id {
            (challenger, incumbent)
        } else {
            (incumbent, challenger)
        };
        self.tip = winner;
        match self.blocks[loser].miner {
            Participant::Honest => self.uncle_pool.push_back(loser),
            Participant::Adversary => {}
        }
        if winner == challenger && fork_event {
            let parent = self.blocks[challenger].parent_id.expect("non-genesis").0 as usize;
            let quantum = self.constants.quantum(self.blocks[parent].difficulty).max(1);
            let gap = self.blocks[challenger].difficulty as i128 - self.blocks[incumbent].difficulty as i128;
            let gap = Ratio::new(gap, quantum as i128);
            self.result.induced_forks += 1;
            self.result.gap_quanta_sum += gap;
            if gap > self.result.max_difficulty_gap_quanta {
                self.result.max_difficulty_gap_quanta = gap;
            }
        }
    }

    fn parent_of(&self, i: usize) -> Option<usize> {
        self.blocks[i].parent_id.map(|p| p.0 as usize)
    }

    fn run(mut self, rng: &mut ChaCha8Rng) -> TrialResult {
        let cfg = self.cfg;
        let mut state = cfg.strategy.initial_state();
        let mut clock = 0.0f64;
        for _ in 0..cfg.n_blocks {
            clock += -cfg.mean_block_time * libm::log(unit(rng));
            let finder = if unit(rng) <= cfg.alpha { Finder::Adversary } else { Finder::Honest };
            self.result.total_blocks_mined += 1;
            let before = state;

            let action = match finder {
                Finder::Honest => {
                    let parent = self.tip;
                    let ts = crate::strategy::honest_timestamp(&self.blocks[parent], clock);
                    let uncles = self.take_uncles(parent);
                    self.tip = self.push(parent, ts, Participant::Honest, uncles);
                    snap(&mut clock, ts, cfg.timing);
                    let ev = MiningEvent {
                        finder,
                        arrival_time: clock,
                        tip: &self.blocks[self.tip],
                        tip_parent: Some(&self.blocks[parent]),
                        private_tip: self.private.back().copied(),
                    };
                    if cfg.strategy == StrategyKind::Honest {
                        Action::NoOp
                    } else {
                        let (next, action) = state.on_event(&ev);
                        state = next;
                        action
                    }
                }
                Finder::Adversary if cfg.strategy == StrategyKind::Honest => {
                    let parent = self.tip;
                    let ts = crate::strategy::honest_timestamp(&self.blocks[parent], clock);
                    self.tip = self.push(parent, ts, Participant::Adversary, Vec::new());
                    snap(&mut clock, ts, cfg.timing);
                    Action::NoOp
                }
                Finder::Adversary => {
                    let tip_parent = self.parent_of(self.tip);
                    let ev = MiningEvent {
                        finder,
                        arrival_time: clock,
                        tip: &self.blocks[self.tip],
                        tip_parent: tip_parent.map(|p| &self.blocks[p]),
                        private_tip: self.private.back().copied(),
                    };
                    let (next, action) = state.on_event(&ev);
                    state = next;
                    action
                }
            };

            let infeasible = matches!(action, Action::AttackInfeasible { .. });
            if let Action::Publish { parent, timestamp } = action {
                if parent == self.blocks[self.tip].id && finder == Finder::Adversary {
                    snap(&mut clock, timestamp, cfg.timing);
                }
            }
            self.apply(action, &state);
            self.record_transition(before, finder, state, infeasible);
            debug_assert_eq!(state.private_lead() as usize, self.private.len());
        }
        self.finish()
    }

    fn apply(&mut self, action: Action, state: &StrategyState) {
        match action {
            Action::NoOp => {}
            Action::Publish { parent, timestamp } => {
                let parent = parent.0 as usize;
                let uncles = Vec::new();
                let block = self.push(parent, timestamp, Participant::Adversary, uncles);
                if parent == self.tip {
                    self.tip = block;
                } else {
                    self.compete(block, true);
                }
            }
            Action::Withhold { timestamp } => self.private.push_back(timestamp),
            Action::Release { count, timestamps } => {
                for timestamp in timestamps.into_iter().take(count as usize) {
                    self.private.pop_front().expect("release from a non-empty private chain");
                    let parent = self.parent_of(self.tip).expect("released blocks compete with a child");
                    let block = self.push(parent, timestamp, Participant::Adversary, Vec::new());
                    // A cascade completes when the last withheld block is out.
                    let completes = self.private.is_empty() && state.private_lead() == 0;
                    self.compete(block, completes);
                }
            }
            Action::AttackInfeasible { discarded } => {
                self.result.attack_infeasible_count += 1;
                self.result.discarded_private_blocks += u64::from(discarded);
                self.private.clear();
            }
        }
    }

    fn record_transition(&mut self, before: StrategyState, finder: Finder, after: StrategyState, infeasible: bool) {
        if infeasible {
            return;
        }
        let dt = match finder {
            Finder::Honest => {
                // The honest block may already have been displaced by a
                // release; its gap is what the guard saw.
                let honest = self
                    .blocks
                    .iter()
                    .rev()
                    .find(|b| b.miner == Participant::Honest)
                    .expect("an honest block was just mined");
                let parent = honest.parent_id.expect("non-genesis").0 as usize;
                honest.timestamp - self.blocks[parent].timestamp
            }
            Finder::Adversary => 0,
        };
        match explain_transition(before.kind(), before.control(), finder, dt, after.control()) {
            Some(row) => self.result.row_counts[row.row as usize] += 1,
            None => self.result.unexplained_transitions += 1,
        }
    }

    fn finish(mut self) -> TrialResult {
        let coinbase = Reward::from_integer(self.constants.coinbase);
        let mut on_chain = alloc::vec![false; self.blocks.len()];
        let mut cursor = Some(self.tip);
        while let Some(i) = cursor {
            on_chain[i] = true;
            cursor = self.parent_of(i);
        }
        let cfg = self.cfg;
        let mut uncle_income: Vec<(usize, Reward)> = Vec::new();
        for (i, b) in self.blocks.iter().enumerate().skip(1) {
            if !on_chain[i] {
                match b.miner {
                    Participant::Honest => {
                        self.result.orphaned_honest_blocks += 1;
                        self.result.recalled_reward += coinbase;
                    }
                    Participant::Adversary => self.result.orphaned_adversary_blocks += 1,
                }
                continue;
            }
            self.result.total_mainchain_blocks += 1;
            let reward = if cfg.include_uncle_rewards || !cfg.fee_rate_lambda.is_zero() {
                let parent = &self.blocks[b.parent_id.expect("non-genesis").0 as usize];
                let m = if cfg.include_uncle_rewards { b.uncle_ids.len() } else { 0 };
                self.constants
                    .mainchain_reward(m, b.timestamp - parent.timestamp, cfg.fee_rate_lambda)
                    .expect("at most two uncles")
            } else {
                coinbase
            };
            if cfg.include_uncle_rewards {
                for u in &b.uncle_ids {
                    let uncle = u.0 as usize;
                    let d = b.height - self.blocks[uncle].height;
                    let r = self.constants.uncle_reward(d).expect("uncle distance is positive");
                    uncle_income.push((uncle, r));
                }
            }
            match b.miner {
                Participant::Honest => self.result.honest_reward += reward,
                Participant::Adversary => self.result.adversary_reward += reward,
            }
        }
        for (uncle, r) in uncle_income {
            match self.blocks[uncle].miner {
                Participant::Honest => self.result.honest_reward += r,
                Participant::Adversary => self.result.adversary_reward += r,
            }
        }
        self.result.final_difficulty = self.blocks[self.tip].difficulty;
        self.result.withheld_at_end = self.private.len() as u64;
        self.result
    }
}

/// Runs one trial; deterministic in `(cfg.seed, trial_index)`.
pub fn run_trial(cfg: &SimConfig, trial_index: u64) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed, trial_index));
    Trial::new(cfg, trial_index).run(&mut rng)
}

/// Mean and standard error of one metric across trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Absent for a single trial.
    pub stderr: Option<f64>,
}

impl MetricSummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: 0.0, stderr: None };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = (n > 1).then(|| {
            let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            libm::sqrt(var / n as f64)
        });
        Self { mean, stderr }
    }

    pub fn se(&self) -> f64 {
        self.stderr.unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config: SimConfig,
    pub n_trials: u32,
    pub rr_attack: MetricSummary,
    pub rr_honest: MetricSummary,
    pub fr: MetricSummary,
    pub mr: MetricSummary,
    pub mr_per_event: MetricSummary,
    pub mr_max: f64,
    pub orphan_rate: MetricSummary,
    pub attack_infeasible_rate: MetricSummary,
    /// `RR_attack - alpha`, the gain over the fair share.
    pub rr_attack_delta: f64,
    /// `(1 - alpha) - RR_honest`, the honest loss against fair mining.
    pub honest_damage: f64,
    pub induced_forks_total: u64,
    pub attack_infeasible_total: u64,
    pub unexplained_transitions_total: u64,
}

/// Merges trial results; independent of input order.
pub fn aggregate(cfg: &SimConfig, trials: &[TrialResult]) -> AggregateReport {
    let mut sorted: Vec<&TrialResult> = trials.iter().collect();
    sorted.sort_by_key(|t| t.trial_index);
    let col = |f: &dyn Fn(&TrialResult) -> f64| -> Vec<f64> { sorted.iter().map(|t| f(t)).collect() };
    let rr_attack = MetricSummary::from_samples(&col(&|t| t.rr_attack()));
    let rr_honest = MetricSummary::from_samples(&col(&|t| t.rr_honest()));
    let mr_max = sorted
        .iter()
        .map(|t| t.max_difficulty_gap_quanta.to_f64().unwrap_or(0.0))
        .fold(0.0, f64::max);
    AggregateReport {
        config: cfg.clone(),
        n_trials: sorted.len() as u32,
        rr_attack,
        rr_honest,
        fr: MetricSummary::from_samples(&col(&|t| t.fr())),
        mr: MetricSummary::from_samples(&col(&|t| t.mr())),
        mr_per_event: MetricSummary::from_samples(&col(&|t| t.mr_per_event())),
        mr_max,
        orphan_rate: MetricSummary::from_samples(&col(&|t| {
            t.orphaned_honest_blocks as f64 / t.total_blocks_mined.max(1) as f64
        })),
        attack_infeasible_rate: MetricSummary::from_samples(&col(&|t| {
            t.attack_infeasible_count as f64 / t.total_blocks_mined.max(1) as f64
        })),
        rr_attack_delta: rr_attack.mean - cfg.alpha,
        honest_damage: (1.0 - cfg.alpha) - rr_honest.mean,
        induced_forks_total: sorted.iter().map(|t| t.induced_forks).sum(),
        attack_infeasible_total: sorted.iter().map(|t| t.attack_infeasible_count).sum(),
        unexplained_transitions_total: sorted.iter().map(|t| t.unexplained_transitions).sum(),
    }
}

/// Sequential experiment; the std crate provides a parallel equivalent.
pub fn run_experiment(cfg: &SimConfig) -> AggregateReport {
    let trials: Vec<TrialResult> = (0..u64::from(cfg.n_trials)).map(|i| run_trial(cfg, i)).collect();
    aggregate(cfg, &trials)
}

/// `|RR_attack - alpha|` of an honest-strategy report.
pub fn fairness_check(report: &AggregateReport, alpha: f64) -> f64 {
    libm::fabs(report.rr_attack.mean - alpha)
}
