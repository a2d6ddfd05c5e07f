//! Timestamp-difference histograms and the mod-9 avoidance score.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

pub const DEFAULT_WINDOW_MAX: u64 = 45;
pub const DEFAULT_MIN_SAMPLE: u64 = 200;
pub const FLAG_THRESHOLD: Ratio<u64> = Ratio::new_raw(9, 10);
/// Expected mass at the multiples needed for the zero-observation shortcut.
pub const PERFECT_AVOIDANCE_MIN_EXPECTED: u64 = 20;
/// Name used for the verdict over all blocks.
pub const WHOLE_CHAIN: &str = "*";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderRecord {
    #[serde(rename = "chain")]
    pub chain_id: String,
    pub height: u64,
    pub timestamp: u64,
    pub miner: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<u128>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForensicsError {
    #[error("duplicate height {height} in chain {chain}")]
    DuplicateHeight { chain: String, height: u64 },
}

/// Sorts by `(chain, height)` and rejects duplicate heights.
pub fn sort_records(records: &mut [HeaderRecord]) -> Result<(), ForensicsError> {
    records.sort_by(|a, b| (&a.chain_id, a.height).cmp(&(&b.chain_id, b.height)));
    match records
        .windows(2)
        .find(|w| w[0].chain_id == w[1].chain_id && w[0].height == w[1].height)
    {
        Some(w) => Err(ForensicsError::DuplicateHeight {
            chain: w[1].chain_id.clone(),
            height: w[1].height,
        }),
        None => Ok(()),
    }
}

pub type DtHistogram = BTreeMap<u64, u64>;

/// Consecutive-height pairs `(parent, child)` within each chain.
fn pairs(records: &[HeaderRecord]) -> impl Iterator<Item = (&HeaderRecord, &HeaderRecord)> {
    records.windows(2).filter_map(|w| {
        let (p, c) = (&w[0], &w[1]);
        (p.chain_id == c.chain_id && c.height == p.height + 1 && c.timestamp >= p.timestamp).then_some((p, c))
    })
}

/// Histogram of child-minus-parent timestamp differences. With a miner
/// filter only children mined by that miner contribute.
pub fn diff_histogram(records: &[HeaderRecord], filter_miner: Option<&str>) -> DtHistogram {
    let mut h = DtHistogram::new();
    for (p, c) in pairs(records) {
        if filter_miner.is_none_or(|m| c.miner == m) {
            *h.entry(c.timestamp - p.timestamp).or_insert(0) += 1;
        }
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStats {
    pub miner: String,
    pub block_count: u64,
    pub dt_histogram: DtHistogram,
    pub multiples_of_9_count: u64,
    pub multiples_minus_1_count: u64,
}

impl PoolStats {
    pub fn from_histogram(miner: &str, block_count: u64, dt_histogram: DtHistogram) -> Self {
        let at = |pred: fn(u64) -> bool| dt_histogram.iter().filter(|(d, _)| pred(**d)).map(|(_, c)| c).sum();
        Self {
            miner: miner.to_string(),
            block_count,
            multiples_of_9_count: at(|d| d > 0 && d % 9 == 0),
            multiples_minus_1_count: at(|d| d % 9 == 8),
            dt_histogram,
        }
    }

    pub fn count(&self, dt: u64) -> u64 {
        self.dt_histogram.get(&dt).copied().unwrap_or(0)
    }
}

/// Stats for one miner, or for every block when `miner` is `None`.
pub fn pool_stats(records: &[HeaderRecord], miner: Option<&str>) -> PoolStats {
    let block_count = records.iter().filter(|r| miner.is_none_or(|m| r.miner == m)).count() as u64;
    PoolStats::from_histogram(miner.unwrap_or(WHOLE_CHAIN), block_count, diff_histogram(records, miner))
}

/// Top-`k` miners by block count; ties go to the lexicographically smaller
/// name.
pub fn pool_rank(records: &[HeaderRecord], k: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records {
        *counts.entry(&r.miner).or_insert(0) += 1;
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(m, _)| m.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManipulationVerdict {
    pub miner: String,
    pub avoidance_score: Ratio<u64>,
    pub expected_at_multiples: Ratio<u64>,
    pub observed_at_multiples: u64,
    pub flagged: bool,
    pub sample_sufficient: bool,
}

impl ManipulationVerdict {
    pub fn score_f64(&self) -> f64 {
        self.avoidance_score.to_f64().unwrap_or(0.0)
    }
}

/// Expected count at multiple `m` from its clean neighbours `m - 2` and
/// `m + 1`.
pub fn expected_at(stats: &PoolStats, m: u64) -> Ratio<u64> {
    Ratio::new(stats.count(m - 2) + stats.count(m + 1), 2)
}

pub fn avoidance_score(stats: &PoolStats, window_max: u64, min_sample: u64) -> ManipulationVerdict {
    let mut expected = Ratio::zero();
    let mut deficit = Ratio::zero();
    let mut observed = 0;
    for m in (9..=window_max).step_by(9) {
        let e = expected_at(stats, m);
        let o = stats.count(m);
        let o_r = Ratio::from_integer(o);
        if e > o_r {
            deficit += e - o_r;
        }
        expected += e;
        observed += o;
    }
    let in_window: u64 = stats.dt_histogram.range(1..=window_max + 1).map(|(_, c)| c).sum();
    let sample_sufficient = in_window >= min_sample;
    let score = if expected.is_zero() { Ratio::zero() } else { deficit / expected };
    let perfect = observed == 0 && expected >= Ratio::from_integer(PERFECT_AVOIDANCE_MIN_EXPECTED);
    ManipulationVerdict {
        miner: stats.miner.clone(),
        avoidance_score: score,
        expected_at_multiples: expected,
        observed_at_multiples: observed,
        flagged: sample_sufficient && (score >= FLAG_THRESHOLD || perfect),
        sample_sufficient,
    }
}

/// Verdicts for the top-`k` pools followed by the whole-chain verdict.
pub fn detect(records: &[HeaderRecord], k: usize) -> Vec<ManipulationVerdict> {
    if records.is_empty() {
        return Vec::new();
    }
    let mut out: Vec<ManipulationVerdict> = pool_rank(records, k)
        .iter()
        .map(|m| avoidance_score(&pool_stats(records, Some(m)), DEFAULT_WINDOW_MAX, DEFAULT_MIN_SAMPLE))
        .collect();
    out.push(avoidance_score(&pool_stats(records, None), DEFAULT_WINDOW_MAX, DEFAULT_MIN_SAMPLE));
    out
}

/// Synthetic corpus with known manipulators.
#[derive(Clone, Debug)]
pub struct PlantedFixture {
    pub records: Vec<HeaderRecord>,
    pub manipulators: BTreeSet<String>,
    /// Whole-chain histogram before remapping.
    pub clean_histogram: DtHistogram,
    /// Remapped blocks per original multiple of nine.
    pub remapped: DtHistogram,
}

#[derive(Clone, Copy, Debug)]
pub struct FixtureSpec {
    pub seed: u64,
    pub pools: usize,
    pub manipulators: usize,
    pub blocks_per_pool: usize,
    /// Probability that a manipulator moves a multiple of nine down by one.
    pub remap_fraction: f64,
    pub mean_block_time: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            pools: 10,
            manipulators: 2,
            blocks_per_pool: 10_000,
            remap_fraction: 1.0,
            mean_block_time: 13.0,
        }
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One chain whose block gaps are floored exponential draws; the first
/// `manipulators` pools shift gaps at multiples of nine down by one second.
pub fn planted_fixture(spec: &FixtureSpec) -> PlantedFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names: Vec<String> = (0..spec.pools).map(|i| alloc::format!("pool{i:02}")).collect();
    let manipulators: BTreeSet<String> = names.iter().take(spec.manipulators).cloned().collect();

    let mut miners: Vec<usize> = (0..spec.pools * spec.blocks_per_pool).map(|i| i % spec.pools.max(1)).collect();
    for i in (1..miners.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        miners.swap(i, j);
    }

    let mut records = Vec::with_capacity(miners.len() + 1);
    records.push(HeaderRecord {
        chain_id: "fixture".to_string(),
        height: 0,
        timestamp: 0,
        miner: "genesis".to_string(),
        difficulty: None,
    });
    let mut clean_histogram = DtHistogram::new();
    let mut remapped = DtHistogram::new();
    let mut t = 0u64;
    for (i, &p) in miners.iter().enumerate() {
        let gap = (-spec.mean_block_time * libm::log(unit(&mut rng))) as u64;
        let mut dt = gap.max(1);
        *clean_histogram.entry(dt).or_insert(0) += 1;
        let shift = unit(&mut rng) <= spec.remap_fraction;
        if p < spec.manipulators && dt % 9 == 0 && shift {
            *remapped.entry(dt).or_insert(0) += 1;
            dt -= 1;
        }
        t += dt;
        records.push(HeaderRecord {
            chain_id: "fixture".to_string(),
            height: i as u64 + 1,
            timestamp: t,
            miner: names[p].clone(),
            difficulty: None,
        });
    }
    PlantedFixture {
        records,
        manipulators,
        clean_histogram,
        remapped,
    }
}
