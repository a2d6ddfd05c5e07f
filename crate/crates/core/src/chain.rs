//! Block headers, the per-block difficulty rule, reward arithmetic and
//! difficulty-based fork choice.
//!
//! All difficulty arithmetic is exact integer arithmetic on `u128`, which
//! leaves ample headroom for parent difficulties up to `2^64`. Rewards are
//! exact rationals in coin-base units (`R_c = 2`).

use alloc::vec::Vec;

use num_bigint::BigUint;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Block difficulty.
pub type Difficulty = u128;

/// Header timestamp in whole seconds since genesis.
pub type Timestamp = u64;

/// Exact reward amount in coin-base units.
pub type Reward = Ratio<i128>;

/// Unique block identifier inside one simulated or loaded chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub u64);

/// Who produced a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Participant {
    Honest,
    Adversary,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("timestamp difference must be at least one second")]
    InvalidTimestamp,
    #[error("parent difficulty must be positive")]
    InvalidDifficulty,
    #[error("a block references at most two uncles, got {0}")]
    InvalidUncleCount(usize),
    #[error("uncle distance must be at least one generation")]
    InvalidDistance,
    #[error("fork candidates must share height and parent")]
    IncomparableCandidates,
}

/// Protocol constants of the timestamp-driven difficulty rule and the reward
/// schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConstants {
    pub min_difficulty: Difficulty,
    pub adjustment_divisor: Difficulty,
    /// Width in seconds of one adjustment bucket.
    pub bucket: u64,
    pub f_floor: i64,
    /// `max_target = 2^max_target_log2`.
    pub max_target_log2: u32,
    /// Coin-base reward in reward units.
    pub coinbase: i128,
    pub uncle_max_distance: u64,
    /// Smallest timestamp difference at which the adjustment factor clamps.
    pub dt_max_for_nonfloor: u64,
}

impl ChainConstants {
    pub const ETHEREUM: Self = Self {
        min_difficulty: 1 << 17,
        adjustment_divisor: 2048,
        bucket: 9,
        f_floor: -99,
        max_target_log2: 256,
        coinbase: 2,
        uncle_max_distance: 6,
        dt_max_for_nonfloor: 900,
    };

    /// The same rule without the `2^17` floor, as used for chain heights
    /// where difficulty is far above the floor.
    pub const UNFLOORED: Self = Self {
        min_difficulty: 1,
        ..Self::ETHEREUM
    };

    pub fn max_target(&self) -> BigUint {
        BigUint::from(1u8) << self.max_target_log2
    }

    /// Nephew bonus per referenced uncle: `coinbase / 32`.
    pub fn nephew_unit(&self) -> Reward {
        Ratio::new(self.coinbase, 32)
    }

    /// Difficulty adjustment quantum `floor(D / 2048)`.
    pub fn quantum(&self, difficulty: Difficulty) -> Difficulty {
        difficulty / self.adjustment_divisor
    }

    /// Adjustment factor `f = max(1 + pu - floor(dt / 9), -99)`.
    pub fn adjustment_factor(&self, parent_refs_uncles: bool, dt: u64) -> i64 {
        let buckets = i64::try_from(dt / self.bucket).unwrap_or(i64::MAX);
        (1 + i64::from(parent_refs_uncles))
            .saturating_sub(buckets)
            .max(self.f_floor)
    }

    /// Child difficulty from the parent difficulty, the parent's uncle flag
    /// and the child-parent timestamp difference.
    pub fn compute_difficulty(
        &self,
        parent_difficulty: Difficulty,
        parent_refs_uncles: bool,
        dt: u64,
    ) -> Result<Difficulty, ChainError> {
        if dt == 0 {
            return Err(ChainError::InvalidTimestamp);
        }
        if parent_difficulty == 0 {
            return Err(ChainError::InvalidDifficulty);
        }
        let f = self.adjustment_factor(parent_refs_uncles, dt);
        let step = self.quantum(parent_difficulty) * Difficulty::from(f.unsigned_abs());
        let adjusted = if f >= 0 {
            parent_difficulty + step
        } else {
            parent_difficulty.saturating_sub(step)
        };
        Ok(adjusted.max(self.min_difficulty))
    }

    /// Coin-base + nephew + fee reward of a mainchain block.
    pub fn mainchain_reward(
        &self,
        m_uncles: usize,
        dt: u64,
        fee_rate_lambda: Reward,
    ) -> Result<Reward, ChainError> {
        if m_uncles > 2 {
            return Err(ChainError::InvalidUncleCount(m_uncles));
        }
        let nephew = self.nephew_unit() * Ratio::from_integer(m_uncles as i128);
        Ok(Ratio::from_integer(self.coinbase) + nephew + fee_rate_lambda * Ratio::from_integer(i128::from(dt)))
    }

    /// Reward of an uncle referenced `d` generations later.
    pub fn uncle_reward(&self, d: u64) -> Result<Reward, ChainError> {
        match d {
            0 => Err(ChainError::InvalidDistance),
            d if d <= self.uncle_max_distance => {
                Ok(Ratio::new((8 - d as i128) * self.coinbase, 8))
            }
            _ => Ok(Ratio::from_integer(0)),
        }
    }
}

impl Default for ChainConstants {
    fn default() -> Self {
        Self::ETHEREUM
    }
}

/// Child difficulty under [`ChainConstants::ETHEREUM`].
pub fn compute_difficulty(
    parent_difficulty: Difficulty,
    parent_refs_uncles: bool,
    dt: u64,
) -> Result<Difficulty, ChainError> {
    ChainConstants::ETHEREUM.compute_difficulty(parent_difficulty, parent_refs_uncles, dt)
}

pub fn mainchain_reward(m_uncles: usize, dt: u64, fee_rate_lambda: Reward) -> Result<Reward, ChainError> {
    ChainConstants::ETHEREUM.mainchain_reward(m_uncles, dt, fee_rate_lambda)
}

pub fn uncle_reward(d: u64) -> Result<Reward, ChainError> {
    ChainConstants::ETHEREUM.uncle_reward(d)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub id: BlockId,
    pub parent_id: Option<BlockId>,
    pub height: u64,
    pub timestamp: Timestamp,
    pub difficulty: Difficulty,
    pub miner: Participant,
    pub uncle_ids: Vec<BlockId>,
}

impl BlockHeader {
    pub fn genesis(id: BlockId, difficulty: Difficulty) -> Self {
        Self {
            id,
            parent_id: None,
            height: 0,
            timestamp: 0,
            difficulty,
            miner: Participant::Honest,
            uncle_ids: Vec::new(),
        }
    }

    /// Builds a child of `parent` whose difficulty follows the adjustment
    /// rule.
    pub fn child(
        parent: &BlockHeader,
        id: BlockId,
        timestamp: Timestamp,
        miner: Participant,
        uncle_ids: Vec<BlockId>,
        constants: &ChainConstants,
    ) -> Result<Self, ChainError> {
        if uncle_ids.len() > 2 {
            return Err(ChainError::InvalidUncleCount(uncle_ids.len()));
        }
        let dt = timestamp.checked_sub(parent.timestamp).ok_or(ChainError::InvalidTimestamp)?;
        let difficulty = constants.compute_difficulty(parent.difficulty, parent.refs_uncles(), dt)?;
        Ok(Self {
            id,
            parent_id: Some(parent.id),
            height: parent.height + 1,
            timestamp,
            difficulty,
            miner,
            uncle_ids,
        })
    }

    /// The `pu` flag its children see.
    pub fn refs_uncles(&self) -> bool {
        !self.uncle_ids.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum HeaderViolation {
    #[error("header does not name the given parent")]
    ParentMismatch,
    #[error("timestamp {child} is not after parent timestamp {parent}")]
    TimestampOrder { parent: Timestamp, child: Timestamp },
    #[error("height {found} should be {expected}")]
    Height { expected: u64, found: u64 },
    #[error("difficulty {found} should be {expected}")]
    DifficultyMismatch { expected: Difficulty, found: Difficulty },
    #[error("{0} uncle references exceed the limit of two")]
    TooManyUncles(usize),
}

/// Checks a header against its parent: ordering, height, uncle count and the
/// recomputed difficulty.
pub fn validate_header(
    header: &BlockHeader,
    parent: &BlockHeader,
    constants: &ChainConstants,
) -> Result<(), HeaderViolation> {
    if header.parent_id != Some(parent.id) {
        return Err(HeaderViolation::ParentMismatch);
    }
    if header.timestamp <= parent.timestamp {
        return Err(HeaderViolation::TimestampOrder {
            parent: parent.timestamp,
            child: header.timestamp,
        });
    }
    if header.height != parent.height + 1 {
        return Err(HeaderViolation::Height {
            expected: parent.height + 1,
            found: header.height,
        });
    }
    if header.uncle_ids.len() > 2 {
        return Err(HeaderViolation::TooManyUncles(header.uncle_ids.len()));
    }
    let expected = constants
        .compute_difficulty(parent.difficulty, parent.refs_uncles(), header.timestamp - parent.timestamp)
        .map_err(|_| HeaderViolation::TimestampOrder {
            parent: parent.timestamp,
            child: header.timestamp,
        })?;
    if expected != header.difficulty {
        return Err(HeaderViolation::DifficultyMismatch {
            expected,
            found: header.difficulty,
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForkReason {
    HigherDifficulty,
    TieBrokenFirstSeen,
    TieBrokenAdversary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForkChoice {
    pub winner: BlockId,
    pub reason: ForkReason,
}

/// How equal-difficulty siblings are resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    FirstSeen,
    /// Sensitivity setting: the adversary's block wins ties.
    AdversaryFavoring,
}

/// Picks between two same-parent candidates at the same height: strictly
/// higher difficulty wins, ties go to `first_seen`.
pub fn fork_select(a: &BlockHeader, b: &BlockHeader, first_seen: BlockId) -> Result<ForkChoice, ChainError> {
    fork_select_with(a, b, first_seen, TieBreak::FirstSeen)
}

pub fn fork_select_with(
    a: &BlockHeader,
    b: &BlockHeader,
    first_seen: BlockId,
    tie_break: TieBreak,
) -> Result<ForkChoice, ChainError> {
    if a.height != b.height || a.parent_id != b.parent_id {
        return Err(ChainError::IncomparableCandidates);
    }
    let choice = match a.difficulty.cmp(&b.difficulty) {
        core::cmp::Ordering::Greater => ForkChoice {
            winner: a.id,
            reason: ForkReason::HigherDifficulty,
        },
        core::cmp::Ordering::Less => ForkChoice {
            winner: b.id,
            reason: ForkReason::HigherDifficulty,
        },
        core::cmp::Ordering::Equal => {
            let adversarial = [a, b].into_iter().filter(|h| h.miner == Participant::Adversary);
            match (tie_break, adversarial.clone().count()) {
                (TieBreak::AdversaryFavoring, 1) => ForkChoice {
                    winner: adversarial.map(|h| h.id).next().unwrap_or(first_seen),
                    reason: ForkReason::TieBrokenAdversary,
                },
                _ => ForkChoice {
                    winner: first_seen,
                    reason: ForkReason::TieBrokenFirstSeen,
                },
            }
        }
    };
    Ok(choice)
}

/// Per-height dominance: a released branch replaces the incumbent only if
/// every released block has strictly higher difficulty than the incumbent
/// block at the same height. Branches must be aligned by height.
pub fn branch_dominates(released: &[BlockHeader], incumbent: &[BlockHeader]) -> bool {
    !incumbent.is_empty()
        && released.len() >= incumbent.len()
        && released
            .iter()
            .zip(incumbent)
            .all(|(r, h)| r.height == h.height && r.difficulty > h.difficulty)
}
