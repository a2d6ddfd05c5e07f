//! `key = value` experiment configuration. Keys are the `SimConfig` field
//! names; `#` starts a comment.

use std::path::Path;

use num_rational::Ratio;
use timefork_core::chain::{Reward, TieBreak};
use timefork_core::markov::TimingDistribution;
use timefork_core::sim::SimConfig;
use timefork_core::strategy::StrategyKind;

pub const KEYS: [&str; 11] = [
    "alpha",
    "strategy",
    "mean_block_time",
    "n_blocks",
    "n_trials",
    "seed",
    "timing",
    "genesis_difficulty",
    "fee_rate_lambda",
    "include_uncle_rewards",
    "tie_break",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Sets one field from its textual value.
pub fn apply(cfg: &mut SimConfig, key: &str, value: &str) -> Result<(), String> {
    let v = value.trim();
    let bad = |what: &str| format!("invalid {what} for `{key}`: `{v}`");
    match key {
        "alpha" => cfg.alpha = v.parse().map_err(|_| bad("number"))?,
        "strategy" => cfg.strategy = StrategyKind::parse(v).ok_or_else(|| bad("strategy"))?,
        "mean_block_time" => cfg.mean_block_time = v.parse().map_err(|_| bad("number"))?,
        "n_blocks" => cfg.n_blocks = v.parse().map_err(|_| bad("integer"))?,
        "n_trials" => cfg.n_trials = v.parse().map_err(|_| bad("integer"))?,
        "seed" => cfg.seed = v.parse().map_err(|_| bad("integer"))?,
        "timing" => cfg.timing = TimingDistribution::parse(v).ok_or_else(|| bad("timing model"))?,
        "genesis_difficulty" => cfg.genesis_difficulty = v.parse().map_err(|_| bad("integer"))?,
        "fee_rate_lambda" => cfg.fee_rate_lambda = parse_reward(v).ok_or_else(|| bad("rational"))?,
        "include_uncle_rewards" => cfg.include_uncle_rewards = v.parse().map_err(|_| bad("boolean"))?,
        "tie_break" => cfg.tie_break = parse_tie_break(v).ok_or_else(|| bad("tie-break rule"))?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

pub fn parse_tie_break(s: &str) -> Option<TieBreak> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "first_seen" => Some(TieBreak::FirstSeen),
        "adversary_favoring" => Some(TieBreak::AdversaryFavoring),
        _ => None,
    }
}

pub fn tie_break_name(t: TieBreak) -> &'static str {
    match t {
        TieBreak::FirstSeen => "first_seen",
        TieBreak::AdversaryFavoring => "adversary_favoring",
    }
}

/// Accepts `p/q`, integers and plain decimals such as `0.015`.
pub fn parse_reward(s: &str) -> Option<Reward> {
    if let Some((n, d)) = s.split_once('/') {
        let (n, d): (i128, i128) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
        return (d != 0).then(|| Ratio::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !(int.chars().chain(frac.chars())).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: i128 = format!("{int}{frac}").trim_start_matches('0').parse().unwrap_or(0);
    let den = 10i128.checked_pow(frac.len() as u32)?;
    let r = Ratio::new(digits, den);
    Some(if neg { -r } else { r })
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigFileError> {
    let mut cfg = SimConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| ConfigFileError::Syntax { line: i + 1, message };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected `key = value`, got `{line}`")))?;
        apply(&mut cfg, k.trim(), v).map_err(syntax)?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Renders a config in the file format; `parse_config` inverts it.
pub fn render_config(cfg: &SimConfig) -> String {
    let lambda = &cfg.fee_rate_lambda;
    format!(
        "alpha = {}\nstrategy = {}\nmean_block_time = {}\nn_blocks = {}\nn_trials = {}\nseed = {}\ntiming = {}\n\
         genesis_difficulty = {}\nfee_rate_lambda = {}/{}\ninclude_uncle_rewards = {}\ntie_break = {}\n",
        cfg.alpha,
        cfg.strategy.name(),
        cfg.mean_block_time,
        cfg.n_blocks,
        cfg.n_trials,
        cfg.seed,
        cfg.timing.name(),
        cfg.genesis_difficulty,
        lambda.numer(),
        lambda.denom(),
        cfg.include_uncle_rewards,
        tie_break_name(cfg.tie_break),
    )
}

/// Parses `start:stop:step` (inclusive) or a single value.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| format!("invalid grid value `{p}`"));
    match parts.as_slice() {
        [one] => Ok(vec![num(one)?]),
        [a, b, c] => {
            let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
            if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
                return Err(format!("invalid grid `{s}`"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
        }
        _ => Err(format!("grid must be `start:stop:step`, got `{s}`")),
    }
}
