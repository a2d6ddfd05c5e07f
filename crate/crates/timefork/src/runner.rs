//! Parallel trial execution. Results are gathered in trial order, so the
//! report is identical to the sequential engine's for any thread count.

use rayon::prelude::*;
use timefork_core::sim::{aggregate, run_trial, AggregateReport, SimConfig, TrialResult};

pub const THREADS_ENV: &str = "TIMEFORK_THREADS";

/// Thread cap from `TIMEFORK_THREADS`; unset or invalid means no cap.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub fn run_trials(cfg: &SimConfig, threads: Option<usize>) -> Vec<TrialResult> {
    let work = || -> Vec<TrialResult> {
        (0..u64::from(cfg.n_trials)).into_par_iter().map(|i| run_trial(cfg, i)).collect()
    };
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}

pub fn run_experiment(cfg: &SimConfig) -> AggregateReport {
    run_experiment_with(cfg, thread_cap())
}

pub fn run_experiment_with(cfg: &SimConfig, threads: Option<usize>) -> AggregateReport {
    aggregate(cfg, &run_trials(cfg, threads))
}

/// Runs several configurations, each with trial-level parallelism.
pub fn run_many(cfgs: &[SimConfig]) -> Vec<AggregateReport> {
    let threads = thread_cap();
    let work = || -> Vec<AggregateReport> { cfgs.par_iter().map(|c| aggregate(c, &run_trials(c, None))).collect() };
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(work),
        None => work(),
    }
}
