//! JSON and CSV renderings of experiment, sweep and forensic results.
//! Every JSON document carries a `schema` tag naming a file under
//! `schemas/`.

use std::fmt::Write as _;

use serde::Serialize;
use timefork_core::forensics::{pool_stats, HeaderRecord, ManipulationVerdict, PoolStats};
use timefork_core::markov::AnalyticPoint;
use timefork_core::sim::{AggregateReport, MetricSummary};

pub const REPORT_SCHEMA: &str = "timefork.aggregate-report.v1";
pub const VERDICTS_SCHEMA: &str = "timefork.verdicts.v1";

pub const SIM_CSV_HEADER: &str = "strategy,alpha,rr_attack,rr_attack_se,rr_honest,fr,fr_se,mr,mr_se";
pub const MARKOV_CSV_HEADER: &str = "strategy,alpha,pi_deploy,pi_downgrade,pi_attack_total,E_A,E_H,FR,AC";
pub const COMPARE_CSV_HEADER: &str = "strategy,alpha,rr_attack,rr_attack_se,rr_honest,fr,fr_se,mr,mr_se,mr_max,\
orphan_rate,attack_infeasible_rate,E_A,E_H,FR_analytic,fork_event_rate_analytic,pi_attack_total";
pub const HISTOGRAM_CSV_HEADER: &str = "miner,dt,count";

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    schema: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

fn to_json<T: Serialize>(schema: &'static str, body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Tagged { schema, body }).expect("serializable");
    s.push('\n');
    s
}

pub fn report_json(report: &AggregateReport) -> String {
    to_json(REPORT_SCHEMA, report)
}

fn se(m: &MetricSummary) -> String {
    m.stderr.map(|v| v.to_string()).unwrap_or_default()
}

fn sim_fields(r: &AggregateReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.config.strategy.name(),
        r.config.alpha,
        r.rr_attack.mean,
        se(&r.rr_attack),
        r.rr_honest.mean,
        r.fr.mean,
        se(&r.fr),
        r.mr.mean,
        se(&r.mr),
    )
}

pub fn sim_csv(reports: &[AggregateReport]) -> String {
    let mut s = format!("{SIM_CSV_HEADER}\n");
    for r in reports {
        s.push_str(&sim_fields(r));
        s.push('\n');
    }
    s
}

pub fn markov_csv(points: &[AnalyticPoint]) -> String {
    let mut s = format!("{MARKOV_CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:e}",
            p.strategy.name(),
            p.alpha,
            p.pi_deploy,
            p.pi_downgrade,
            p.pi_attack_total,
            p.e_a,
            p.e_h,
            p.fr,
            p.ac
        );
    }
    s
}

/// One row per simulated point, joined with the analytic point of the same
/// `(strategy, alpha)` when it exists.
pub fn compare_csv(rows: &[(AggregateReport, Option<AnalyticPoint>)]) -> String {
    let mut s = format!("{COMPARE_CSV_HEADER}\n");
    for (r, a) in rows {
        let analytic = match a {
            Some(p) => format!("{},{},{},{},{}", p.e_a, p.e_h, p.fr, p.fork_event_rate, p.pi_attack_total),
            None => ",,,,".to_string(),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            sim_fields(r),
            r.mr_max,
            r.orphan_rate.mean,
            r.attack_infeasible_rate.mean,
            analytic
        );
    }
    s
}

#[derive(Serialize)]
struct VerdictOut<'a> {
    miner: &'a str,
    avoidance_score: f64,
    avoidance_score_exact: String,
    expected_at_multiples: f64,
    expected_at_multiples_exact: String,
    observed_at_multiples: u64,
    flagged: bool,
    sample_sufficient: bool,
}

#[derive(Serialize)]
struct VerdictsOut<'a> {
    top_pools: usize,
    records: usize,
    verdicts: Vec<VerdictOut<'a>>,
}

pub fn verdicts_json(verdicts: &[ManipulationVerdict], top_pools: usize, records: usize) -> String {
    let verdicts = verdicts
        .iter()
        .map(|v| VerdictOut {
            miner: &v.miner,
            avoidance_score: v.score_f64(),
            avoidance_score_exact: v.avoidance_score.to_string(),
            expected_at_multiples: *v.expected_at_multiples.numer() as f64 / *v.expected_at_multiples.denom() as f64,
            expected_at_multiples_exact: v.expected_at_multiples.to_string(),
            observed_at_multiples: v.observed_at_multiples,
            flagged: v.flagged,
            sample_sufficient: v.sample_sufficient,
        })
        .collect();
    to_json(VERDICTS_SCHEMA, &VerdictsOut { top_pools, records, verdicts })
}

/// Long-format histogram rows for the given pools and the whole chain.
pub fn histogram_csv(records: &[HeaderRecord], miners: &[String]) -> String {
    let mut s = format!("{HISTOGRAM_CSV_HEADER}\n");
    let mut emit = |stats: PoolStats| {
        for (dt, n) in &stats.dt_histogram {
            let _ = writeln!(s, "{},{dt},{n}", stats.miner);
        }
    };
    for m in miners {
        emit(pool_stats(records, Some(m)));
    }
    emit(pool_stats(records, None));
    s
}
