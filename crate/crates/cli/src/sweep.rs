//! Multi-alpha sweeps: one full run per preference factor, a combined
//! CSV, and a recorded pointwise cost-monotonicity check.

use std::fmt::Write as _;
use std::fs;

use cascade_core::model::AgentId;
use cascade_core::{RoutingOutcome, Scenario};
use serde::Serialize;

use crate::args::{RunOverrides, SweepArgs};
use crate::error::CliError;
use crate::fsutil::write_atomic;
use crate::manifest::{now_rfc3339, RunManifest};
use crate::run::{self, execute, load_trace_file, prepare, synthesize, write_run_outputs};

#[derive(Serialize)]
struct MonotonicityCheck {
    /// Alpha pairs compared, ascending.
    pairs: Vec<[f64; 2]>,
    /// Count of (query, pair) cases where the final cost rose with alpha.
    violations: usize,
    ok: bool,
}

#[derive(Serialize)]
struct SweepSummary {
    alphas: Vec<f64>,
    cost_monotonicity: MonotonicityCheck,
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    let started = now_rfc3339();
    for &alpha in &args.alphas {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CliError::config(format!("--alphas value {alpha} outside [0, 1]")));
        }
    }
    if args.alphas.is_empty() {
        return Err(CliError::config("--alphas needs at least one value"));
    }

    let overrides = RunOverrides {
        seed: args.seed,
        alpha: None,
        gamma: args.gamma,
        overhead: args.overhead.clone(),
    };
    let mut prepared = prepare(&args.config, &overrides, &args.pool_remove)?;

    let (queries, traces) = match &args.trace {
        Some(path) => {
            let traces = load_trace_file(path)?;
            let queries = traces
                .queries()
                .iter()
                .map(|id| cascade_core::model::Query::bare(id.as_str()))
                .collect();
            (queries, traces)
        }
        None => synthesize(&prepared)?,
    };
    if queries.is_empty() {
        return Err(CliError::config("empty dataset"));
    }

    let agent_ids: Vec<AgentId> = prepared.pool.agents.iter().map(|a| a.id.clone()).collect();
    let mut manifest =
        RunManifest::new(prepared.config_hash.clone(), prepared.engine.seed, started);

    // Header: scalars, then per-agent answer rates and routing shares.
    let mut csv = String::from("alpha,performance,mean_cost,utility,oracle_utility");
    for id in &agent_ids {
        let _ = write!(csv, ",answer_rate.{id}");
    }
    for id in &agent_ids {
        let _ = write!(csv, ",share.{id}");
    }
    csv.push('\n');

    let mut runs: Vec<(f64, Vec<RoutingOutcome>)> = Vec::new();
    fs::create_dir_all(&args.out)?;
    for &alpha in &args.alphas {
        let scenario = Scenario::from_alpha(alpha, prepared.scenario.gamma);
        run::print_warnings(&scenario);
        prepared.scenario = scenario;
        let artifacts = execute(&prepared, &queries, &traces)?;

        let sub_dir = args.out.join(format!("alpha_{alpha}"));
        write_run_outputs(&sub_dir, &artifacts, None, &mut manifest)?;

        let report = &artifacts.report;
        let oracle_utility = artifacts
            .oracle_report
            .as_ref()
            .map(|o| o.utility.to_string())
            .unwrap_or_default();
        let _ = write!(
            csv,
            "{alpha},{},{},{},{oracle_utility}",
            report.performance, report.mean_cost, report.utility
        );
        for id in &agent_ids {
            match report.per_agent_answer_rate.get(id) {
                Some(rate) => {
                    let _ = write!(csv, ",{rate}");
                }
                None => csv.push(','),
            }
        }
        for id in &agent_ids {
            match report.routing_distribution.get(id) {
                Some(share) => {
                    let _ = write!(csv, ",{share}");
                }
                None => csv.push(','),
            }
        }
        csv.push('\n');
        runs.push((alpha, artifacts.outcomes));
    }

    let summary = monotonicity_summary(&args.alphas, &runs);
    println!(
        "cost monotonicity across alphas: {} ({} violations over {} pairs)",
        if summary.cost_monotonicity.ok { "ok" } else { "violated" },
        summary.cost_monotonicity.violations,
        summary.cost_monotonicity.pairs.len(),
    );

    let csv_path = args.out.join("sweep.csv");
    write_atomic(&csv_path, csv.as_bytes())?;
    manifest.record(&csv_path);
    let summary_path = args.out.join("sweep.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&summary_path, json.as_bytes())?;
    manifest.record(&summary_path);
    manifest.finish(&args.out)?;
    println!("outputs in {}", args.out.display());
    Ok(())
}

/// Pointwise check over ascending alphas: per query, the final cost must
/// never rise as alpha grows. Recorded, not enforced — noisy policies
/// may legitimately violate it.
fn monotonicity_summary(alphas: &[f64], runs: &[(f64, Vec<RoutingOutcome>)]) -> SweepSummary {
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[a].0.total_cmp(&runs[b].0));

    let mut pairs = Vec::new();
    let mut violations = 0usize;
    for window in order.windows(2) {
        let (alpha_lo, ref lo) = runs[window[0]];
        let (alpha_hi, ref hi) = runs[window[1]];
        if alpha_lo == alpha_hi {
            continue;
        }
        pairs.push([alpha_lo, alpha_hi]);
        violations += lo
            .iter()
            .zip(hi.iter())
            .filter(|(low_run, high_run)| high_run.total_cost > low_run.total_cost)
            .count();
    }
    SweepSummary {
        alphas: alphas.to_vec(),
        cost_monotonicity: MonotonicityCheck { ok: violations == 0, violations, pairs },
    }
}
