//! Training-label construction: one labeling pass per preference factor,
//! with optional class/scenario balancing.

use cascade_core::policy::{build_sft_dataset, write_sft_jsonl, StratumSummary};
use cascade_core::rng::sha256_hex;
use cascade_core::Scenario;
use serde::Serialize;

use crate::args::LabelArgs;
use crate::error::CliError;
use crate::fsutil::write_atomic;
use crate::manifest::{command_line, now_rfc3339};

#[derive(Serialize)]
struct LabelSummary<'a> {
    trace_hash: String,
    alphas: &'a [f64],
    balance: bool,
    seed: u64,
    records: usize,
    strata: &'a [StratumSummary],
    command: String,
    started_at: String,
    finished_at: String,
}

pub fn run(args: &LabelArgs) -> Result<(), CliError> {
    let started_at = now_rfc3339();
    for &alpha in &args.alphas {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CliError::config(format!("--alphas value {alpha} outside [0, 1]")));
        }
    }
    if !(args.gamma > 0.0 && args.gamma <= 1.0) {
        return Err(CliError::config(format!("--gamma {} outside (0, 1]", args.gamma)));
    }

    let trace_bytes = std::fs::read(&args.trace).map_err(|e| {
        CliError::config(format!("cannot read trace file {}: {e}", args.trace.display()))
    })?;
    let traces = cascade_core::model::TraceSet::read_jsonl(&trace_bytes[..])?;

    let scenarios: Vec<Scenario> =
        args.alphas.iter().map(|&alpha| Scenario::from_alpha(alpha, args.gamma)).collect();
    let dataset = build_sft_dataset(&traces, &scenarios, args.balance, args.seed);

    let mut bytes = Vec::new();
    write_sft_jsonl(&dataset.records, &mut bytes)?;
    write_atomic(&args.out, &bytes)?;

    println!("wrote {} labeled records to {}", dataset.records.len(), args.out.display());
    println!("stratum counts (agent, scenario, alpha, answers/rejects, kept):");
    for stratum in &dataset.strata {
        println!(
            "  {} {} a={}: {}/{} kept {}+{}",
            stratum.agent_id,
            stratum.scenario,
            stratum.alpha,
            stratum.answers,
            stratum.rejects,
            stratum.kept_answers,
            stratum.kept_rejects,
        );
        if stratum.degenerate {
            eprintln!(
                "warning: stratum ({}, alpha={}) has no {} records; emitted empty",
                stratum.agent_id,
                stratum.alpha,
                if stratum.answers == 0 { "answer" } else { "reject" },
            );
        }
    }

    let summary = LabelSummary {
        trace_hash: sha256_hex(&trace_bytes),
        alphas: &args.alphas,
        balance: args.balance,
        seed: args.seed,
        records: dataset.records.len(),
        strata: &dataset.strata,
        command: command_line(),
        started_at,
        finished_at: now_rfc3339(),
    };
    let summary_path = args.out.with_extension("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&summary_path, json.as_bytes())?;
    Ok(())
}
