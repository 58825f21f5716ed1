//! Shared pipeline: load and fingerprint the effective config, build the
//! domain objects, run the cascade plus the oracle topline, and persist
//! the outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cascade_core::agents::{
    calibrate_skills, generate_synthetic, DispatchEvaluator, LiveAgentSpec, LiveClient,
    SyntheticPoolSpec,
};
use cascade_core::engine::{run_batch, run_batch_concurrent, EngineConfig};
use cascade_core::eval::{aggregate, run_baseline, BaselineKind, BaselineSpec};
use cascade_core::model::{
    read_queries_jsonl, write_outcomes_jsonl, AgentId, BackendKind, Query, RunConfig, TraceSet,
};
use cascade_core::policy::PolicyConfig;
use cascade_core::rng::sha256_hex;
use cascade_core::{EvalReport, Pool, RoutingOutcome, Scenario};

use crate::args::{ReplayArgs, RunOverrides, SimulateArgs};
use crate::error::CliError;
use crate::fsutil::write_atomic;
use crate::manifest::{now_rfc3339, RunManifest};
use crate::table2;

pub struct Prepared {
    pub config: RunConfig,
    pub pool: Pool,
    pub scenario: Scenario,
    pub engine: EngineConfig<f64>,
    pub policy: PolicyConfig<f64>,
    pub config_hash: String,
}

/// Load the config file, apply flag overrides and pool removals, and
/// build validated domain objects. The hash fingerprints the effective
/// config, so overrides change it.
pub fn prepare(
    config_path: &Path,
    overrides: &RunOverrides,
    pool_remove: &[String],
) -> Result<Prepared, CliError> {
    let text = fs::read_to_string(config_path).map_err(|e| {
        CliError::config(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let mut config = RunConfig::from_toml_str(&text)?;

    if let Some(seed) = overrides.seed {
        config.engine.seed = seed;
    }
    if let Some(alpha) = overrides.alpha {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CliError::config(format!("--alpha {alpha} outside [0, 1]")));
        }
        config.scenario.alpha = Some(alpha);
        config.scenario.name = None;
    }
    if let Some(gamma) = overrides.gamma {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(CliError::config(format!("--gamma {gamma} outside (0, 1]")));
        }
        config.scenario.gamma = Some(gamma);
    }
    if let Some(overhead) = &overrides.overhead {
        config.engine.overhead_mode = overhead.clone();
    }
    if !pool_remove.is_empty() {
        for id in pool_remove {
            if !config.pool.iter().any(|entry| &entry.id == id) {
                return Err(CliError::config(format!("--pool-remove: agent '{id}' is not in the pool")));
            }
        }
        config.pool.retain(|entry| !pool_remove.contains(&entry.id));
        if config.pool.is_empty() {
            return Err(CliError::config("--pool-remove removes every agent"));
        }
    }

    let config_hash = sha256_hex(config.canonical_toml().as_bytes());
    let pool = config.build_pool()?;
    let scenario = config.build_scenario()?;
    for issue in scenario.validate() {
        if !issue.is_error() {
            eprintln!("{issue}");
        }
    }
    let engine = EngineConfig::from_section(&config.engine).map_err(CliError::Config)?;
    let policy = PolicyConfig::from_section(&config.policy).map_err(CliError::Config)?;
    Ok(Prepared { config, pool, scenario, engine, policy, config_hash })
}

pub fn policies_for(pool: &Pool, policy: &PolicyConfig<f64>) -> BTreeMap<AgentId, PolicyConfig<f64>> {
    pool.agents.iter().map(|a| (a.id.clone(), policy.clone())).collect()
}

pub struct RunArtifacts {
    pub outcomes: Vec<RoutingOutcome>,
    pub report: EvalReport,
    /// Absent when the traces do not cover every (query, agent) pair,
    /// as in live pools without recorded correctness.
    pub oracle_report: Option<EvalReport>,
}

/// Build one live client per agent whose backend is `live`, from the
/// matching pool entries' `[pool.live]` sections.
fn live_clients(prepared: &Prepared) -> Result<std::collections::BTreeMap<AgentId, LiveClient>, CliError> {
    let mut clients = std::collections::BTreeMap::new();
    for agent in &prepared.pool.agents {
        if agent.backend != BackendKind::Live {
            continue;
        }
        let entry = prepared
            .config
            .pool
            .iter()
            .find(|e| e.id == agent.id.as_str())
            .expect("pool built from config entries");
        let section = entry.live.as_ref().ok_or_else(|| {
            CliError::config(format!(
                "agent '{}' has backend \"live\" but no [pool.live] section",
                agent.id
            ))
        })?;
        let spec = LiveAgentSpec::from_section(section);
        let client =
            LiveClient::new(spec).map_err(|e| CliError::runtime(e.to_string()))?;
        clients.insert(agent.id.clone(), client);
    }
    Ok(clients)
}

/// Route the batch, then compute the oracle topline on the same traces
/// so utility ratios are printable from one run.
pub fn execute(
    prepared: &Prepared,
    queries: &[Query],
    traces: &TraceSet,
) -> Result<RunArtifacts, CliError> {
    if queries.is_empty() {
        return Err(CliError::config("empty dataset"));
    }
    let policies = policies_for(&prepared.pool, &prepared.policy);
    let has_live = prepared.pool.agents.iter().any(|a| a.backend == BackendKind::Live);
    let outcomes = if has_live {
        let clients = live_clients(prepared)?;
        let max_in_flight = clients
            .values()
            .map(|c| c.spec().max_in_flight)
            .min()
            .unwrap_or(1)
            .max(1);
        let evaluator = DispatchEvaluator::new(traces, &policies, clients);
        let batch = run_batch_concurrent(
            queries,
            &prepared.pool,
            &evaluator,
            &prepared.scenario,
            &prepared.engine,
            max_in_flight,
        );
        if batch.partial {
            let failures = batch.results.iter().filter(|r| r.is_err()).count();
            let first = batch
                .results
                .iter()
                .find_map(|r| r.as_ref().err())
                .expect("partial batch has an error");
            return Err(CliError::runtime(format!(
                "{failures} of {} queries failed; first: {first}",
                queries.len()
            )));
        }
        batch.results.into_iter().map(|r| r.expect("checked partial")).collect()
    } else {
        run_batch(
            queries,
            &prepared.pool,
            &policies,
            &prepared.scenario,
            traces,
            &prepared.engine,
        )?
    };
    let report = aggregate(&outcomes, &prepared.scenario)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let oracle_report = match run_baseline(
        &BaselineSpec::new(BaselineKind::Oracle),
        queries,
        &prepared.pool,
        traces,
        &prepared.scenario,
        &prepared.engine,
    ) {
        Ok(oracle) => Some(
            aggregate(&oracle, &prepared.scenario)
                .map_err(|e| CliError::runtime(e.to_string()))?,
        ),
        // Live pools may have no recorded correctness to rank against.
        Err(cascade_core::eval::EvalError::MissingTrace { .. }) => None,
        Err(e) => return Err(CliError::runtime(e.to_string())),
    };
    Ok(RunArtifacts { outcomes, report, oracle_report })
}

/// Report CSV: the run's rows plus the oracle topline rows when known.
pub fn report_csv(report: &EvalReport, oracle: Option<&EvalReport>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    report
        .write_csv(&mut buf)
        .map_err(|e| CliError::runtime(format!("report csv: {e}")))?;
    let mut text = String::from_utf8(buf).expect("csv is utf-8");
    if let Some(oracle) = oracle {
        text.push_str(&format!("oracle_performance,,{}\n", oracle.performance));
        text.push_str(&format!("oracle_mean_cost,,{}\n", oracle.mean_cost));
        text.push_str(&format!("oracle_utility,,{}\n", oracle.utility));
    }
    Ok(text.into_bytes())
}

pub fn write_run_outputs(
    out_dir: &Path,
    artifacts: &RunArtifacts,
    traces: Option<&TraceSet>,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)?;
    if let Some(traces) = traces {
        let mut bytes = Vec::new();
        traces.write_jsonl(&mut bytes)?;
        let path = out_dir.join("traces.jsonl");
        write_atomic(&path, &bytes)?;
        manifest.record(&path);
    }
    let mut bytes = Vec::new();
    write_outcomes_jsonl(&artifacts.outcomes, &mut bytes)?;
    let path = out_dir.join("outcomes.jsonl");
    write_atomic(&path, &bytes)?;
    manifest.record(&path);

    let path = out_dir.join("report.csv");
    write_atomic(&path, &report_csv(&artifacts.report, artifacts.oracle_report.as_ref())?)?;
    manifest.record(&path);

    let path = out_dir.join("report.json");
    write_atomic(&path, artifacts.report.to_json_pretty().as_bytes())?;
    manifest.record(&path);

    if let Some(oracle_report) = &artifacts.oracle_report {
        let path = out_dir.join("oracle.json");
        write_atomic(&path, oracle_report.to_json_pretty().as_bytes())?;
        manifest.record(&path);
    }
    Ok(())
}

pub fn print_summary(artifacts: &RunArtifacts, out_dir: &Path) {
    let report = &artifacts.report;
    println!(
        "performance {:.4}  mean_cost {:.4}  utility {:.4}",
        report.performance, report.mean_cost, report.utility
    );
    match &artifacts.oracle_report {
        Some(oracle) if oracle.utility > 0.0 => println!(
            "oracle utility {:.4} (run reaches {:.1}% of the oracle topline)",
            oracle.utility,
            100.0 * report.utility / oracle.utility
        ),
        Some(oracle) => println!("oracle utility {:.4}", oracle.utility),
        None => println!("oracle topline unavailable (traces do not cover every agent)"),
    }
    println!("outputs in {}", out_dir.display());
}

/// Build the synthetic dataset named by the config's `[synthetic]`
/// section, calibrating skills when target accuracies are given.
pub fn synthesize(prepared: &Prepared) -> Result<(Vec<Query>, TraceSet), CliError> {
    let section = prepared
        .config
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::config("this command needs a [synthetic] config section"))?;
    let mut spec = SyntheticPoolSpec::from_section(section, prepared.engine.seed)
        .map_err(CliError::Config)?;
    let pool_size = prepared.pool.len();
    if let Some(targets) = &section.target_accuracies {
        if targets.len() != pool_size {
            return Err(CliError::config(format!(
                "synthetic.target_accuracies has {} entries for {pool_size} agents",
                targets.len()
            )));
        }
        spec = calibrate_skills(targets, &spec).map_err(|e| CliError::config(e.to_string()))?;
    } else if spec.skills.len() != pool_size {
        return Err(CliError::config(format!(
            "synthetic.skills has {} entries for {pool_size} agents (or set target_accuracies)",
            spec.skills.len()
        )));
    }
    if spec.n_queries == 0 {
        return Err(CliError::config("empty dataset"));
    }
    let ids: Vec<AgentId> = prepared.pool.agents.iter().map(|a| a.id.clone()).collect();
    let data = generate_synthetic(&spec, &ids).map_err(|e| CliError::config(e.to_string()))?;
    Ok((data.queries, data.traces))
}

pub fn load_trace_file(path: &Path) -> Result<TraceSet, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::config(format!("cannot read trace file {}: {e}", path.display())))?;
    Ok(TraceSet::read_jsonl(std::io::BufReader::new(file))?)
}

fn maybe_table2(
    enabled: bool,
    prepared: &Prepared,
    queries: &[Query],
    traces: &TraceSet,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    if !enabled {
        return Ok(());
    }
    if prepared.pool.agents.iter().any(|a| a.backend == BackendKind::Live) {
        return Err(CliError::config("--table2 needs trace or synthetic backends"));
    }
    let grid = table2::render(prepared, queries, traces)?;
    println!("{grid}");
    let path = out_dir.join("table2.md");
    write_atomic(&path, grid.as_bytes())?;
    manifest.record(&path);
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let started = now_rfc3339();
    let prepared = prepare(&args.config, &args.overrides, &[])?;
    let (queries, traces) = synthesize(&prepared)?;
    let artifacts = execute(&prepared, &queries, &traces)?;
    let mut manifest =
        RunManifest::new(prepared.config_hash.clone(), prepared.engine.seed, started);
    write_run_outputs(&args.out, &artifacts, Some(&traces), &mut manifest)?;
    maybe_table2(args.table2, &prepared, &queries, &traces, &args.out, &mut manifest)?;
    manifest.finish(&args.out)?;
    print_summary(&artifacts, &args.out);
    Ok(())
}

pub fn replay(args: &ReplayArgs) -> Result<(), CliError> {
    let started = now_rfc3339();
    let prepared = prepare(&args.config, &args.overrides, &args.pool_remove)?;
    let traces = load_trace_file(&args.trace)?;
    let queries: Vec<Query> = match &args.queries {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| {
                CliError::config(format!("cannot read query file {}: {e}", path.display()))
            })?;
            read_queries_jsonl(std::io::BufReader::new(file))
                .map_err(|e| CliError::config(e.to_string()))?
        }
        None => traces.queries().iter().map(|id| Query::bare(id.as_str())).collect(),
    };
    let artifacts = execute(&prepared, &queries, &traces)?;
    let mut manifest =
        RunManifest::new(prepared.config_hash.clone(), prepared.engine.seed, started);
    write_run_outputs(&args.out, &artifacts, None, &mut manifest)?;
    maybe_table2(args.table2, &prepared, &queries, &traces, &args.out, &mut manifest)?;
    manifest.finish(&args.out)?;
    print_summary(&artifacts, &args.out);
    Ok(())
}

// Scenario warnings are printed by `prepare`; sweeps re-check per alpha.
pub fn print_warnings(scenario: &Scenario) {
    for issue in scenario.validate() {
        if !issue.is_error() {
            eprintln!("{issue}");
        }
    }
}
