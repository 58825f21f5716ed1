//! Method-by-scenario comparison grid: accuracy, cost, and utility for
//! each baseline and the cascade, across the three named scenarios.

use cascade_core::eval::{
    aggregate, run_baseline, BaselineKind, BaselineSpec, ExternalThresholdParams,
};
use cascade_core::engine::run_batch;
use cascade_core::model::{Query, TraceSet};
use cascade_core::policy::{reject_threshold, RewardParams};
use cascade_core::{EvalReport, Scenario};

use crate::error::CliError;
use crate::run::{policies_for, Prepared};

const ALPHAS: [f64; 3] = [0.2, 0.5, 0.8];

fn method_report(
    kind: Option<BaselineKind>,
    prepared: &Prepared,
    queries: &[Query],
    traces: &TraceSet,
    scenario: &Scenario,
) -> Result<EvalReport, CliError> {
    let outcomes = match kind {
        None => {
            let policies = policies_for(&prepared.pool, &prepared.policy);
            run_batch(queries, &prepared.pool, &policies, scenario, traces, &prepared.engine)?
        }
        Some(kind) => {
            let baselines = &prepared.config.baselines;
            let random_seed = baselines.random_seed.unwrap_or(prepared.engine.seed);
            let external = (kind == BaselineKind::ExternalThreshold).then(|| {
                ExternalThresholdParams {
                    score_noise_sigma: baselines.external_sigma,
                    threshold: baselines.external_threshold.unwrap_or_else(|| {
                        reject_threshold(&RewardParams::from_scenario(scenario))
                    }),
                }
            });
            let spec = BaselineSpec { kind, random_seed, external };
            run_baseline(&spec, queries, &prepared.pool, traces, scenario, &prepared.engine)
                .map_err(|e| CliError::runtime(e.to_string()))?
        }
    };
    aggregate(&outcomes, scenario).map_err(|e| CliError::runtime(e.to_string()))
}

/// Render the grid as a markdown table.
pub fn render(
    prepared: &Prepared,
    queries: &[Query],
    traces: &TraceSet,
) -> Result<String, CliError> {
    let methods: [(&str, Option<BaselineKind>); 6] = [
        ("oracle", Some(BaselineKind::Oracle)),
        ("smallest", Some(BaselineKind::Smallest)),
        ("largest", Some(BaselineKind::Largest)),
        ("random", Some(BaselineKind::Random)),
        ("external_threshold", Some(BaselineKind::ExternalThreshold)),
        ("cascade", None),
    ];

    let mut out = String::new();
    out.push_str("| method |");
    for alpha in ALPHAS {
        out.push_str(&format!(
            " acc (a={alpha}) | cost (a={alpha}) | utility (a={alpha}) |"
        ));
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in 0..ALPHAS.len() * 3 {
        out.push_str("---|");
    }
    out.push('\n');

    for (name, kind) in methods {
        out.push_str(&format!("| {name} |"));
        for alpha in ALPHAS {
            let mut scenario = Scenario::from_alpha(alpha, prepared.scenario.gamma);
            scenario.instruction = prepared.scenario.instruction.clone();
            let report = method_report(kind, prepared, queries, traces, &scenario)?;
            out.push_str(&format!(
                " {:.2} | {:.2} | {:.2} |",
                report.performance, report.mean_cost, report.utility
            ));
        }
        out.push('\n');
    }
    Ok(out)
}
