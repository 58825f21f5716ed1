//! Aggregate metrics, baseline policies, and analysis helpers.
//!
//! Baselines cover the naive assignments (smallest, largest, random),
//! the oracle topline that routes each query to the smallest capable
//! agent, and a stylized external-threshold cascade in which an outside
//! observer with a noisy view of each agent's capability decides when to
//! stop. Aggregation is a pure fold over immutable outcome lists.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineConfig;
use crate::model::{
    AgentId, CapabilityTrace, ClassificationMetrics, DecisionKind, EasyHardCosts, EvalReport,
    Pool, Query, QueryId, RoutingDecision, RoutingOutcome, Scenario, TraceSet,
};
use crate::policy::{perturb_logit, reject_threshold, reward, RewardEvent, RewardParams};
use crate::rng::derive_rng;
use rand::Rng;
use crate::scalar::{real, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Oracle,
    Smallest,
    Largest,
    Random,
    ExternalThreshold,
}

/// Parameters of the external-threshold cascade: an observer distinct
/// from the agents scores each hop with a noise-corrupted view of the
/// agent's capability and answers above a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalThresholdParams<S = f64> {
    pub score_noise_sigma: S,
    pub threshold: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec<S = f64> {
    pub kind: BaselineKind,
    pub random_seed: u64,
    /// Only read by `ExternalThreshold`; defaults to zero noise at the
    /// scenario's reject threshold.
    pub external: Option<ExternalThresholdParams<S>>,
}

impl<S: Scalar> BaselineSpec<S> {
    pub fn new(kind: BaselineKind) -> Self {
        Self { kind, random_seed: 0, external: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no outcomes to aggregate")]
    EmptyOutcomes,
    #[error("missing capability trace for query '{query_id}' agent '{agent_id}'")]
    MissingTrace { query_id: QueryId, agent_id: AgentId },
    #[error("decision and truth lists differ in length ({decisions} vs {truths})")]
    LengthMismatch { decisions: usize, truths: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("easy cutoff rank {cutoff} outside [1, {k}]")]
    BadCutoff { cutoff: usize, k: usize },
    #[error("trace sets must cover exactly one shared agent (found '{0}' vs '{1}')")]
    AgentMismatch(String, String),
    #[error("trace sets cover different query sets")]
    QuerySetMismatch,
    #[error("baseline requires a nonempty pool")]
    EmptyPool,
    #[error("no query answered correctly by the original traces (zero denominator)")]
    ZeroDenominator,
}

/// The scalar objective every policy is scored on:
/// `performance - alpha * mean_cost`.
pub fn compute_utility<S: Scalar>(performance: S, mean_cost: S, alpha: S) -> S {
    performance - alpha * mean_cost
}

/// Fold a batch of outcomes into an [`EvalReport`].
///
/// Answer rate is per agent over the queries that reached it; the
/// routing distribution is over final agents and sums to 1.
pub fn aggregate<S: Scalar>(
    outcomes: &[RoutingOutcome<S>],
    scenario: &Scenario<S>,
) -> Result<EvalReport<S>, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::EmptyOutcomes);
    }
    let n = real::<S>(outcomes.len() as f64);
    let mut correct = S::zero();
    let mut cost = S::zero();
    let mut reached: BTreeMap<AgentId, usize> = BTreeMap::new();
    let mut finalized: BTreeMap<AgentId, usize> = BTreeMap::new();

    for outcome in outcomes {
        if outcome.correct {
            correct = correct + S::one();
        }
        cost = cost + outcome.total_cost;
        for agent in &outcome.path {
            *reached.entry(agent.clone()).or_insert(0) += 1;
        }
        *finalized.entry(outcome.final_agent.clone()).or_insert(0) += 1;
    }

    let performance = correct / n;
    let mean_cost = cost / n;
    let per_agent_answer_rate = reached
        .iter()
        .map(|(agent, &seen)| {
            let answered = finalized.get(agent).copied().unwrap_or(0);
            (agent.clone(), real::<S>(answered as f64) / real::<S>(seen as f64))
        })
        .collect();
    let routing_distribution = reached
        .keys()
        .map(|agent| {
            let answered = finalized.get(agent).copied().unwrap_or(0);
            (agent.clone(), real::<S>(answered as f64) / n)
        })
        .collect();

    Ok(EvalReport {
        performance,
        mean_cost,
        utility: compute_utility(performance, mean_cost, scenario.alpha),
        per_agent_answer_rate,
        routing_distribution,
        classification: None,
        easy_hard_costs: None,
        delta_performance: None,
    })
}

/// The topline assignment: the lowest-rank agent whose greedy bit is
/// correct; when no agent is capable, the cheapest agent, which
/// maximizes the per-query utility `-alpha * cost` among guaranteed
/// losses.
pub fn oracle_route<S: Scalar>(
    query_id: &QueryId,
    pool: &Pool<S>,
    traces: &TraceSet,
) -> Result<AgentId, EvalError> {
    let mut cheapest: Option<&crate::model::AgentSpec<S>> = None;
    for agent in &pool.agents {
        let trace = traces.get(query_id, &agent.id).ok_or_else(|| EvalError::MissingTrace {
            query_id: query_id.clone(),
            agent_id: agent.id.clone(),
        })?;
        if trace.greedy_correct {
            return Ok(agent.id.clone());
        }
        let replace = match cheapest {
            Some(existing) => agent.cost < existing.cost,
            None => true,
        };
        if replace {
            cheapest = Some(agent);
        }
    }
    cheapest.map(|a| a.id.clone()).ok_or(EvalError::EmptyPool)
}

fn greedy_bit<S: Scalar>(
    query_id: &QueryId,
    agent_id: &AgentId,
    traces: &TraceSet,
) -> Result<(bool, S), EvalError> {
    let trace = traces.get(query_id, agent_id).ok_or_else(|| EvalError::MissingTrace {
        query_id: query_id.clone(),
        agent_id: agent_id.clone(),
    })?;
    Ok((trace.greedy_correct, trace.frequency().value()))
}

/// Outcome of a direct (single-hop) assignment.
fn assign_outcome<S: Scalar>(
    query: &Query,
    agent: &crate::model::AgentSpec<S>,
    traces: &TraceSet,
    params: &RewardParams<S>,
) -> Result<RoutingOutcome<S>, EvalError> {
    let (correct, frequency) = greedy_bit(&query.id, &agent.id, traces)?;
    let event = if correct { RewardEvent::Correct } else { RewardEvent::Incorrect };
    Ok(RoutingOutcome {
        query_id: query.id.clone(),
        path: vec![agent.id.clone()],
        final_agent: agent.id.clone(),
        correct,
        inference_cost: agent.cost,
        overhead_cost: S::zero(),
        total_cost: agent.cost,
        reward: reward(event, params),
        per_hop_decisions: vec![RoutingDecision {
            kind: DecisionKind::Answer,
            estimated_capability: frequency,
            threshold: S::zero(),
        }],
    })
}

/// Oracle outcome rendered as the perfect-self-assessment cascade walk:
/// every incapable prefix agent rejects, the smallest capable agent
/// answers. This keeps agent-level report fields comparable with engine
/// runs; with overhead disabled the cost equals the direct assignment's.
/// When no agent is capable the query is assigned directly to the
/// cheapest agent.
fn oracle_outcome<S: Scalar>(
    query: &Query,
    pool: &Pool<S>,
    traces: &TraceSet,
    scenario: &Scenario<S>,
    config: &EngineConfig<S>,
) -> Result<RoutingOutcome<S>, EvalError> {
    let params = RewardParams::from_scenario(scenario);
    let threshold = reject_threshold(&params);
    let mut path = Vec::new();
    let mut decisions = Vec::new();
    let mut rejected_cost = S::zero();

    for agent in &pool.agents {
        let (capable, _) = greedy_bit::<S>(&query.id, &agent.id, traces)?;
        if capable {
            path.push(agent.id.clone());
            decisions.push(RoutingDecision {
                kind: DecisionKind::Answer,
                estimated_capability: S::one(),
                threshold,
            });
            let overhead_cost = match config.overhead {
                crate::engine::OverheadMode::None => S::zero(),
                crate::engine::OverheadMode::Fractional(f) => f * rejected_cost,
            };
            return Ok(RoutingOutcome {
                query_id: query.id.clone(),
                final_agent: agent.id.clone(),
                correct: true,
                inference_cost: agent.cost,
                overhead_cost,
                total_cost: agent.cost + overhead_cost,
                reward: reward(RewardEvent::Correct, &params),
                path,
                per_hop_decisions: decisions,
            });
        }
        path.push(agent.id.clone());
        decisions.push(RoutingDecision {
            kind: DecisionKind::Reject,
            estimated_capability: S::zero(),
            threshold,
        });
        rejected_cost = rejected_cost + agent.cost;
    }

    // No capable agent: assign directly to the cheapest one.
    let cheapest = pool.agent_by_rank(1).ok_or(EvalError::EmptyPool)?;
    assign_outcome(query, cheapest, traces, &params)
}

/// External-threshold cascade: walk the pool, answering when the
/// observer's noise-corrupted capability estimate exceeds the threshold;
/// the fallback always answers.
fn external_outcome<S: Scalar>(
    query: &Query,
    pool: &Pool<S>,
    traces: &TraceSet,
    scenario: &Scenario<S>,
    config: &EngineConfig<S>,
    seed: u64,
    params: &ExternalThresholdParams<S>,
) -> Result<RoutingOutcome<S>, EvalError> {
    let reward_params = RewardParams::from_scenario(scenario);
    let k = pool.len();
    let entry = config.entry_rank.unwrap_or(pool.entry_rank);
    let mut path = Vec::new();
    let mut decisions = Vec::new();
    let mut rejected_cost = S::zero();

    for agent in &pool.agents {
        if agent.rank < entry {
            continue;
        }
        let is_fallback = agent.rank == k;
        let (capable, frequency) = greedy_bit(&query.id, &agent.id, traces)?;
        let score = if params.score_noise_sigma > S::zero() {
            let mut rng =
                derive_rng(seed, "external", &[query.id.as_str(), agent.id.as_str()]);
            perturb_logit(frequency, params.score_noise_sigma, &mut rng)
        } else {
            frequency
        };
        let kind = if is_fallback || score > params.threshold {
            DecisionKind::Answer
        } else {
            DecisionKind::Reject
        };
        path.push(agent.id.clone());
        decisions.push(RoutingDecision {
            kind,
            estimated_capability: score,
            threshold: params.threshold,
        });
        if kind == DecisionKind::Answer {
            let overhead_cost = match config.overhead {
                crate::engine::OverheadMode::None => S::zero(),
                crate::engine::OverheadMode::Fractional(f) => f * rejected_cost,
            };
            let event = if capable { RewardEvent::Correct } else { RewardEvent::Incorrect };
            return Ok(RoutingOutcome {
                query_id: query.id.clone(),
                final_agent: agent.id.clone(),
                correct: capable,
                inference_cost: agent.cost,
                overhead_cost,
                total_cost: agent.cost + overhead_cost,
                reward: reward(event, &reward_params),
                path,
                per_hop_decisions: decisions,
            });
        }
        rejected_cost = rejected_cost + agent.cost;
    }
    Err(EvalError::EmptyPool)
}

/// Run one baseline policy over a batch, emitting outcomes in input
/// order with the same determinism contract as the engine.
pub fn run_baseline<S: Scalar>(
    spec: &BaselineSpec<S>,
    queries: &[Query],
    pool: &Pool<S>,
    traces: &TraceSet,
    scenario: &Scenario<S>,
    config: &EngineConfig<S>,
) -> Result<Vec<RoutingOutcome<S>>, EvalError> {
    if pool.is_empty() {
        return Err(EvalError::EmptyPool);
    }
    let params = RewardParams::from_scenario(scenario);
    let k = pool.len();
    let mut outcomes = Vec::with_capacity(queries.len());
    for query in queries {
        let outcome = match spec.kind {
            BaselineKind::Smallest => {
                assign_outcome(query, pool.agent_by_rank(1).expect("nonempty"), traces, &params)?
            }
            BaselineKind::Largest => {
                assign_outcome(query, pool.agent_by_rank(k).expect("nonempty"), traces, &params)?
            }
            BaselineKind::Random => {
                let mut rng =
                    derive_rng(spec.random_seed, "random-baseline", &[query.id.as_str()]);
                let rank = rng.random_range(1..=k);
                assign_outcome(query, pool.agent_by_rank(rank).expect("in range"), traces, &params)?
            }
            BaselineKind::Oracle => oracle_outcome(query, pool, traces, scenario, config)?,
            BaselineKind::ExternalThreshold => {
                let external = spec.external.unwrap_or(ExternalThresholdParams {
                    score_noise_sigma: S::zero(),
                    threshold: reject_threshold(&params),
                });
                external_outcome(query, pool, traces, scenario, config, spec.random_seed, &external)?
            }
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Split outcomes by difficulty: a query is easy when some agent of rank
/// at most `easy_cutoff_rank` solves it greedily. Means are over total
/// cost; a class with no members reports `None`.
pub fn easy_hard_split<S: Scalar>(
    outcomes: &[RoutingOutcome<S>],
    traces: &TraceSet,
    pool: &Pool<S>,
    easy_cutoff_rank: usize,
) -> Result<EasyHardCosts<S>, EvalError> {
    if easy_cutoff_rank < 1 || easy_cutoff_rank > pool.len() {
        return Err(EvalError::BadCutoff { cutoff: easy_cutoff_rank, k: pool.len() });
    }
    let low_agents: Vec<&AgentId> = pool
        .agents
        .iter()
        .filter(|a| a.rank <= easy_cutoff_rank)
        .map(|a| &a.id)
        .collect();

    let mut easy = (S::zero(), 0usize);
    let mut hard = (S::zero(), 0usize);
    for outcome in outcomes {
        let is_easy = low_agents.iter().any(|agent| {
            traces
                .get(&outcome.query_id, agent)
                .map(|t| t.greedy_correct)
                .unwrap_or(false)
        });
        let bucket = if is_easy { &mut easy } else { &mut hard };
        bucket.0 = bucket.0 + outcome.total_cost;
        bucket.1 += 1;
    }
    let mean = |(sum, count): (S, usize)| {
        (count > 0).then(|| sum / real::<S>(count as f64))
    };
    Ok(EasyHardCosts {
        easy_mean_cost: mean(easy),
        hard_mean_cost: mean(hard),
        easy_count: easy.1,
        hard_count: hard.1,
    })
}

/// Confusion-matrix metrics for answer/reject decisions against
/// capability ground truth; the positive class is capable/answer.
/// `f1 = 2PR / (P + R)`, defined as 0 when `P + R = 0`.
pub fn classification_metrics<S: Scalar>(
    decisions: &[bool],
    truths: &[bool],
) -> Result<ClassificationMetrics<S>, EvalError> {
    if decisions.len() != truths.len() {
        return Err(EvalError::LengthMismatch { decisions: decisions.len(), truths: truths.len() });
    }
    if decisions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&decided, &truth) in decisions.iter().zip(truths) {
        match (decided, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            S::zero()
        } else {
            real::<S>(num as f64) / real::<S>(den as f64)
        }
    };
    let accuracy = ratio(tp + tn, decisions.len());
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == S::zero() {
        S::zero()
    } else {
        real::<S>(2.0) * precision * recall / (precision + recall)
    };
    Ok(ClassificationMetrics { accuracy, precision, recall, f1 })
}

fn single_agent(traces: &TraceSet) -> Result<AgentId, EvalError> {
    let agents = traces.agent_ids();
    let mut iter = agents.into_iter();
    match (iter.next(), iter.next()) {
        (Some(agent), None) => Ok(agent),
        (Some(a), Some(b)) => Err(EvalError::AgentMismatch(a.0, b.0)),
        (None, _) => Err(EvalError::EmptyInput),
    }
}

/// Proportional capability change between two trace sets of the same
/// agent over the same queries: of the queries the original traces find
/// unanswerable (every sample incorrect), how many the new traces answer
/// correctly, relative to the queries the original answers correctly.
/// Zero means the intervention changed behavior but not capability.
pub fn delta_performance<S: Scalar>(
    before: &TraceSet,
    after: &TraceSet,
) -> Result<S, EvalError> {
    let agent_before = single_agent(before)?;
    let agent_after = single_agent(after)?;
    if agent_before != agent_after {
        return Err(EvalError::AgentMismatch(agent_before.0, agent_after.0));
    }
    let queries_before: Vec<&QueryId> = before.iter().map(|t| &t.query_id).collect();
    let queries_after: Vec<&QueryId> = after.iter().map(|t| &t.query_id).collect();
    if queries_before != queries_after {
        return Err(EvalError::QuerySetMismatch);
    }

    let unanswerable = |trace: &CapabilityTrace| trace.samples.iter().all(|&s| !s);
    let mut newly_solved = 0usize;
    let mut originally_solved = 0usize;
    for (trace_before, trace_after) in before.iter().zip(after.iter()) {
        if trace_before.greedy_correct {
            originally_solved += 1;
        }
        if unanswerable(trace_before) && trace_after.greedy_correct {
            newly_solved += 1;
        }
    }
    if originally_solved == 0 {
        return Err(EvalError::ZeroDenominator);
    }
    Ok(real::<S>(newly_solved as f64) / real::<S>(originally_solved as f64))
}
