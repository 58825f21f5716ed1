//! Cascade execution: walks a query through the cost-ordered pool,
//! applies each agent's answer/reject decision, accounts cost and
//! optional rejection overhead, and emits [`RoutingOutcome`] records.
//!
//! Queries are routed independently, and every random draw is derived
//! from `(seed, query id, agent id)`, so an outcome depends only on the
//! query and the configuration — never on batch composition or
//! evaluation order. Shared state (pool, traces, configs) is read-only
//! during a run.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AgentId, AgentSpec, DecisionKind, EngineSection, Pool, Query, QueryId, RoutingDecision,
    RoutingOutcome, Scenario, TraceSet,
};
use crate::policy::{
    assess_trace, decide, decide_with_threshold, reward, PolicyConfig, PolicyKind, RewardEvent,
    RewardParams,
};
use crate::rng::derive_u64;
use crate::scalar::{real, Scalar};

/// How rejection overhead is charged.
///
/// `Fractional(f)` adds `f * cost(agent)` for every agent that rejects
/// along the path, modeling rejection responses that take a small
/// fraction of a full answer. `None` matches the headline cost model
/// where routing overhead is negligible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OverheadMode<S = f64> {
    None,
    Fractional(S),
}

impl<S: Scalar> OverheadMode<S> {
    pub const DEFAULT_FRACTION: f64 = 0.05;

    /// Parse `"none"`, `"fractional"`, or `"fractional:<f>"`.
    pub fn parse(text: &str) -> Result<Self, String> {
        match text {
            "none" => Ok(OverheadMode::None),
            "fractional" => Ok(OverheadMode::Fractional(real(Self::DEFAULT_FRACTION))),
            other => match other.strip_prefix("fractional:") {
                Some(raw) => {
                    let f: f64 = raw
                        .parse()
                        .map_err(|_| format!("overhead fraction '{raw}' is not a number"))?;
                    if !(0.0..=1.0).contains(&f) {
                        return Err(format!("overhead fraction {f} outside [0, 1]"));
                    }
                    Ok(OverheadMode::Fractional(real(f)))
                }
                None => Err(format!(
                    "overhead mode '{other}' is not 'none', 'fractional', or 'fractional:<f>'"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig<S = f64> {
    pub overhead: OverheadMode<S>,
    pub seed: u64,
    /// Overrides the pool's entry rank when set.
    pub entry_rank: Option<usize>,
}

impl<S: Scalar> Default for EngineConfig<S> {
    fn default() -> Self {
        Self { overhead: OverheadMode::None, seed: 0, entry_rank: None }
    }
}

impl EngineConfig<f64> {
    /// Build from the `[engine]` config section.
    pub fn from_section(section: &EngineSection) -> Result<Self, String> {
        Ok(Self {
            overhead: OverheadMode::parse(&section.overhead_mode)?,
            seed: section.seed,
            entry_rank: section.entry_rank,
        })
    }
}

/// What happened at one hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopEval<S = f64> {
    pub decision: RoutingDecision<S>,
    /// Realized correctness if this agent answers.
    pub correct: bool,
}

/// A hop-level failure, without positional context; the engine attaches
/// the query and hop index.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HopError {
    #[error("missing capability trace")]
    MissingTrace,
    #[error("empty sample list")]
    EmptySamples,
    #[error("no live client configured for this agent")]
    NotConfigured,
    #[error("query has no payload (required by the live backend)")]
    MissingPayload,
    #[error("timeout after {0} ms")]
    Timeout(u64),
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("pool is empty")]
    EmptyPool,
    #[error("entry rank {entry} outside pool of {k} agents")]
    EntryRank { entry: usize, k: usize },
    #[error("query '{query_id}' at hop {hop} (agent '{agent_id}'): {source}")]
    Hop {
        query_id: QueryId,
        hop: usize,
        agent_id: AgentId,
        #[source]
        source: HopError,
    },
}

/// Supplies per-hop decisions and realized correctness. Implementations
/// must be deterministic in `(query, agent, scenario, run_seed)`.
pub trait HopEvaluator<S: Scalar>: Sync {
    fn evaluate_hop(
        &self,
        query: &Query,
        agent: &AgentSpec<S>,
        is_fallback: bool,
        scenario: &Scenario<S>,
        run_seed: u64,
    ) -> Result<HopEval<S>, HopError>;
}

/// Evaluator backed by recorded capability traces.
pub struct TraceEvaluator<'a, S = f64> {
    pub traces: &'a TraceSet,
    pub policies: &'a BTreeMap<AgentId, PolicyConfig<S>>,
}

impl<S: Scalar> HopEvaluator<S> for TraceEvaluator<'_, S> {
    fn evaluate_hop(
        &self,
        query: &Query,
        agent: &AgentSpec<S>,
        is_fallback: bool,
        scenario: &Scenario<S>,
        run_seed: u64,
    ) -> Result<HopEval<S>, HopError> {
        let trace = self.traces.get(&query.id, &agent.id).ok_or(HopError::MissingTrace)?;
        let policy = self.policies.get(&agent.id).cloned().unwrap_or_default();
        let hop_seed = derive_u64(run_seed, "hop", &[query.id.as_str(), agent.id.as_str()]);
        let assessment = assess_trace(trace, &policy, hop_seed).map_err(|_| HopError::EmptySamples)?;
        let decision = match policy.kind {
            PolicyKind::AlwaysAnswer => RoutingDecision {
                kind: DecisionKind::Answer,
                estimated_capability: assessment.p_hat,
                threshold: S::zero(),
            },
            PolicyKind::FixedThreshold => {
                decide_with_threshold(assessment.p_hat, policy.fixed_threshold, is_fallback)
            }
            PolicyKind::Calibrated | PolicyKind::Noisy => {
                decide(assessment.p_hat, scenario, is_fallback)
            }
        };
        Ok(HopEval { decision, correct: assessment.realized_correct })
    }
}

/// Route one query through the cascade with a custom hop evaluator.
pub fn route_one_with<S: Scalar, E: HopEvaluator<S> + ?Sized>(
    query: &Query,
    pool: &Pool<S>,
    evaluator: &E,
    scenario: &Scenario<S>,
    config: &EngineConfig<S>,
) -> Result<RoutingOutcome<S>, EngineError> {
    if pool.is_empty() {
        return Err(EngineError::EmptyPool);
    }
    let k = pool.len();
    let entry = config.entry_rank.unwrap_or(pool.entry_rank);
    if entry < 1 || entry > k {
        return Err(EngineError::EntryRank { entry, k });
    }

    let params = RewardParams::from_scenario(scenario);
    let mut path = Vec::new();
    let mut decisions = Vec::new();
    let mut rejected_cost = S::zero();

    for rank in entry..=k {
        let agent = pool.agent_by_rank(rank).expect("validated pool has contiguous ranks");
        let is_fallback = rank == k;
        let hop = path.len();
        let eval = evaluator
            .evaluate_hop(query, agent, is_fallback, scenario, config.seed)
            .map_err(|source| EngineError::Hop {
                query_id: query.id.clone(),
                hop,
                agent_id: agent.id.clone(),
                source,
            })?;
        path.push(agent.id.clone());
        decisions.push(eval.decision);

        if eval.decision.kind == DecisionKind::Answer {
            let overhead_cost = match config.overhead {
                OverheadMode::None => S::zero(),
                OverheadMode::Fractional(fraction) => fraction * rejected_cost,
            };
            let event = if eval.correct { RewardEvent::Correct } else { RewardEvent::Incorrect };
            return Ok(RoutingOutcome {
                query_id: query.id.clone(),
                final_agent: agent.id.clone(),
                correct: eval.correct,
                inference_cost: agent.cost,
                overhead_cost,
                total_cost: agent.cost + overhead_cost,
                reward: reward(event, &params),
                path,
                per_hop_decisions: decisions,
            });
        }
        debug_assert!(!is_fallback, "fallback hop must answer");
        rejected_cost = rejected_cost + agent.cost;
    }
    unreachable!("fallback agent always answers")
}

/// Route one query using recorded traces and per-agent policies.
pub fn route_one<S: Scalar>(
    query: &Query,
    pool: &Pool<S>,
    policies: &BTreeMap<AgentId, PolicyConfig<S>>,
    scenario: &Scenario<S>,
    traces: &TraceSet,
    config: &EngineConfig<S>,
) -> Result<RoutingOutcome<S>, EngineError> {
    let evaluator = TraceEvaluator { traces, policies };
    route_one_with(query, pool, &evaluator, scenario, config)
}

/// Route a batch sequentially, failing fast on the first error.
/// Outcomes are emitted in input order.
pub fn run_batch_with<S: Scalar, E: HopEvaluator<S> + ?Sized>(
    queries: &[Query],
    pool: &Pool<S>,
    evaluator: &E,
    scenario: &Scenario<S>,
    config: &EngineConfig<S>,
) -> Result<Vec<RoutingOutcome<S>>, EngineError> {
    queries
        .iter()
        .map(|query| route_one_with(query, pool, evaluator, scenario, config))
        .collect()
}

/// Trace-backed batch run; see [`run_batch_with`].
pub fn run_batch<S: Scalar>(
    queries: &[Query],
    pool: &Pool<S>,
    policies: &BTreeMap<AgentId, PolicyConfig<S>>,
    scenario: &Scenario<S>,
    traces: &TraceSet,
    config: &EngineConfig<S>,
) -> Result<Vec<RoutingOutcome<S>>, EngineError> {
    let evaluator = TraceEvaluator { traces, policies };
    run_batch_with(queries, pool, &evaluator, scenario, config)
}

/// Batch results with per-query errors collected instead of failing
/// fast; used for live backends where one transport failure should not
/// discard the rest of the batch.
#[derive(Debug)]
pub struct BatchReport<S = f64> {
    /// One entry per input query, in input order.
    pub results: Vec<Result<RoutingOutcome<S>, EngineError>>,
    /// True when at least one query failed.
    pub partial: bool,
}

/// Route a batch with up to `max_in_flight` queries evaluated
/// concurrently. Per-query seeding guarantees results identical to
/// sequential evaluation; outcomes are assembled in input order.
pub fn run_batch_concurrent<S: Scalar, E: HopEvaluator<S> + ?Sized>(
    queries: &[Query],
    pool: &Pool<S>,
    evaluator: &E,
    scenario: &Scenario<S>,
    config: &EngineConfig<S>,
    max_in_flight: usize,
) -> BatchReport<S> {
    let workers = max_in_flight.max(1).min(queries.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RoutingOutcome<S>, EngineError>>>> =
        Mutex::new((0..queries.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= queries.len() {
                    break;
                }
                let result = route_one_with(&queries[idx], pool, evaluator, scenario, config);
                slots.lock().expect("result slots lock")[idx] = Some(result);
            });
        }
    });

    let results: Vec<_> = slots
        .into_inner()
        .expect("result slots lock")
        .into_iter()
        .map(|slot| slot.expect("every query evaluated"))
        .collect();
    let partial = results.iter().any(Result::is_err);
    BatchReport { results, partial }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolEditError {
    #[error("removing all agents leaves an empty pool")]
    RemovesAll,
    #[error("agent '{0}' is not in the pool")]
    UnknownAgent(AgentId),
}

/// Remove agents from a pool and re-rank the remainder `1..K'`,
/// preserving cost order. Policies are keyed by agent id, so they carry
/// over untouched — no retraining step exists or is needed.
pub fn apply_pool_edit<S: Scalar>(
    pool: &Pool<S>,
    remove: &BTreeSet<AgentId>,
) -> Result<Pool<S>, PoolEditError> {
    for id in remove {
        if pool.agent(id).is_none() {
            return Err(PoolEditError::UnknownAgent(id.clone()));
        }
    }
    let mut agents: Vec<AgentSpec<S>> =
        pool.agents.iter().filter(|a| !remove.contains(&a.id)).cloned().collect();
    if agents.is_empty() {
        return Err(PoolEditError::RemovesAll);
    }
    for (i, agent) in agents.iter_mut().enumerate() {
        agent.rank = i + 1;
    }
    Ok(Pool { agents, entry_rank: 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CapabilityTrace;
    use crate::policy::CapabilitySource;

    fn reference_pool() -> Pool<f64> {
        Pool::from_costs([
            ("a1", 0.1),
            ("a2", 0.2),
            ("a3", 0.4),
            ("a4", 0.7),
            ("a5", 0.9),
        ])
    }

    /// Traces where agent `i` solves the query iff `capable[i]`.
    fn binary_traces(query: &str, capable: &[bool]) -> TraceSet {
        let mut set = TraceSet::new();
        for (i, &bit) in capable.iter().enumerate() {
            set.insert(CapabilityTrace::new(query, format!("a{}", i + 1), vec![bit; 10], bit))
                .unwrap();
        }
        set
    }

    fn greedy_policies(pool: &Pool<f64>) -> BTreeMap<AgentId, PolicyConfig<f64>> {
        pool.agents
            .iter()
            .map(|a| {
                (
                    a.id.clone(),
                    PolicyConfig { capability_source: CapabilitySource::Greedy, ..PolicyConfig::default() },
                )
            })
            .collect()
    }

    #[test]
    fn walks_to_first_capable_agent() {
        let pool = reference_pool();
        let traces = binary_traces("q", &[false, false, false, true, true]);
        let policies = greedy_policies(&pool);
        let outcome = route_one(
            &Query::bare("q"),
            &pool,
            &policies,
            &Scenario::balance(),
            &traces,
            &EngineConfig::default(),
        )
        .unwrap();
        let path: Vec<&str> = outcome.path.iter().map(AgentId::as_str).collect();
        assert_eq!(path, ["a1", "a2", "a3", "a4"]);
        assert_eq!(outcome.final_agent.as_str(), "a4");
        assert!(outcome.correct);
        assert_eq!(outcome.total_cost, 0.7);
        assert_eq!(outcome.reward, 1.0);
    }

    #[test]
    fn answers_immediately_when_capable() {
        let pool = reference_pool();
        let traces = binary_traces("q", &[true, true, true, true, true]);
        let outcome = route_one(
            &Query::bare("q"),
            &pool,
            &greedy_policies(&pool),
            &Scenario::balance(),
            &traces,
            &EngineConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.path.len(), 1);
        assert_eq!(outcome.total_cost, 0.1);
    }

    #[test]
    fn fallback_answers_even_when_incapable() {
        let pool = reference_pool();
        let traces = binary_traces("q", &[false; 5]);
        let outcome = route_one(
            &Query::bare("q"),
            &pool,
            &greedy_policies(&pool),
            &Scenario::balance(),
            &traces,
            &EngineConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.final_agent.as_str(), "a5");
        assert!(!outcome.correct);
        assert_eq!(outcome.reward, 0.0);
        assert_eq!(outcome.per_hop_decisions.last().unwrap().kind, DecisionKind::Answer);
    }

    #[test]
    fn cost_identity_without_overhead() {
        let pool = reference_pool();
        for capable_rank in 0..5 {
            let mut capable = [false; 5];
            capable[capable_rank..].iter_mut().for_each(|c| *c = true);
            let traces = binary_traces("q", &capable);
            let outcome = route_one(
                &Query::bare("q"),
                &pool,
                &greedy_policies(&pool),
                &Scenario::balance(),
                &traces,
                &EngineConfig::default(),
            )
            .unwrap();
            let final_cost = pool.agent(&outcome.final_agent).unwrap().cost;
            assert_eq!(outcome.total_cost, final_cost);
            assert_eq!(outcome.overhead_cost, 0.0);
        }
    }

    #[test]
    fn fractional_overhead_charges_rejections() {
        let pool = reference_pool();
        let traces = binary_traces("q", &[false, false, true, true, true]);
        let config = EngineConfig { overhead: OverheadMode::Fractional(0.05), ..Default::default() };
        let outcome = route_one(
            &Query::bare("q"),
            &pool,
            &greedy_policies(&pool),
            &Scenario::balance(),
            &traces,
            &config,
        )
        .unwrap();
        // Rejections at a1 (0.1) and a2 (0.2).
        assert!((outcome.overhead_cost - 0.05 * 0.3).abs() < 1e-15);
        assert!((outcome.total_cost - (0.4 + 0.015)).abs() < 1e-15);
    }

    #[test]
    fn path_ranks_strictly_increase_and_bounded() {
        let pool = reference_pool();
        let traces = binary_traces("q", &[false, true, false, true, true]);
        let outcome = route_one(
            &Query::bare("q"),
            &pool,
            &greedy_policies(&pool),
            &Scenario::balance(),
            &traces,
            &EngineConfig::default(),
        )
        .unwrap();
        assert!(outcome.path.len() <= pool.len());
        let ranks: Vec<usize> = outcome
            .path
            .iter()
            .map(|id| pool.agent(id).unwrap().rank)
            .collect();
        assert!(ranks.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(outcome.final_agent, *outcome.path.last().unwrap());
    }

    #[test]
    fn missing_trace_fails_fast_naming_pair() {
        let pool = reference_pool();
        let mut traces = binary_traces("q1", &[false; 5]);
        // q2 lacks a2's trace.
        traces
            .insert(CapabilityTrace::new("q2", "a1", vec![false; 10], false))
            .unwrap();
        let queries = [Query::bare("q1"), Query::bare("q2")];
        let err = run_batch(
            &queries,
            &pool,
            &greedy_policies(&pool),
            &Scenario::balance(),
            &traces,
            &EngineConfig::default(),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("q2") && msg.contains("a2"), "{msg}");
    }

    #[test]
    fn batch_is_order_independent_and_deterministic() {
        let pool = reference_pool();
        let mut traces = TraceSet::new();
        for q in 0..8 {
            for (i, agent) in ["a1", "a2", "a3", "a4", "a5"].iter().enumerate() {
                let k = (q + 3 * i) % 11;
                let samples = (0..10).map(|s| s < k).collect();
                traces
                    .insert(CapabilityTrace::new(format!("q{q}"), *agent, samples, k > 5))
                    .unwrap();
            }
        }
        let policies: BTreeMap<AgentId, PolicyConfig<f64>> = pool
            .agents
            .iter()
            .map(|a| {
                (
                    a.id.clone(),
                    PolicyConfig {
                        capability_source: CapabilitySource::BernoulliSample,
                        ..PolicyConfig::default()
                    },
                )
            })
            .collect();
        let scenario = Scenario::balance();
        let config = EngineConfig { seed: 11, ..Default::default() };
        let queries: Vec<Query> = (0..8).map(|q| Query::bare(format!("q{q}"))).collect();
        let forward = run_batch(&queries, &pool, &policies, &scenario, &traces, &config).unwrap();
        let again = run_batch(&queries, &pool, &policies, &scenario, &traces, &config).unwrap();
        assert_eq!(forward, again);

        let mut reversed_queries = queries.clone();
        reversed_queries.reverse();
        let mut reversed =
            run_batch(&reversed_queries, &pool, &policies, &scenario, &traces, &config).unwrap();
        reversed.reverse();
        assert_eq!(forward, reversed);

        // Duplicated query routes identically both times.
        let twice = [queries[0].clone(), queries[0].clone()];
        let outcomes = run_batch(&twice, &pool, &policies, &scenario, &traces, &config).unwrap();
        assert_eq!(outcomes[0], outcomes[1]);
    }

    #[test]
    fn empty_batch_is_empty() {
        let pool = reference_pool();
        let traces = TraceSet::new();
        let outcomes = run_batch(
            &[],
            &pool,
            &BTreeMap::new(),
            &Scenario::balance(),
            &traces,
            &EngineConfig::default(),
        )
        .unwrap();
        assert!(outcomes.is_empty());
    }

    #[test]
    fn concurrent_matches_sequential() {
        let pool = reference_pool();
        let mut traces = TraceSet::new();
        let queries: Vec<Query> = (0..20).map(|q| Query::bare(format!("q{q:02}"))).collect();
        for (qi, query) in queries.iter().enumerate() {
            for (i, agent) in ["a1", "a2", "a3", "a4", "a5"].iter().enumerate() {
                let capable = (qi + i) % 3 == 0;
                traces
                    .insert(CapabilityTrace::new(
                        query.id.as_str(),
                        *agent,
                        vec![capable; 10],
                        capable,
                    ))
                    .unwrap();
            }
        }
        let policies = greedy_policies(&pool);
        let evaluator = TraceEvaluator { traces: &traces, policies: &policies };
        let scenario = Scenario::balance();
        let config = EngineConfig::default();
        let sequential =
            run_batch_with(&queries, &pool, &evaluator, &scenario, &config).unwrap();
        let concurrent =
            run_batch_concurrent(&queries, &pool, &evaluator, &scenario, &config, 4);
        assert!(!concurrent.partial);
        let collected: Vec<RoutingOutcome<f64>> =
            concurrent.results.into_iter().map(Result::unwrap).collect();
        assert_eq!(sequential, collected);
    }

    #[test]
    fn final_cost_monotone_in_alpha_pointwise() {
        let pool = reference_pool();
        let mut traces = TraceSet::new();
        for q in 0..30 {
            for (i, agent) in ["a1", "a2", "a3", "a4", "a5"].iter().enumerate() {
                let k = ((q * 7 + i * 13) % 11).min(10);
                let samples = (0..10).map(|s| s < k).collect();
                traces
                    .insert(CapabilityTrace::new(format!("q{q:02}"), *agent, samples, k > 5))
                    .unwrap();
            }
        }
        let policies: BTreeMap<AgentId, PolicyConfig<f64>> =
            pool.agents.iter().map(|a| (a.id.clone(), PolicyConfig::default())).collect();
        let queries: Vec<Query> = (0..30).map(|q| Query::bare(format!("q{q:02}"))).collect();
        let config = EngineConfig::default();
        let mut previous: Option<Vec<f64>> = None;
        for alpha in [0.2, 0.5, 0.8] {
            let scenario = Scenario::from_alpha(alpha, 0.5);
            let outcomes =
                run_batch(&queries, &pool, &policies, &scenario, &traces, &config).unwrap();
            let costs: Vec<f64> = outcomes.iter().map(|o| o.total_cost).collect();
            if let Some(prev) = &previous {
                for (c_hi_alpha, c_lo_alpha) in costs.iter().zip(prev) {
                    assert!(c_hi_alpha <= c_lo_alpha);
                }
            }
            previous = Some(costs);
        }
    }

    #[test]
    fn matches_oracle_for_every_capability_vector() {
        use crate::eval::oracle_route;
        let costs = [0.1, 0.2, 0.4, 0.7, 0.9];
        for k in 1..=5usize {
            let pool =
                Pool::from_costs((0..k).map(|i| (format!("a{}", i + 1), costs[i])));
            for vector in 0..(1u32 << k) {
                let capable: Vec<bool> = (0..k).map(|i| vector >> i & 1 == 1).collect();
                let traces = binary_traces("q", &capable);
                let outcome = route_one(
                    &Query::bare("q"),
                    &pool,
                    &greedy_policies(&pool),
                    &Scenario::balance(),
                    &traces,
                    &EngineConfig::default(),
                )
                .unwrap();
                if capable.iter().any(|&c| c) {
                    let oracle = oracle_route(&outcome.query_id, &pool, &traces).unwrap();
                    assert_eq!(outcome.final_agent, oracle, "k={k} vector={vector:b}");
                }
            }
        }
    }

    #[test]
    fn whole_pipeline_runs_in_f32() {
        let pool: Pool<f32> = Pool::from_costs([("a1", 0.1f32), ("a2", 0.9f32)]);
        let mut traces = TraceSet::new();
        traces.insert(CapabilityTrace::new("q", "a1", vec![true; 8], true)).unwrap();
        traces.insert(CapabilityTrace::new("q", "a2", vec![true; 8], true)).unwrap();
        let policies: BTreeMap<AgentId, PolicyConfig<f32>> =
            pool.agents.iter().map(|a| (a.id.clone(), PolicyConfig::default())).collect();
        let scenario = crate::model::Scenario::<f32>::balance();
        let outcome = route_one(
            &Query::bare("q"),
            &pool,
            &policies,
            &scenario,
            &traces,
            &EngineConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.final_agent.as_str(), "a1");
        assert_eq!(outcome.total_cost, 0.1f32);
        assert_eq!(outcome.reward, 1.0f32);
    }

    #[test]
    fn pool_edit_reranks_and_preserves_costs() {
        let pool = Pool::from_costs([
            ("m-0.5b", 0.1),
            ("m-1.5b", 0.2),
            ("m-3b", 0.4),
            ("m-7b", 0.7),
            ("m-14b", 0.9),
        ]);
        let remove: BTreeSet<AgentId> =
            [AgentId::from("m-0.5b"), AgentId::from("m-7b")].into_iter().collect();
        let edited = apply_pool_edit(&pool, &remove).unwrap();
        let costs: Vec<f64> = edited.agents.iter().map(|a| a.cost).collect();
        assert_eq!(costs, [0.2, 0.4, 0.9]);
        let ranks: Vec<usize> = edited.agents.iter().map(|a| a.rank).collect();
        assert_eq!(ranks, [1, 2, 3]);
        assert!(crate::model::validate_pool(&edited).is_empty());

        assert_eq!(apply_pool_edit(&pool, &BTreeSet::new()).unwrap(), pool);

        let all: BTreeSet<AgentId> = pool.agents.iter().map(|a| a.id.clone()).collect();
        assert_eq!(apply_pool_edit(&pool, &all).unwrap_err(), PoolEditError::RemovesAll);

        let unknown: BTreeSet<AgentId> = [AgentId::from("nope")].into_iter().collect();
        assert!(matches!(
            apply_pool_edit(&pool, &unknown).unwrap_err(),
            PoolEditError::UnknownAgent(_)
        ));
    }

    #[test]
    fn pool_edit_keeps_untouched_paths_identical() {
        let pool = reference_pool();
        // Query solved by a2: full-pool path [a1, a2] never visits a4/a5.
        let traces = binary_traces("q", &[false, true, true, true, true]);
        let policies = greedy_policies(&pool);
        let scenario = Scenario::balance();
        let config = EngineConfig::default();
        let full = route_one(&Query::bare("q"), &pool, &policies, &scenario, &traces, &config)
            .unwrap();
        let remove: BTreeSet<AgentId> =
            [AgentId::from("a4")].into_iter().collect();
        let edited = apply_pool_edit(&pool, &remove).unwrap();
        let reduced =
            route_one(&Query::bare("q"), &edited, &policies, &scenario, &traces, &config).unwrap();
        assert_eq!(full, reduced);
    }

    #[test]
    fn single_agent_pool_answers_everything() {
        let pool = Pool::from_costs([("solo", 0.9)]);
        let mut traces = TraceSet::new();
        traces.insert(CapabilityTrace::new("q", "solo", vec![false; 10], false)).unwrap();
        let policies = greedy_policies(&pool);
        let outcome = route_one(
            &Query::bare("q"),
            &pool,
            &policies,
            &Scenario::performance_first(),
            &traces,
            &EngineConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.final_agent.as_str(), "solo");
        assert_eq!(outcome.path.len(), 1);
    }

    #[test]
    fn entry_rank_override_skips_prefix() {
        let pool = reference_pool();
        let traces = binary_traces("q", &[true; 5]);
        let config = EngineConfig { entry_rank: Some(3), ..Default::default() };
        let outcome = route_one(
            &Query::bare("q"),
            &pool,
            &greedy_policies(&pool),
            &Scenario::balance(),
            &traces,
            &config,
        )
        .unwrap();
        assert_eq!(outcome.path[0].as_str(), "a3");

        let bad = EngineConfig { entry_rank: Some(9), ..Default::default() };
        assert!(matches!(
            route_one(
                &Query::bare("q"),
                &pool,
                &greedy_policies(&pool),
                &Scenario::balance(),
                &traces,
                &bad,
            ),
            Err(EngineError::EntryRank { entry: 9, k: 5 })
        ));
    }

    #[test]
    fn overhead_mode_parsing() {
        assert_eq!(OverheadMode::<f64>::parse("none").unwrap(), OverheadMode::None);
        assert_eq!(
            OverheadMode::<f64>::parse("fractional").unwrap(),
            OverheadMode::Fractional(0.05)
        );
        assert_eq!(
            OverheadMode::<f64>::parse("fractional:0.08").unwrap(),
            OverheadMode::Fractional(0.08)
        );
        assert!(OverheadMode::<f64>::parse("fractional:1.5").is_err());
        assert!(OverheadMode::<f64>::parse("bogus").is_err());
    }
}
