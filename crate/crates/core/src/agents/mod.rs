//! Interchangeable capability backends.
//!
//! - recorded traces (see [`crate::engine::TraceEvaluator`]),
//! - a calibrated synthetic pool ([`generate_synthetic`]),
//! - a live chat-completions endpoint with rejection-sentinel detection
//!   ([`LiveClient`]).
//!
//! [`DispatchEvaluator`] routes each hop to the backend named by the
//! agent's spec, so trace-backed and live agents can share one pool.

mod live;
mod synthetic;

pub use live::{live_query, LiveAgentSpec, LiveClient, LiveError, LiveReply};
pub use synthetic::{
    calibrate_skills, generate_synthetic, mean_capability, CalibrationError,
    DifficultyDistribution, SyntheticData, SyntheticError, SyntheticPoolSpec,
};

use std::collections::BTreeMap;

use crate::engine::{HopError, HopEval, HopEvaluator, TraceEvaluator};
use crate::model::{
    AgentId, AgentSpec, BackendKind, DecisionKind, Query, RoutingDecision, Scenario, TraceSet,
};
use crate::policy::{reject_threshold, RewardParams};
use crate::scalar::Scalar;

/// Per-hop evaluator that dispatches on each agent's backend kind:
/// trace/synthetic agents are scored from recorded traces, live agents
/// over HTTP. When a trace exists for a live agent it supplies the
/// realized correctness bit; otherwise live answers score as incorrect,
/// since judging live responses is out of scope.
pub struct DispatchEvaluator<'a, S: Scalar = f64> {
    pub trace_evaluator: TraceEvaluator<'a, S>,
    pub live_clients: BTreeMap<AgentId, LiveClient>,
}

impl<S: Scalar> HopEvaluator<S> for DispatchEvaluator<'_, S> {
    fn evaluate_hop(
        &self,
        query: &Query,
        agent: &AgentSpec<S>,
        is_fallback: bool,
        scenario: &Scenario<S>,
        run_seed: u64,
    ) -> Result<HopEval<S>, HopError> {
        match agent.backend {
            BackendKind::Trace | BackendKind::Synthetic => {
                self.trace_evaluator.evaluate_hop(query, agent, is_fallback, scenario, run_seed)
            }
            BackendKind::Live => {
                let client =
                    self.live_clients.get(&agent.id).ok_or(HopError::NotConfigured)?;
                let reply = client.query(query, scenario).map_err(HopError::from)?;
                let kind = if is_fallback { DecisionKind::Answer } else { reply.decision };
                // The agent decided internally; record a degenerate
                // self-report consistent with the decision.
                let estimated = match kind {
                    DecisionKind::Answer => S::one(),
                    DecisionKind::Reject => S::zero(),
                };
                let decision = RoutingDecision {
                    kind,
                    estimated_capability: estimated,
                    threshold: reject_threshold(&RewardParams::from_scenario(scenario)),
                };
                let correct = self
                    .trace_evaluator
                    .traces
                    .get(&query.id, &agent.id)
                    .map(|t| t.greedy_correct)
                    .unwrap_or(false);
                Ok(HopEval { decision, correct })
            }
        }
    }
}

impl<'a, S: Scalar> DispatchEvaluator<'a, S> {
    pub fn new(
        traces: &'a TraceSet,
        policies: &'a BTreeMap<AgentId, crate::policy::PolicyConfig<S>>,
        live_clients: BTreeMap<AgentId, LiveClient>,
    ) -> Self {
        Self { trace_evaluator: TraceEvaluator { traces, policies }, live_clients }
    }
}
