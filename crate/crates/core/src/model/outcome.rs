use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::agent::AgentId;
use super::query::QueryId;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Answer,
    Reject,
}

/// One agent's answer-or-reject decision for one query.
///
/// Outside the fallback agent (and the `always_answer` policy, which
/// ignores its estimate), `kind` is `Answer` exactly when
/// `estimated_capability > threshold`, strictly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision<S = f64> {
    pub kind: DecisionKind,
    pub estimated_capability: S,
    pub threshold: S,
}

/// The realized routing of one query through the cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingOutcome<S = f64> {
    pub query_id: QueryId,
    /// Visited agents in order; ranks strictly increase.
    pub path: Vec<AgentId>,
    /// Always the last element of `path`.
    pub final_agent: AgentId,
    pub correct: bool,
    /// Cost of the answering agent.
    pub inference_cost: S,
    /// Extra cost charged for rejections along the path; zero when the
    /// overhead model is disabled.
    pub overhead_cost: S,
    pub total_cost: S,
    /// Scenario-conditioned reward of the answering hop.
    pub reward: S,
    pub per_hop_decisions: Vec<RoutingDecision<S>>,
}

impl<S: Scalar> RoutingOutcome<S> {
    /// Whether `agent` saw this query.
    pub fn reached(&self, agent: &AgentId) -> bool {
        self.path.iter().any(|a| a == agent)
    }
}

/// Write outcomes as one JSON record per line, mirroring
/// [`RoutingOutcome`] field-for-field.
pub fn write_outcomes_jsonl<S: Scalar + Serialize, W: Write>(
    outcomes: &[RoutingOutcome<S>],
    mut writer: W,
) -> io::Result<()> {
    for outcome in outcomes {
        let json = serde_json::to_string(outcome).expect("outcome serializes");
        writeln!(writer, "{json}")?;
    }
    Ok(())
}
