use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Unique agent identifier within a pool.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Which backend supplies an agent's capability estimates and answers.
///
/// The marker only names the backend; connection details for `Live`
/// agents are wired up from configuration by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Trace,
    Synthetic,
    Live,
}

/// One pool member: identity, normalized cost, and 1-based position in
/// the cost ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec<S = f64> {
    pub id: AgentId,
    /// Normalized inference cost in `[0, 1]`.
    pub cost: S,
    /// 1-based rank; rank 1 is the cheapest agent.
    pub rank: usize,
    pub backend: BackendKind,
}

impl<S: Scalar> AgentSpec<S> {
    pub fn new(id: impl Into<String>, cost: S, rank: usize) -> Self {
        Self { id: AgentId::new(id), cost, rank, backend: BackendKind::Trace }
    }
}

/// An ordered pool of agents. The last agent is the designated fallback
/// and always answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool<S = f64> {
    pub agents: Vec<AgentSpec<S>>,
    /// Rank at which queries enter the cascade (default 1).
    pub entry_rank: usize,
}

impl<S: Scalar> Pool<S> {
    pub fn new(agents: Vec<AgentSpec<S>>) -> Self {
        Self { agents, entry_rank: 1 }
    }

    /// Build a pool from `(id, cost)` pairs, ranking them in the given order.
    pub fn from_costs<I, T>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (T, S)>,
        T: Into<String>,
    {
        let agents = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (id, cost))| AgentSpec::new(id, cost, i + 1))
            .collect();
        Self::new(agents)
    }

    /// Number of agents `K`.
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agent_by_rank(&self, rank: usize) -> Option<&AgentSpec<S>> {
        self.agents.iter().find(|a| a.rank == rank)
    }

    pub fn agent(&self, id: &AgentId) -> Option<&AgentSpec<S>> {
        self.agents.iter().find(|a| &a.id == id)
    }

    /// The expert of last resort: the highest-rank agent.
    pub fn fallback(&self) -> Option<&AgentSpec<S>> {
        self.agents.iter().max_by_key(|a| a.rank)
    }
}

/// Routing layout over a pool. Only `Cascade` has executable semantics:
/// every agent forwards to the next rank. `Custom` reserves a
/// successor-set representation so tree- or mesh-shaped layouts can be
/// stored and inspected, but no engine executes them.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    Cascade,
    Custom { successors: std::collections::BTreeMap<AgentId, std::collections::BTreeSet<AgentId>> },
}

impl Topology {
    /// Successors of `agent` under this layout: the next-ranked agent
    /// for the cascade, the stored set otherwise.
    pub fn successors<S: Scalar>(
        &self,
        pool: &Pool<S>,
        agent: &AgentId,
    ) -> std::collections::BTreeSet<AgentId> {
        match self {
            Topology::Cascade => pool
                .agent(agent)
                .and_then(|a| pool.agent_by_rank(a.rank + 1))
                .map(|next| std::iter::once(next.id.clone()).collect())
                .unwrap_or_default(),
            Topology::Custom { successors } => {
                successors.get(agent).cloned().unwrap_or_default()
            }
        }
    }
}

/// A broken pool invariant. Validation never aborts; callers decide what
/// to do with the list.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolViolation {
    #[error("pool is empty")]
    Empty,
    #[error("agent '{agent}': cost {cost} outside [0, 1]")]
    CostOutOfRange { agent: AgentId, cost: String },
    #[error("agent '{agent}': rank {found} out of order, expected {expected}")]
    RankSequence { agent: AgentId, expected: usize, found: usize },
    #[error("agent '{agent}': cost {cost} does not strictly increase over '{prev}'")]
    NonStrictCostOrder { agent: AgentId, prev: AgentId, cost: String },
    #[error("agent '{agent}': duplicate id")]
    DuplicateId { agent: AgentId },
    #[error("entry rank {entry_rank} outside [1, {pool_size}]")]
    EntryRankOutOfRange { entry_rank: usize, pool_size: usize },
}

/// Check every pool invariant and return the violations found.
///
/// Cost ties are rejected rather than broken arbitrarily, so a valid pool
/// always yields one deterministic cascade order.
pub fn validate_pool<S: Scalar>(pool: &Pool<S>) -> Vec<PoolViolation> {
    let mut violations = Vec::new();
    if pool.agents.is_empty() {
        violations.push(PoolViolation::Empty);
        return violations;
    }

    let mut seen = std::collections::BTreeSet::new();
    for (i, agent) in pool.agents.iter().enumerate() {
        if !(agent.cost >= S::zero() && agent.cost <= S::one()) {
            violations.push(PoolViolation::CostOutOfRange {
                agent: agent.id.clone(),
                cost: agent.cost.to_string(),
            });
        }
        if agent.rank != i + 1 {
            violations.push(PoolViolation::RankSequence {
                agent: agent.id.clone(),
                expected: i + 1,
                found: agent.rank,
            });
        }
        if !seen.insert(agent.id.clone()) {
            violations.push(PoolViolation::DuplicateId { agent: agent.id.clone() });
        }
        if i > 0 {
            let prev = &pool.agents[i - 1];
            if !(agent.cost > prev.cost) {
                violations.push(PoolViolation::NonStrictCostOrder {
                    agent: agent.id.clone(),
                    prev: prev.id.clone(),
                    cost: agent.cost.to_string(),
                });
            }
        }
    }

    if pool.entry_rank < 1 || pool.entry_rank > pool.agents.len() {
        violations.push(PoolViolation::EntryRankOutOfRange {
            entry_rank: pool.entry_rank,
            pool_size: pool.agents.len(),
        });
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_pool() -> Pool<f64> {
        Pool::from_costs([
            ("m-0.5b", 0.1),
            ("m-1.5b", 0.2),
            ("m-3b", 0.4),
            ("m-7b", 0.7),
            ("m-14b", 0.9),
        ])
    }

    #[test]
    fn valid_pool_has_no_violations() {
        assert!(validate_pool(&reference_pool()).is_empty());
    }

    #[test]
    fn single_agent_pool_is_valid() {
        let pool = Pool::from_costs([("solo", 0.5)]);
        assert!(validate_pool(&pool).is_empty());
        assert_eq!(pool.fallback().unwrap().id.as_str(), "solo");
    }

    #[test]
    fn cost_tie_is_one_violation() {
        let pool = Pool::from_costs([("a", 0.2), ("b", 0.2)]);
        let violations = validate_pool(&pool);
        assert_eq!(violations.len(), 1);
        assert!(matches!(violations[0], PoolViolation::NonStrictCostOrder { .. }));
    }

    #[test]
    fn decreasing_cost_is_flagged() {
        let pool = Pool::from_costs([("a", 0.5), ("b", 0.3)]);
        assert_eq!(validate_pool(&pool).len(), 1);
    }

    #[test]
    fn cost_out_of_range_names_agent() {
        let pool = Pool::from_costs([("a", 0.5), ("b", 1.2)]);
        let violations = validate_pool(&pool);
        assert!(violations
            .iter()
            .any(|v| matches!(v, PoolViolation::CostOutOfRange { agent, .. } if agent.as_str() == "b")));
    }

    #[test]
    fn bad_rank_sequence_is_flagged() {
        let mut pool = reference_pool();
        pool.agents[2].rank = 7;
        let violations = validate_pool(&pool);
        assert!(violations.iter().any(|v| matches!(v, PoolViolation::RankSequence { .. })));
    }

    #[test]
    fn duplicate_id_is_flagged() {
        let pool = Pool::from_costs([("a", 0.1), ("a", 0.2)]);
        let violations = validate_pool(&pool);
        assert!(violations.iter().any(|v| matches!(v, PoolViolation::DuplicateId { .. })));
    }

    #[test]
    fn entry_rank_out_of_range() {
        let mut pool = reference_pool();
        pool.entry_rank = 6;
        let violations = validate_pool(&pool);
        assert!(violations
            .iter()
            .any(|v| matches!(v, PoolViolation::EntryRankOutOfRange { .. })));
    }

    #[test]
    fn empty_pool_short_circuits() {
        let pool: Pool<f64> = Pool::new(vec![]);
        assert_eq!(validate_pool(&pool), vec![PoolViolation::Empty]);
    }

    #[test]
    fn cascade_topology_successors_are_next_rank() {
        let pool = reference_pool();
        let topology = Topology::default();
        let next = topology.successors(&pool, &AgentId::from("m-1.5b"));
        assert_eq!(next.into_iter().collect::<Vec<_>>(), vec![AgentId::from("m-3b")]);
        assert!(topology.successors(&pool, &AgentId::from("m-14b")).is_empty());

        let mut successors = std::collections::BTreeMap::new();
        successors.insert(
            AgentId::from("m-0.5b"),
            [AgentId::from("m-3b"), AgentId::from("m-14b")].into_iter().collect(),
        );
        let custom = Topology::Custom { successors };
        assert_eq!(custom.successors(&pool, &AgentId::from("m-0.5b")).len(), 2);
    }
}
