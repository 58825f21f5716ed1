//! Domain types, file schemas, and validation shared by every other module.
//!
//! Types here are immutable after construction and safe to share across
//! threads without synchronization.

mod agent;
mod config;
mod outcome;
mod query;
mod report;
mod scenario;
mod trace;

pub use agent::{validate_pool, AgentId, AgentSpec, BackendKind, Pool, PoolViolation, Topology};
pub use config::{
    BaselinesSection, ConfigError, DifficultySection, EngineSection, LiveSection, PolicySection,
    PoolEntryConfig, RunConfig, ScenarioConfig, SyntheticSection,
};
pub use outcome::{write_outcomes_jsonl, DecisionKind, RoutingDecision, RoutingOutcome};
pub use query::{read_queries_jsonl, Query, QueryFileError, QueryId};
pub use report::{ClassificationMetrics, EasyHardCosts, EvalReport};
pub use scenario::{Scenario, ScenarioIssue, ScenarioName, Severity};
pub use trace::{CapabilityTrace, Frequency, TraceError, TraceSet};
