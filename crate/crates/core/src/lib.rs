//! Cost-ordered cascade routing with self-assessing agents.
//!
//! A pool of agents is ordered by increasing cost. A query enters at the
//! cheapest agent; each agent estimates its own chance of answering
//! correctly and either answers or rejects and forwards the query to the
//! next agent. The most expensive agent always answers, so every query
//! terminates. Policies are scored by `utility = performance - alpha * cost`,
//! where `alpha` weights cost against accuracy.
//!
//! The crate is organized around the run pipeline:
//!
//! - [`model`] — domain types, the line-delimited trace schema, pool and
//!   scenario validation, run configuration.
//! - [`policy`] — the answer/reject decision rule, scenario-conditioned
//!   rewards, capability estimation, and supervised label construction.
//! - [`engine`] — executes the cascade over a batch of queries and emits
//!   [`model::RoutingOutcome`] records.
//! - [`agents`] — capability backends: recorded traces, a calibrated
//!   synthetic pool, and a live chat-completions endpoint.
//! - [`eval`] — aggregate metrics, baselines (oracle, smallest, largest,
//!   random, external threshold), and analysis helpers.
//!
//! All decision math is generic over [`scalar::Scalar`] (any `num-traits`
//! float), so the same code runs in `f32` or `f64`. The [`Real`] alias pins
//! the precision used by the CLI and the file formats; every generic type
//! defaults its scalar parameter to [`Real`].

pub mod agents;
pub mod engine;
pub mod eval;
pub mod model;
pub mod policy;
pub mod rng;
pub mod scalar;

/// Working precision of the CLI and all file formats.
pub type Real = f64;

/// [`model::Pool`] at the default precision.
pub type Pool = model::Pool<Real>;
/// [`model::Scenario`] at the default precision.
pub type Scenario = model::Scenario<Real>;
/// [`model::RoutingOutcome`] at the default precision.
pub type RoutingOutcome = model::RoutingOutcome<Real>;
/// [`model::EvalReport`] at the default precision.
pub type EvalReport = model::EvalReport<Real>;

pub use scalar::Scalar;
