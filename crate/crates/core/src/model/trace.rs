use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::agent::AgentId;
use super::query::QueryId;
use crate::scalar::{real, Scalar};

/// Exact success frequency `correct / total` as an integer pair.
///
/// Stored without float conversion so threshold comparisons in the
/// labeling rule can be evaluated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frequency {
    pub correct: u32,
    pub total: u32,
}

impl Frequency {
    /// The frequency as a scalar in `[0, 1]`.
    pub fn value<S: Scalar>(self) -> S {
        real::<S>(f64::from(self.correct)) / real::<S>(f64::from(self.total))
    }

    /// Laplace-style smoothed estimate `(correct + k_plus) / (total + n_plus)`,
    /// clamped to `[0, 1]`.
    pub fn smoothed<S: Scalar>(self, k_plus: u32, n_plus: u32) -> S {
        let num = real::<S>(f64::from(self.correct) + f64::from(k_plus));
        let den = real::<S>(f64::from(self.total) + f64::from(n_plus));
        (num / den).min(S::one()).max(S::zero())
    }
}

/// Recorded correctness of one agent on one query: `n >= 1` boolean
/// samples plus the deterministic greedy-decoding bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityTrace {
    pub query_id: QueryId,
    pub agent_id: AgentId,
    pub samples: Vec<bool>,
    pub greedy_correct: bool,
}

impl CapabilityTrace {
    pub fn new(
        query_id: impl Into<String>,
        agent_id: impl Into<String>,
        samples: Vec<bool>,
        greedy_correct: bool,
    ) -> Self {
        Self {
            query_id: QueryId::new(query_id),
            agent_id: AgentId::new(agent_id),
            samples,
            greedy_correct,
        }
    }

    pub fn frequency(&self) -> Frequency {
        let correct = self.samples.iter().filter(|&&s| s).count() as u32;
        Frequency { correct, total: self.samples.len() as u32 }
    }
}

/// Trace schema v1: one JSON record per line.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceRecord {
    query_id: String,
    agent_id: String,
    samples: Vec<u8>,
    greedy: u8,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate trace for query '{query_id}' agent '{agent_id}'{}", at_line(.line))]
    Duplicate { line: Option<usize>, query_id: QueryId, agent_id: AgentId },
    #[error("empty sample list for query '{query_id}' agent '{agent_id}'{}", at_line(.line))]
    EmptySamples { line: Option<usize>, query_id: QueryId, agent_id: AgentId },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn at_line(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(" at line {n}"),
        None => String::new(),
    }
}

/// A set of capability traces keyed by `(query, agent)`.
///
/// Iteration is in canonical `(query_id, agent_id)` order; `queries()`
/// additionally remembers first-appearance order so replay runs preserve
/// the dataset's ordering. Equality ignores insertion order.
#[derive(Debug, Clone, Default)]
pub struct TraceSet {
    map: BTreeMap<(QueryId, AgentId), CapabilityTrace>,
    query_order: Vec<QueryId>,
}

impl PartialEq for TraceSet {
    fn eq(&self, other: &Self) -> bool {
        self.map == other.map
    }
}

impl TraceSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a trace; duplicate `(query, agent)` pairs and empty sample
    /// lists are rejected.
    pub fn insert(&mut self, trace: CapabilityTrace) -> Result<(), TraceError> {
        self.insert_at(trace, None)
    }

    fn insert_at(&mut self, trace: CapabilityTrace, line: Option<usize>) -> Result<(), TraceError> {
        if trace.samples.is_empty() {
            return Err(TraceError::EmptySamples {
                line,
                query_id: trace.query_id,
                agent_id: trace.agent_id,
            });
        }
        let key = (trace.query_id.clone(), trace.agent_id.clone());
        if self.map.contains_key(&key) {
            return Err(TraceError::Duplicate { line, query_id: key.0, agent_id: key.1 });
        }
        if !self.query_order.contains(&key.0) {
            self.query_order.push(key.0.clone());
        }
        self.map.insert(key, trace);
        Ok(())
    }

    pub fn get(&self, query_id: &QueryId, agent_id: &AgentId) -> Option<&CapabilityTrace> {
        self.map.get(&(query_id.clone(), agent_id.clone()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Canonical `(query_id, agent_id)` iteration order.
    pub fn iter(&self) -> impl Iterator<Item = &CapabilityTrace> {
        self.map.values()
    }

    /// Query ids in first-appearance order.
    pub fn queries(&self) -> &[QueryId] {
        &self.query_order
    }

    /// All agent ids referenced by the set.
    pub fn agent_ids(&self) -> BTreeSet<AgentId> {
        self.map.keys().map(|(_, a)| a.clone()).collect()
    }

    pub fn traces_for_agent<'a>(
        &'a self,
        agent_id: &'a AgentId,
    ) -> impl Iterator<Item = &'a CapabilityTrace> {
        self.map.values().filter(move |t| &t.agent_id == agent_id)
    }

    /// The subset of traces belonging to one agent.
    pub fn filter_agent(&self, agent_id: &AgentId) -> TraceSet {
        let mut out = TraceSet::new();
        for trace in self.traces_for_agent(agent_id) {
            out.insert(trace.clone()).expect("filtered subset cannot collide");
        }
        out
    }

    /// Parse trace schema v1 from a line-delimited reader. Fails on the
    /// first malformed line, duplicate key, or empty sample list.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, TraceError> {
        let mut set = TraceSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord = serde_json::from_str(&line)
                .map_err(|e| TraceError::Malformed { line: line_no, reason: e.to_string() })?;
            let mut samples = Vec::with_capacity(record.samples.len());
            for bit in &record.samples {
                match bit {
                    0 => samples.push(false),
                    1 => samples.push(true),
                    other => {
                        return Err(TraceError::Malformed {
                            line: line_no,
                            reason: format!("sample value {other} is not 0 or 1"),
                        })
                    }
                }
            }
            let greedy_correct = match record.greedy {
                0 => false,
                1 => true,
                other => {
                    return Err(TraceError::Malformed {
                        line: line_no,
                        reason: format!("greedy value {other} is not 0 or 1"),
                    })
                }
            };
            set.insert_at(
                CapabilityTrace::new(record.query_id, record.agent_id, samples, greedy_correct),
                Some(line_no),
            )?;
        }
        Ok(set)
    }

    /// Write the canonical form: records sorted by `(query_id, agent_id)`,
    /// one per line. Reloading the output yields an identical set.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> io::Result<()> {
        for trace in self.map.values() {
            let record = TraceRecord {
                query_id: trace.query_id.as_str().to_owned(),
                agent_id: trace.agent_id.as_str().to_owned(),
                samples: trace.samples.iter().map(|&s| u8::from(s)).collect(),
                greedy: u8::from(trace.greedy_correct),
            };
            let json = serde_json::to_string(&record).expect("trace record serializes");
            writeln!(writer, "{json}")?;
        }
        Ok(())
    }
}

impl FromIterator<CapabilityTrace> for Result<TraceSet, TraceError> {
    fn from_iter<I: IntoIterator<Item = CapabilityTrace>>(iter: I) -> Self {
        let mut set = TraceSet::new();
        for trace in iter {
            set.insert(trace)?;
        }
        Ok(set)
    }
}
