use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unique query identifier within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub String);

impl QueryId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QueryId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// One routable query.
///
/// `payload` is only required by the live backend; trace and synthetic
/// runs identify queries by id alone. `tags` carries free-form metadata
/// such as a dataset name or a difficulty label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: QueryId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

impl Query {
    /// A query with no payload and no tags.
    pub fn bare(id: impl Into<String>) -> Self {
        Self { id: QueryId::new(id), payload: None, tags: BTreeMap::new() }
    }

    pub fn with_payload(id: impl Into<String>, payload: impl Into<String>) -> Self {
        Self { id: QueryId::new(id), payload: Some(payload.into()), tags: BTreeMap::new() }
    }
}

#[derive(Debug, Error)]
pub enum QueryFileError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate query id '{id}' at line {line}")]
    DuplicateId { line: usize, id: QueryId },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parse a query dataset: one JSON record per line with fields `id`,
/// optional `payload`, optional `tags`. Order is preserved; ids must be
/// unique.
pub fn read_queries_jsonl<R: BufRead>(reader: R) -> Result<Vec<Query>, QueryFileError> {
    let mut queries = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let query: Query = serde_json::from_str(&line)
            .map_err(|e| QueryFileError::Malformed { line: line_no, reason: e.to_string() })?;
        if !seen.insert(query.id.clone()) {
            return Err(QueryFileError::DuplicateId { line: line_no, id: query.id });
        }
        queries.push(query);
    }
    Ok(queries)
}
