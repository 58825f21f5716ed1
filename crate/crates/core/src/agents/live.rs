//! Live agent backend over a chat-completions-style HTTP endpoint.
//!
//! The request prepends the scenario instruction to the query payload
//! and pins temperature to 0 so routing decisions are reproducible. The
//! reply's decision is derived purely from the rejection sentinel: a
//! response whose trimmed text starts with the configured prefix counts
//! as a rejection. Correctness of live answers is never interpreted
//! here; the decision and text are recorded verbatim.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::engine::HopError;
use crate::model::{DecisionKind, LiveSection, Query, Scenario};
use crate::scalar::Scalar;

/// Connection settings for one live agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveAgentSpec {
    pub endpoint_url: String,
    pub model_name: String,
    pub timeout_ms: u64,
    /// Case-sensitive prefix matched against the trimmed response text.
    pub reject_prefix: String,
    pub max_in_flight: usize,
    /// Name of the environment variable holding the bearer token, if
    /// any. The token is read per request and never stored or logged.
    pub auth_env: Option<String>,
}

impl LiveAgentSpec {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            timeout_ms: 30_000,
            reject_prefix: "I don't know".to_owned(),
            max_in_flight: 8,
            auth_env: None,
        }
    }

    pub fn from_section(section: &LiveSection) -> Self {
        Self {
            endpoint_url: section.endpoint_url.clone(),
            model_name: section.model_name.clone(),
            timeout_ms: section.timeout_ms,
            reject_prefix: section.reject_prefix.clone(),
            max_in_flight: section.max_in_flight,
            auth_env: section.auth_env.clone(),
        }
    }
}

/// One live exchange: the decision, the verbatim response text, and the
/// observed latency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiveReply {
    pub decision: DecisionKind,
    pub response_text: String,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum LiveError {
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

impl From<LiveError> for HopError {
    fn from(err: LiveError) -> Self {
        match err {
            LiveError::MissingPayload => HopError::MissingPayload,
            LiveError::Timeout(ms) => HopError::Timeout(ms),
            LiveError::Transport(msg) => HopError::Transport(msg),
            LiveError::Status(code) => HopError::Status(code),
            LiveError::Malformed(msg) => HopError::Malformed(msg),
        }
    }
}

/// Reusable HTTP client for one live agent.
pub struct LiveClient {
    spec: LiveAgentSpec,
    http: reqwest::blocking::Client,
}

impl LiveClient {
    pub fn new(spec: LiveAgentSpec) -> Result<Self, LiveError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(spec.timeout_ms))
            .build()
            .map_err(|e| LiveError::Transport(e.to_string()))?;
        Ok(Self { spec, http })
    }

    pub fn spec(&self) -> &LiveAgentSpec {
        &self.spec
    }

    /// POST one chat-completion request and classify the reply.
    pub fn query<S: Scalar>(
        &self,
        query: &Query,
        scenario: &Scenario<S>,
    ) -> Result<LiveReply, LiveError> {
        let payload = query.payload.as_deref().ok_or(LiveError::MissingPayload)?;
        let instruction = scenario.instruction_text();
        let content = if instruction.is_empty() {
            payload.to_owned()
        } else {
            format!("{instruction}\n{payload}")
        };
        let body = json!({
            "model": self.spec.model_name,
            "messages": [{"role": "user", "content": content}],
            "temperature": 0,
        });

        let mut request = self.http.post(&self.spec.endpoint_url).json(&body);
        if let Some(var) = &self.spec.auth_env {
            if let Ok(token) = std::env::var(var) {
                request = request.bearer_auth(token);
            }
        }

        let started = Instant::now();
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                LiveError::Timeout(self.spec.timeout_ms)
            } else {
                LiveError::Transport(e.to_string())
            }
        })?;
        let latency_ms = started.elapsed().as_millis() as u64;

        let status = response.status();
        if !status.is_success() {
            return Err(LiveError::Status(status.as_u16()));
        }
        let text = response.text().map_err(|e| LiveError::Transport(e.to_string()))?;
        let parsed: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LiveError::Malformed(e.to_string()))?;
        let content = parsed
            .pointer("/choices/0/message/content")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| {
                LiveError::Malformed("missing choices[0].message.content".to_owned())
            })?;

        let decision = if content.trim().starts_with(&self.spec.reject_prefix) {
            DecisionKind::Reject
        } else {
            DecisionKind::Answer
        };
        Ok(LiveReply { decision, response_text: content.to_owned(), latency_ms })
    }
}

/// One-shot convenience wrapper around [`LiveClient::query`].
pub fn live_query<S: Scalar>(
    spec: &LiveAgentSpec,
    query: &Query,
    scenario: &Scenario<S>,
) -> Result<LiveReply, LiveError> {
    LiveClient::new(spec.clone())?.query(query, scenario)
}
