use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::agent::{validate_pool, AgentSpec, BackendKind, Pool};
use super::scenario::{Scenario, ScenarioName};

/// Run configuration file (TOML): a `pool` list plus `scenario`,
/// `engine`, and optional `policy`, `synthetic`, and `baselines`
/// sections. Typed builders for the policy/engine/synthetic sections
/// live with the modules that consume them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pool: Vec<PoolEntryConfig>,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub baselines: BaselinesSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolEntryConfig {
    pub id: String,
    pub cost: f64,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub live: Option<LiveSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<ScenarioName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    /// `"none"`, `"fractional"`, or `"fractional:<f>"`.
    #[serde(default = "default_overhead_mode")]
    pub overhead_mode: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_rank: Option<usize>,
}

fn default_overhead_mode() -> String {
    "none".to_owned()
}

impl Default for EngineSection {
    fn default() -> Self {
        Self { overhead_mode: default_overhead_mode(), seed: 0, entry_rank: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    /// `"calibrated"`, `"noisy"`, `"fixed_threshold"`, or `"always_answer"`.
    #[serde(default = "default_policy_kind")]
    pub kind: String,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_fixed_threshold")]
    pub fixed_threshold: f64,
    /// `"frequency"`, `"greedy"`, or `"bernoulli_sample"`.
    #[serde(default = "default_capability_source")]
    pub capability_source: String,
    #[serde(default)]
    pub smoothing: SmoothingSection,
}

fn default_policy_kind() -> String {
    "calibrated".to_owned()
}

fn default_fixed_threshold() -> f64 {
    0.5
}

fn default_capability_source() -> String {
    "frequency".to_owned()
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            kind: default_policy_kind(),
            noise_sigma: 0.0,
            fixed_threshold: default_fixed_threshold(),
            capability_source: default_capability_source(),
            smoothing: SmoothingSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    #[serde(default)]
    pub k_plus: u32,
    #[serde(default)]
    pub n_plus: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_queries: usize,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_discrimination")]
    pub discrimination: f64,
    #[serde(default)]
    pub difficulty: DifficultySection,
    #[serde(default = "default_true")]
    pub nested: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skills: Option<Vec<f64>>,
    /// When present, skills are calibrated so each agent's mean
    /// capability matches its target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_accuracies: Option<Vec<f64>>,
}

fn default_n_samples() -> usize {
    10
}

fn default_discrimination() -> f64 {
    4.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultySection {
    /// `"uniform"` or `"normal"`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
}

impl Default for DifficultySection {
    fn default() -> Self {
        Self { kind: "uniform".to_owned(), low: Some(-4.0), high: Some(4.0), mean: None, sd: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveSection {
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_reject_prefix")]
    pub reject_prefix: String,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_reject_prefix() -> String {
    "I don't know".to_owned()
}

fn default_max_in_flight() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselinesSection {
    /// Observer noise of the external-threshold baseline.
    #[serde(default = "default_external_sigma")]
    pub external_sigma: f64,
    /// Answer threshold of the external-threshold baseline; defaults to
    /// the scenario's reject threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_seed: Option<u64>,
}

fn default_external_sigma() -> f64 {
    1.0
}

impl Default for BaselinesSection {
    fn default() -> Self {
        Self { external_sigma: default_external_sigma(), external_threshold: None, random_seed: None }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Deterministic serialization used for config fingerprinting.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Build and validate the agent pool.
    pub fn build_pool(&self) -> Result<Pool<f64>, ConfigError> {
        let agents = self
            .pool
            .iter()
            .enumerate()
            .map(|(i, entry)| {
                let mut spec = AgentSpec::new(entry.id.clone(), entry.cost, i + 1);
                spec.backend = entry.backend;
                spec
            })
            .collect();
        let mut pool = Pool::new(agents);
        if let Some(entry_rank) = self.engine.entry_rank {
            pool.entry_rank = entry_rank;
        }
        let violations = validate_pool(&pool);
        if violations.is_empty() {
            Ok(pool)
        } else {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(ConfigError::Invalid(format!("pool: {}", list.join("; "))))
        }
    }

    /// Resolve the scenario: a named scenario pins alpha; a bare alpha
    /// yields a custom scenario; both present must agree.
    pub fn build_scenario(&self) -> Result<Scenario<f64>, ConfigError> {
        let gamma = self.scenario.gamma.unwrap_or(0.5);
        let mut scenario = match (self.scenario.name, self.scenario.alpha) {
            (Some(name), None) => Scenario::named(name, gamma),
            (None, Some(alpha)) => Scenario::from_alpha(alpha, gamma),
            (Some(name), Some(alpha)) => {
                let mut s = Scenario::named(name, gamma);
                s.alpha = alpha;
                s
            }
            (None, None) => {
                return Err(ConfigError::Invalid(
                    "scenario: either 'name' or 'alpha' is required".to_owned(),
                ))
            }
        };
        scenario.instruction = self.scenario.instruction.clone();
        let errors: Vec<String> = scenario
            .validate()
            .into_iter()
            .filter(|i| i.is_error())
            .map(|i| i.message)
            .collect();
        if errors.is_empty() {
            Ok(scenario)
        } else {
            Err(ConfigError::Invalid(format!("scenario: {}", errors.join("; "))))
        }
    }
}
