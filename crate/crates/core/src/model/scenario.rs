use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::{real, Scalar};

/// Instruction prepended to live-backend prompts for each named scenario.
pub const PERFORMANCE_FIRST_INSTRUCTION: &str = "Scenario: Performance First. You must ensure your answer is correct. Only choose to answer if you are completely certain of your ability to answer the question; otherwise, choose not to answer.";
pub const BALANCE_INSTRUCTION: &str = "Scenario: Balance. You need to strike a balance between answering and not answering. You can choose to answer questions you are confident in and choose not to answer those you are uncertain about.";
pub const COST_FIRST_INSTRUCTION: &str = "Scenario: Cost First. You need to answer questions as much as possible. Choose to answer as long as you believe you have the ability to answer correctly; only choose not to answer if you feel there is absolutely no possibility of giving a correct answer.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    PerformanceFirst,
    Balance,
    CostFirst,
    Custom,
}

impl ScenarioName {
    /// The pinned preference factor of a named scenario.
    pub fn pinned_alpha(self) -> Option<f64> {
        match self {
            ScenarioName::PerformanceFirst => Some(0.2),
            ScenarioName::Balance => Some(0.5),
            ScenarioName::CostFirst => Some(0.8),
            ScenarioName::Custom => None,
        }
    }

    fn default_instruction(self) -> &'static str {
        match self {
            ScenarioName::PerformanceFirst => PERFORMANCE_FIRST_INSTRUCTION,
            ScenarioName::Balance => BALANCE_INSTRUCTION,
            ScenarioName::CostFirst => COST_FIRST_INSTRUCTION,
            ScenarioName::Custom => "",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioName::PerformanceFirst => "performance_first",
            ScenarioName::Balance => "balance",
            ScenarioName::CostFirst => "cost_first",
            ScenarioName::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// A routing scenario: the preference factor `alpha` weighting cost
/// against performance, and the reliability factor `gamma` shaping the
/// reject reward `(1 - alpha)^gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<S = f64> {
    pub name: ScenarioName,
    /// Preference factor in `[0, 1]`; larger values prioritize cost.
    pub alpha: S,
    /// Reliability factor in `(0, 1]`; defaults to 0.5.
    pub gamma: S,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
}

impl<S: Scalar> Scenario<S> {
    pub fn default_gamma() -> S {
        real(0.5)
    }

    pub fn named(name: ScenarioName, gamma: S) -> Self {
        let alpha = real(name.pinned_alpha().unwrap_or(0.5));
        Self { name, alpha, gamma, instruction: None }
    }

    pub fn performance_first() -> Self {
        Self::named(ScenarioName::PerformanceFirst, Self::default_gamma())
    }

    pub fn balance() -> Self {
        Self::named(ScenarioName::Balance, Self::default_gamma())
    }

    pub fn cost_first() -> Self {
        Self::named(ScenarioName::CostFirst, Self::default_gamma())
    }

    pub fn custom(alpha: S, gamma: S) -> Self {
        Self { name: ScenarioName::Custom, alpha, gamma, instruction: None }
    }

    /// Pick the named scenario whose pinned alpha matches, else custom.
    pub fn from_alpha(alpha: S, gamma: S) -> Self {
        for name in [ScenarioName::PerformanceFirst, ScenarioName::Balance, ScenarioName::CostFirst] {
            if let Some(pinned) = name.pinned_alpha() {
                if alpha == real(pinned) {
                    return Self::named(name, gamma);
                }
            }
        }
        Self::custom(alpha, gamma)
    }

    /// Instruction text sent to live agents; explicit text wins over the
    /// named default. Custom scenarios without text yield an empty string.
    pub fn instruction_text(&self) -> &str {
        match &self.instruction {
            Some(text) => text,
            None => self.name.default_instruction(),
        }
    }

    /// Range checks plus the named-alpha pinning rule.
    pub fn validate(&self) -> Vec<ScenarioIssue> {
        let mut issues = Vec::new();
        if !(self.alpha >= S::zero() && self.alpha <= S::one()) {
            issues.push(ScenarioIssue::error(format!(
                "scenario alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if !(self.gamma > S::zero() && self.gamma <= S::one()) {
            issues.push(ScenarioIssue::error(format!(
                "scenario gamma {} outside (0, 1]",
                self.gamma
            )));
        }
        if let Some(pinned) = self.name.pinned_alpha() {
            if self.alpha != real(pinned) {
                issues.push(ScenarioIssue::error(format!(
                    "scenario '{}' pins alpha to {}, got {}",
                    self.name, pinned, self.alpha
                )));
            }
        }
        if self.alpha == S::zero() {
            issues.push(ScenarioIssue::warning(
                "alpha = 0 makes the reject threshold 1; non-fallback agents will never answer"
                    .to_owned(),
            ));
        }
        issues
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A scenario validation finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioIssue {
    pub severity: Severity,
    pub message: String,
}

impl ScenarioIssue {
    fn error(message: String) -> Self {
        Self { severity: Severity::Error, message }
    }

    fn warning(message: String) -> Self {
        Self { severity: Severity::Warning, message }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ScenarioIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.severity {
            Severity::Error => write!(f, "error: {}", self.message),
            Severity::Warning => write!(f, "warning: {}", self.message),
        }
    }
}
