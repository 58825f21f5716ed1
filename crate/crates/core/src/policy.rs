//! The self-assessment decision rule, scenario-conditioned rewards, and
//! supervised label construction.
//!
//! An agent with capability estimate `p_hat` answers exactly when
//! `p_hat > (1 - alpha)^gamma`, strictly; ties reject. The right-hand
//! side is the expected reward of rejecting, so the rule is "answer iff
//! answering is expected to pay more than rejecting". Everything here is
//! a pure function over immutable inputs; all randomness flows through
//! explicit seeds, so arbitrary parallel invocation is safe.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AgentId, CapabilityTrace, DecisionKind, PolicySection, QueryId, RoutingDecision, Scenario,
    ScenarioName, TraceSet,
};
use crate::rng::derive_rng;
use crate::scalar::{logit, real, sigmoid, Scalar};

/// How an agent turns a capability trace into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Estimate equals the trace-derived capability; answer above the
    /// scenario's reject threshold.
    Calibrated,
    /// Calibrated plus a seeded logit-space perturbation of the estimate,
    /// modeling imperfect self-assessment.
    Noisy,
    /// Answer above a fixed threshold instead of the scenario's.
    FixedThreshold,
    /// Answer unconditionally, ignoring the estimate.
    AlwaysAnswer,
}

/// Which trace statistic the estimate is based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapabilitySource {
    /// Sample success frequency, optionally smoothed.
    Frequency,
    /// The greedy-decoding bit as 0 or 1.
    Greedy,
    /// A single seeded Bernoulli draw at the sample frequency; the drawn
    /// bit doubles as the realized correctness so decision and outcome
    /// stay consistent within a run.
    BernoulliSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Smoothing {
    pub k_plus: u32,
    pub n_plus: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig<S = f64> {
    pub kind: PolicyKind,
    /// Logit-space noise scale; only read by the `Noisy` kind. Zero noise
    /// behaves identically to `Calibrated`.
    pub noise_sigma: S,
    /// Only read by the `FixedThreshold` kind.
    pub fixed_threshold: S,
    pub capability_source: CapabilitySource,
    pub smoothing: Smoothing,
}

impl<S: Scalar> Default for PolicyConfig<S> {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Calibrated,
            noise_sigma: S::zero(),
            fixed_threshold: real(0.5),
            capability_source: CapabilitySource::Frequency,
            smoothing: Smoothing::default(),
        }
    }
}

impl PolicyConfig<f64> {
    /// Build from the `[policy]` config section.
    pub fn from_section(section: &PolicySection) -> Result<Self, String> {
        let kind = match section.kind.as_str() {
            "calibrated" => PolicyKind::Calibrated,
            "noisy" => PolicyKind::Noisy,
            "fixed_threshold" => PolicyKind::FixedThreshold,
            "always_answer" => PolicyKind::AlwaysAnswer,
            other => return Err(format!("policy.kind '{other}' is not recognized")),
        };
        let capability_source = match section.capability_source.as_str() {
            "frequency" => CapabilitySource::Frequency,
            "greedy" => CapabilitySource::Greedy,
            "bernoulli_sample" => CapabilitySource::BernoulliSample,
            other => return Err(format!("policy.capability_source '{other}' is not recognized")),
        };
        if section.noise_sigma < 0.0 {
            return Err("policy.noise_sigma must be >= 0".to_owned());
        }
        if !(0.0..=1.0).contains(&section.fixed_threshold) {
            return Err("policy.fixed_threshold must be in [0, 1]".to_owned());
        }
        Ok(Self {
            kind,
            noise_sigma: section.noise_sigma,
            fixed_threshold: section.fixed_threshold,
            capability_source,
            smoothing: Smoothing {
                k_plus: section.smoothing.k_plus,
                n_plus: section.smoothing.n_plus,
            },
        })
    }
}

/// The pair `(alpha, gamma)` the reward depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams<S = f64> {
    pub alpha: S,
    pub gamma: S,
}

impl<S: Scalar> RewardParams<S> {
    pub fn new(alpha: S, gamma: S) -> Self {
        Self { alpha, gamma }
    }

    pub fn from_scenario(scenario: &Scenario<S>) -> Self {
        Self { alpha: scenario.alpha, gamma: scenario.gamma }
    }
}

/// How an answered-or-rejected query turned out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardEvent {
    Correct,
    Incorrect,
    Reject,
}

/// The capability level above which answering beats rejecting:
/// `(1 - alpha)^gamma`. Monotone non-increasing in `alpha`; equals
/// `1 - alpha` exactly when `gamma` is 1.
pub fn reject_threshold<S: Scalar>(params: &RewardParams<S>) -> S {
    let base = S::one() - params.alpha;
    if params.gamma == S::one() {
        base
    } else {
        base.powf(params.gamma)
    }
}

/// Scenario-conditioned reward: 1 for a correct answer, 0 for an
/// incorrect one, `(1 - alpha)^gamma` for a rejection.
pub fn reward<S: Scalar>(event: RewardEvent, params: &RewardParams<S>) -> S {
    match event {
        RewardEvent::Correct => S::one(),
        RewardEvent::Incorrect => S::zero(),
        RewardEvent::Reject => reject_threshold(params),
    }
}

/// Expected reward of each action for an agent with true capability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRewards<S = f64> {
    /// `p * 1 + (1 - p) * 0 = p`.
    pub answer: S,
    /// `(1 - alpha)^gamma`, independent of `p`.
    pub reject: S,
}

pub fn expected_rewards<S: Scalar>(p: S, params: &RewardParams<S>) -> ExpectedRewards<S> {
    ExpectedRewards { answer: p, reject: reject_threshold(params) }
}

/// Answer iff `p_hat > threshold`, strictly; ties reject. The fallback
/// agent answers unconditionally.
pub fn decide_with_threshold<S: Scalar>(
    p_hat: S,
    threshold: S,
    is_fallback: bool,
) -> RoutingDecision<S> {
    let kind = if is_fallback || p_hat > threshold {
        DecisionKind::Answer
    } else {
        DecisionKind::Reject
    };
    RoutingDecision { kind, estimated_capability: p_hat, threshold }
}

/// The scenario decision rule: answer iff the expected reward of
/// answering exceeds that of rejecting.
pub fn decide<S: Scalar>(p_hat: S, scenario: &Scenario<S>, is_fallback: bool) -> RoutingDecision<S> {
    let threshold = reject_threshold(&RewardParams::from_scenario(scenario));
    decide_with_threshold(p_hat, threshold, is_fallback)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("empty sample list for query '{query_id}' agent '{agent_id}'")]
    EmptySamples { query_id: QueryId, agent_id: AgentId },
}

/// A capability estimate plus the realized correctness bit backing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceAssessment<S = f64> {
    pub p_hat: S,
    /// What actually happens if this agent answers: the greedy bit for
    /// frequency/greedy sources, the drawn bit for `BernoulliSample`.
    pub realized_correct: bool,
}

/// Estimate capability and realized correctness from a trace.
/// Deterministic given `(trace, config, rng_seed)`.
pub fn assess_trace<S: Scalar>(
    trace: &CapabilityTrace,
    config: &PolicyConfig<S>,
    rng_seed: u64,
) -> Result<TraceAssessment<S>, PolicyError> {
    if trace.samples.is_empty() {
        return Err(PolicyError::EmptySamples {
            query_id: trace.query_id.clone(),
            agent_id: trace.agent_id.clone(),
        });
    }
    let mut rng = derive_rng(rng_seed, "assess", &[]);
    let frequency = trace.frequency();
    let (base, realized_correct) = match config.capability_source {
        CapabilitySource::Frequency => (
            frequency.smoothed::<S>(config.smoothing.k_plus, config.smoothing.n_plus),
            trace.greedy_correct,
        ),
        CapabilitySource::Greedy => {
            let bit = if trace.greedy_correct { S::one() } else { S::zero() };
            (bit, trace.greedy_correct)
        }
        CapabilitySource::BernoulliSample => {
            let drawn = rng.random_bool(frequency.value::<f64>());
            let bit = if drawn { S::one() } else { S::zero() };
            (bit, drawn)
        }
    };
    let p_hat = match config.kind {
        PolicyKind::Noisy if config.noise_sigma > S::zero() => {
            perturb_logit(base, config.noise_sigma, &mut rng)
        }
        _ => base,
    };
    Ok(TraceAssessment { p_hat, realized_correct })
}

/// The capability estimate alone; see [`assess_trace`].
pub fn estimate_capability<S: Scalar>(
    trace: &CapabilityTrace,
    config: &PolicyConfig<S>,
    rng_seed: u64,
) -> Result<S, PolicyError> {
    assess_trace(trace, config, rng_seed).map(|a| a.p_hat)
}

/// Apply a Gaussian perturbation of scale `sigma` in logit space.
/// Estimates of exactly 0 or 1 are clamped into `[1e-6, 1 - 1e-6]`
/// before the logit so the transform stays finite.
pub fn perturb_logit<S: Scalar, R: Rng>(p: S, sigma: S, rng: &mut R) -> S {
    let eps: S = real(1e-6);
    let clamped = p.max(eps).min(S::one() - eps);
    let z: f64 = rng.sample(StandardNormal);
    sigmoid(logit(clamped) + sigma * real::<S>(z))
}

/// "Answer" or "reject" training label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SftLabel {
    Answer,
    Reject,
}

/// Interpret a scalar by its shortest round-trip decimal representation,
/// so a configured `0.2` means the exact rational `1/5` rather than the
/// nearest binary float.
fn decimal_rational<S: Scalar>(x: S) -> BigRational {
    parse_decimal(&x.to_string())
        .or_else(|| x.to_f64().and_then(BigRational::from_float))
        .unwrap_or_else(BigRational::one)
}

fn parse_decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let numerator: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let mut value = BigRational::new(numerator * sign, BigInt::from(1));
    let scale = BigRational::new(BigInt::from(10), BigInt::from(1));
    let shift = exponent - frac_part.len() as i32;
    for _ in 0..shift.abs() {
        if shift > 0 {
            value *= scale.clone();
        } else {
            value /= scale.clone();
        }
    }
    Some(value)
}

/// The supervised labeling rule with rejection threshold
/// `delta = 1 - alpha`: reject iff the sample frequency falls strictly
/// below `delta`. The comparison is exact over rationals, so a frequency
/// exactly at the threshold labels "answer".
pub fn sft_label<S: Scalar>(trace: &CapabilityTrace, alpha: S) -> SftLabel {
    let delta = BigRational::one() - decimal_rational(alpha);
    let f = trace.frequency();
    let frequency = BigRational::new(BigInt::from(f.correct), BigInt::from(f.total));
    if frequency < delta {
        SftLabel::Reject
    } else {
        SftLabel::Answer
    }
}

/// One labeled training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord<S = f64> {
    pub query_id: QueryId,
    pub agent_id: AgentId,
    pub scenario: ScenarioName,
    pub alpha: S,
    pub label: SftLabel,
}

/// Label counts for one `(agent, scenario)` stratum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumSummary {
    pub agent_id: AgentId,
    pub scenario: ScenarioName,
    pub alpha: String,
    pub answers: usize,
    pub rejects: usize,
    pub kept_answers: usize,
    pub kept_rejects: usize,
    /// True when balancing found no answers or no rejects to pair; the
    /// stratum is then emitted empty.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftDataset<S = f64> {
    pub records: Vec<SftRecord<S>>,
    pub strata: Vec<StratumSummary>,
}

/// Label every `(trace, scenario)` pair.
///
/// With `balance` set, each `(agent, scenario)` stratum is downsampled
/// (seeded, uniform) so answer and reject counts are equal and, per
/// agent, all scenario strata are the same size. A stratum missing one
/// class entirely is reported as degenerate and emitted empty; it does
/// not shrink the other strata.
pub fn build_sft_dataset<S: Scalar>(
    traces: &TraceSet,
    scenarios: &[Scenario<S>],
    balance: bool,
    seed: u64,
) -> SftDataset<S> {
    use rand::seq::IndexedRandom;

    let mut records: Vec<SftRecord<S>> = Vec::new();
    let mut strata = Vec::new();
    let agents: Vec<AgentId> = traces.agent_ids().into_iter().collect();

    for agent in &agents {
        // Labels per scenario for this agent, split by class.
        let mut per_scenario: Vec<(Vec<SftRecord<S>>, Vec<SftRecord<S>>)> = Vec::new();
        for scenario in scenarios {
            let mut answers = Vec::new();
            let mut rejects = Vec::new();
            for trace in traces.traces_for_agent(agent) {
                let label = sft_label(trace, scenario.alpha);
                let record = SftRecord {
                    query_id: trace.query_id.clone(),
                    agent_id: agent.clone(),
                    scenario: scenario.name,
                    alpha: scenario.alpha,
                    label,
                };
                match label {
                    SftLabel::Answer => answers.push(record),
                    SftLabel::Reject => rejects.push(record),
                }
            }
            per_scenario.push((answers, rejects));
        }

        if !balance {
            for (idx, (answers, rejects)) in per_scenario.iter().enumerate() {
                strata.push(StratumSummary {
                    agent_id: agent.clone(),
                    scenario: scenarios[idx].name,
                    alpha: scenarios[idx].alpha.to_string(),
                    answers: answers.len(),
                    rejects: rejects.len(),
                    kept_answers: answers.len(),
                    kept_rejects: rejects.len(),
                    degenerate: false,
                });
                let mut merged: Vec<SftRecord<S>> =
                    answers.iter().chain(rejects.iter()).cloned().collect();
                merged.sort_by(|a, b| a.query_id.cmp(&b.query_id));
                records.extend(merged);
            }
            continue;
        }

        // Per-class quota shared by all non-degenerate strata of this agent.
        let quota = per_scenario
            .iter()
            .map(|(a, r)| a.len().min(r.len()))
            .filter(|&m| m > 0)
            .min()
            .unwrap_or(0);

        for (idx, (answers, rejects)) in per_scenario.iter().enumerate() {
            let degenerate = answers.is_empty() || rejects.is_empty();
            let keep = if degenerate { 0 } else { quota };
            let mut rng = derive_rng(
                seed,
                "sft-balance",
                &[agent.as_str(), &idx.to_string()],
            );
            let mut kept: Vec<SftRecord<S>> = Vec::with_capacity(keep * 2);
            for class in [answers, rejects] {
                let chosen = class.choose_multiple(&mut rng, keep);
                kept.extend(chosen.cloned());
            }
            kept.sort_by(|a, b| a.query_id.cmp(&b.query_id));
            strata.push(StratumSummary {
                agent_id: agent.clone(),
                scenario: scenarios[idx].name,
                alpha: scenarios[idx].alpha.to_string(),
                answers: answers.len(),
                rejects: rejects.len(),
                kept_answers: keep,
                kept_rejects: keep,
                degenerate,
            });
            records.extend(kept);
        }
    }

    SftDataset { records, strata }
}

/// Write SFT records as line-delimited JSON.
pub fn write_sft_jsonl<S: Scalar + Serialize, W: std::io::Write>(
    records: &[SftRecord<S>],
    mut writer: W,
) -> std::io::Result<()> {
    for record in records {
        let json = serde_json::to_string(record).expect("sft record serializes");
        writeln!(writer, "{json}")?;
    }
    Ok(())
}
