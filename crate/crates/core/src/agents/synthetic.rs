//! Synthetic agent pools with a two-parameter logistic capability model.
//!
//! Agent `i` solves a query of difficulty `d` with probability
//! `sigmoid(discrimination * (skill_i - d))`, so capability strictly
//! increases with rank for every query once skills increase. Skills can
//! be calibrated by bisection so each agent's mean capability over the
//! difficulty distribution hits a target accuracy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AgentId, CapabilityTrace, DifficultySection, Query, SyntheticSection, TraceSet};
use crate::rng::derive_rng;
use crate::scalar::{real, sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DifficultyDistribution<S = f64> {
    Uniform { low: S, high: S },
    Normal { mean: S, sd: S },
}

impl<S: Scalar> DifficultyDistribution<S> {
    fn sample(&self, rng: &mut ChaCha8Rng) -> S {
        match *self {
            DifficultyDistribution::Uniform { low, high } => {
                let u: f64 = rng.random();
                low + (high - low) * real(u)
            }
            DifficultyDistribution::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * real(z)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPoolSpec<S = f64> {
    /// One skill per agent, strictly increasing with rank.
    pub skills: Vec<S>,
    /// Shared logistic slope; larger values sharpen the capability step.
    pub discrimination: S,
    pub difficulty: DifficultyDistribution<S>,
    pub n_queries: usize,
    pub n_samples: usize,
    /// Couple the per-sample draws across agents so correctness is
    /// monotone in rank: if rank `i` solves a sample, every higher rank
    /// does too.
    pub nested: bool,
    pub seed: u64,
}

impl SyntheticPoolSpec<f64> {
    /// Build from the `[synthetic]` config section. Calibrating against
    /// `target_accuracies` is the caller's step.
    pub fn from_section(section: &SyntheticSection, default_seed: u64) -> Result<Self, String> {
        let difficulty = parse_difficulty(&section.difficulty)?;
        if section.discrimination <= 0.0 {
            return Err("synthetic.discrimination must be > 0".to_owned());
        }
        if section.n_samples == 0 {
            return Err("synthetic.n_samples must be >= 1".to_owned());
        }
        Ok(Self {
            skills: section.skills.clone().unwrap_or_default(),
            discrimination: section.discrimination,
            difficulty,
            n_queries: section.n_queries,
            n_samples: section.n_samples,
            nested: section.nested,
            seed: section.seed.unwrap_or(default_seed),
        })
    }
}

fn parse_difficulty(section: &DifficultySection) -> Result<DifficultyDistribution<f64>, String> {
    match section.kind.as_str() {
        "uniform" => {
            let low = section.low.unwrap_or(-4.0);
            let high = section.high.unwrap_or(4.0);
            if !(low < high) {
                return Err(format!("synthetic.difficulty: low {low} must be below high {high}"));
            }
            Ok(DifficultyDistribution::Uniform { low, high })
        }
        "normal" => {
            let sd = section.sd.unwrap_or(1.0);
            if sd <= 0.0 {
                return Err("synthetic.difficulty: sd must be > 0".to_owned());
            }
            Ok(DifficultyDistribution::Normal { mean: section.mean.unwrap_or(0.0), sd })
        }
        other => Err(format!("synthetic.difficulty.kind '{other}' is not uniform or normal")),
    }
}

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("skills must strictly increase with rank (index {index})")]
    NonIncreasingSkills { index: usize },
    #[error("expected {agents} skills for {agents} agents, got {skills}")]
    SkillCountMismatch { agents: usize, skills: usize },
    #[error("n_samples must be >= 1")]
    NoSamples,
}

/// Generated dataset plus per-agent empirical greedy accuracy.
#[derive(Debug, Clone)]
pub struct SyntheticData<S = f64> {
    pub queries: Vec<Query>,
    pub traces: TraceSet,
    /// `(agent, mean greedy accuracy)` in rank order.
    pub greedy_accuracy: Vec<(AgentId, S)>,
}

/// Sample a trace set from the capability model. Deterministic given the
/// spec's seed: the same spec yields bit-identical trace sets.
pub fn generate_synthetic<S: Scalar>(
    spec: &SyntheticPoolSpec<S>,
    agent_ids: &[AgentId],
) -> Result<SyntheticData<S>, SyntheticError> {
    if spec.skills.len() != agent_ids.len() {
        return Err(SyntheticError::SkillCountMismatch {
            agents: agent_ids.len(),
            skills: spec.skills.len(),
        });
    }
    for (index, pair) in spec.skills.windows(2).enumerate() {
        if !(pair[1] > pair[0]) {
            return Err(SyntheticError::NonIncreasingSkills { index: index + 1 });
        }
    }
    if spec.n_samples == 0 {
        return Err(SyntheticError::NoSamples);
    }

    let width = spec.n_queries.to_string().len().max(4);
    let mut queries = Vec::with_capacity(spec.n_queries);
    let mut traces = TraceSet::new();
    let mut greedy_hits = vec![0usize; agent_ids.len()];
    let mut rng = derive_rng(spec.seed, "synthetic", &[]);

    for q in 0..spec.n_queries {
        let query = Query::bare(format!("q{q:0width$}"));
        let difficulty = spec.difficulty.sample(&mut rng);
        let capabilities: Vec<S> = spec
            .skills
            .iter()
            .map(|&skill| sigmoid(spec.discrimination * (skill - difficulty)))
            .collect();

        let mut samples: Vec<Vec<bool>> = vec![Vec::with_capacity(spec.n_samples); agent_ids.len()];
        for _ in 0..spec.n_samples {
            if spec.nested {
                // One shared uniform draw: since capability increases with
                // rank, a success at rank i implies success at every j > i.
                let u: S = real(rng.random::<f64>());
                for (agent_samples, &p) in samples.iter_mut().zip(&capabilities) {
                    agent_samples.push(u < p);
                }
            } else {
                for (agent_samples, &p) in samples.iter_mut().zip(&capabilities) {
                    let u: S = real(rng.random::<f64>());
                    agent_samples.push(u < p);
                }
            }
        }

        for (i, agent_id) in agent_ids.iter().enumerate() {
            let greedy = capabilities[i] > real(0.5);
            if greedy {
                greedy_hits[i] += 1;
            }
            traces
                .insert(CapabilityTrace {
                    query_id: query.id.clone(),
                    agent_id: agent_id.clone(),
                    samples: std::mem::take(&mut samples[i]),
                    greedy_correct: greedy,
                })
                .expect("generated keys are unique");
        }
        queries.push(query);
    }

    let denom = real::<S>(spec.n_queries.max(1) as f64);
    let greedy_accuracy = agent_ids
        .iter()
        .zip(&greedy_hits)
        .map(|(id, &hits)| (id.clone(), real::<S>(hits as f64) / denom))
        .collect();
    Ok(SyntheticData { queries, traces, greedy_accuracy })
}

const QUADRATURE_NODES: usize = 1024;

/// Mean capability of one skill over the difficulty distribution,
/// via 1024-node midpoint quadrature.
pub fn mean_capability<S: Scalar>(
    skill: S,
    discrimination: S,
    difficulty: &DifficultyDistribution<S>,
) -> S {
    let nodes = real::<S>(QUADRATURE_NODES as f64);
    match *difficulty {
        DifficultyDistribution::Uniform { low, high } => {
            let step = (high - low) / nodes;
            let mut sum = S::zero();
            for i in 0..QUADRATURE_NODES {
                let d = low + step * (real::<S>(i as f64) + real(0.5));
                sum = sum + sigmoid(discrimination * (skill - d));
            }
            sum / nodes
        }
        DifficultyDistribution::Normal { mean, sd } => {
            // Midpoint rule over +/- 8 sd, normalized by the same
            // quadrature of the density so the result is a proper mean.
            let low = mean - sd * real(8.0);
            let high = mean + sd * real(8.0);
            let step = (high - low) / nodes;
            let mut weighted = S::zero();
            let mut mass = S::zero();
            for i in 0..QUADRATURE_NODES {
                let d = low + step * (real::<S>(i as f64) + real(0.5));
                let z = (d - mean) / sd;
                let density = (-z * z / real(2.0)).exp();
                weighted = weighted + density * sigmoid(discrimination * (skill - d));
                mass = mass + density;
            }
            weighted / mass
        }
    }
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("target accuracies must strictly increase (index {index})")]
    NotIncreasing { index: usize },
    #[error("target accuracy {target} outside (0, 1)")]
    OutOfRange { target: String },
    #[error("target {target} unreachable; achievable range is [{low}, {high}]")]
    Unreachable { target: String, low: String, high: String },
}

/// Find skills whose analytic mean capability matches each target
/// accuracy within 0.005, by per-agent bisection. The template supplies
/// everything except the skills.
pub fn calibrate_skills<S: Scalar>(
    target_accuracies: &[S],
    template: &SyntheticPoolSpec<S>,
) -> Result<SyntheticPoolSpec<S>, CalibrationError> {
    for (index, pair) in target_accuracies.windows(2).enumerate() {
        if !(pair[1] > pair[0]) {
            return Err(CalibrationError::NotIncreasing { index: index + 1 });
        }
    }
    for &target in target_accuracies {
        if !(target > S::zero() && target < S::one()) {
            return Err(CalibrationError::OutOfRange { target: target.to_string() });
        }
    }

    let (center, half_width) = match template.difficulty {
        DifficultyDistribution::Uniform { low, high } => {
            ((low + high) / real(2.0), (high - low) / real(2.0))
        }
        DifficultyDistribution::Normal { mean, sd } => (mean, sd * real(8.0)),
    };
    // Wide enough that the logistic saturates at the ends.
    let margin = real::<S>(60.0) / template.discrimination;
    let lo = center - half_width - margin;
    let hi = center + half_width + margin;

    let mut skills = Vec::with_capacity(target_accuracies.len());
    for &target in target_accuracies {
        let f = |s: S| mean_capability(s, template.discrimination, &template.difficulty);
        let (f_lo, f_hi) = (f(lo), f(hi));
        if target < f_lo || target > f_hi {
            return Err(CalibrationError::Unreachable {
                target: target.to_string(),
                low: f_lo.to_string(),
                high: f_hi.to_string(),
            });
        }
        let mut a = lo;
        let mut b = hi;
        for _ in 0..200 {
            let mid = (a + b) / real(2.0);
            if f(mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        skills.push((a + b) / real(2.0));
    }

    Ok(SyntheticPoolSpec { skills, ..template.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE_TARGETS: [f64; 5] = [0.3801, 0.5895, 0.7308, 0.8090, 0.8545];

    fn template() -> SyntheticPoolSpec<f64> {
        SyntheticPoolSpec {
            skills: vec![],
            discrimination: 4.0,
            difficulty: DifficultyDistribution::Uniform { low: -4.0, high: 4.0 },
            n_queries: 0,
            n_samples: 10,
            nested: true,
            seed: 1,
        }
    }

    fn agent_ids(n: usize) -> Vec<AgentId> {
        (0..n).map(|i| AgentId::new(format!("a{}", i + 1))).collect()
    }

    #[test]
    fn same_seed_same_traces() {
        let spec = SyntheticPoolSpec { skills: vec![-1.0, 0.5, 2.0], n_queries: 50, ..template() };
        let ids = agent_ids(3);
        let a = generate_synthetic(&spec, &ids).unwrap();
        let b = generate_synthetic(&spec, &ids).unwrap();
        assert_eq!(a.traces, b.traces);
        assert_eq!(a.greedy_accuracy, b.greedy_accuracy);
        let other = SyntheticPoolSpec { seed: 2, ..spec };
        let c = generate_synthetic(&other, &ids).unwrap();
        assert_ne!(a.traces, c.traces);
    }

    #[test]
    fn nested_samples_are_monotone_in_rank() {
        let spec = SyntheticPoolSpec {
            skills: vec![-1.0, 0.0, 1.0, 2.0],
            n_queries: 200,
            ..template()
        };
        let ids = agent_ids(4);
        let data = generate_synthetic(&spec, &ids).unwrap();
        for query in &data.queries {
            for s in 0..spec.n_samples {
                let bits: Vec<bool> = ids
                    .iter()
                    .map(|a| data.traces.get(&query.id, a).unwrap().samples[s])
                    .collect();
                for w in bits.windows(2) {
                    assert!(!w[0] || w[1], "success at a lower rank implies success above");
                }
            }
            let greedy: Vec<bool> = ids
                .iter()
                .map(|a| data.traces.get(&query.id, a).unwrap().greedy_correct)
                .collect();
            for w in greedy.windows(2) {
                assert!(!w[0] || w[1]);
            }
        }
    }

    #[test]
    fn huge_discrimination_steps_on_difficulty() {
        let spec = SyntheticPoolSpec {
            skills: vec![0.0],
            discrimination: 1e6,
            n_queries: 300,
            ..template()
        };
        let ids = agent_ids(1);
        let data = generate_synthetic(&spec, &ids).unwrap();
        // Every sample agrees with the greedy bit: capability is ~0 or ~1.
        for trace in data.traces.iter() {
            assert!(trace.samples.iter().all(|&s| s == trace.greedy_correct));
        }
    }

    #[test]
    fn non_increasing_skills_rejected() {
        let spec = SyntheticPoolSpec { skills: vec![0.9, 0.1], n_queries: 5, ..template() };
        assert!(matches!(
            generate_synthetic(&spec, &agent_ids(2)).unwrap_err(),
            SyntheticError::NonIncreasingSkills { index: 1 }
        ));
    }

    #[test]
    fn calibration_hits_reference_targets() {
        let spec = calibrate_skills(&REFERENCE_TARGETS, &template()).unwrap();
        assert_eq!(spec.skills.len(), 5);
        assert!(spec.skills.windows(2).all(|w| w[1] > w[0]));
        for (skill, target) in spec.skills.iter().zip(REFERENCE_TARGETS) {
            let achieved = mean_capability(*skill, spec.discrimination, &spec.difficulty);
            assert!((achieved - target).abs() <= 0.005, "achieved {achieved}, target {target}");
        }
    }

    #[test]
    fn symmetric_distribution_gives_zero_skill_at_half() {
        let spec = calibrate_skills(&[0.5], &template()).unwrap();
        assert!(spec.skills[0].abs() < 1e-6, "skill {}", spec.skills[0]);
    }

    #[test]
    fn decreasing_targets_rejected() {
        assert!(matches!(
            calibrate_skills(&[0.9, 0.1], &template()).unwrap_err(),
            CalibrationError::NotIncreasing { index: 1 }
        ));
    }

    #[test]
    fn out_of_range_target_rejected() {
        assert!(matches!(
            calibrate_skills(&[0.0], &template()).unwrap_err(),
            CalibrationError::OutOfRange { .. }
        ));
    }

    #[test]
    fn empirical_greedy_accuracy_near_targets() {
        let spec = calibrate_skills(&REFERENCE_TARGETS, &template()).unwrap();
        let spec = SyntheticPoolSpec { n_queries: 5000, seed: 7, ..spec };
        let ids = agent_ids(5);
        let data = generate_synthetic(&spec, &ids).unwrap();
        for ((_, accuracy), target) in data.greedy_accuracy.iter().zip(REFERENCE_TARGETS) {
            assert!(
                (accuracy - target).abs() <= 0.02,
                "empirical {accuracy} vs target {target}"
            );
        }
    }

    #[test]
    fn normal_difficulty_calibrates_too() {
        let template = SyntheticPoolSpec {
            difficulty: DifficultyDistribution::Normal { mean: 0.0, sd: 1.5 },
            ..template()
        };
        let spec = calibrate_skills(&[0.4, 0.7], &template).unwrap();
        for (skill, target) in spec.skills.iter().zip([0.4, 0.7]) {
            let achieved = mean_capability(*skill, spec.discrimination, &spec.difficulty);
            assert!((achieved - target).abs() <= 0.005);
        }
    }
}
