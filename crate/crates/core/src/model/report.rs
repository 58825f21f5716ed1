use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::agent::AgentId;
use crate::scalar::Scalar;

/// Binary classification quality of answer/reject decisions against
/// capability ground truth. The positive class is capable/answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics<S = f64> {
    pub accuracy: S,
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

/// Mean routed cost split by query difficulty class. A class with no
/// members reports `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EasyHardCosts<S = f64> {
    pub easy_mean_cost: Option<S>,
    pub hard_mean_cost: Option<S>,
    pub easy_count: usize,
    pub hard_count: usize,
}

/// Aggregate metrics for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<S = f64> {
    /// Fraction of queries answered correctly.
    pub performance: S,
    /// Mean total cost per query.
    pub mean_cost: S,
    /// `performance - alpha * mean_cost`.
    pub utility: S,
    /// Per agent: of the queries that reached it, the fraction it chose
    /// to answer rather than reject.
    pub per_agent_answer_rate: BTreeMap<AgentId, S>,
    /// Per agent: fraction of queries finalized there; sums to 1.
    pub routing_distribution: BTreeMap<AgentId, S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationMetrics<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub easy_hard_costs: Option<EasyHardCosts<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_performance: Option<S>,
}

impl<S: Scalar + Serialize> EvalReport<S> {
    /// Canonical CSV form: header `metric,agent_id,value`, scalar metrics
    /// with an empty `agent_id`, then per-agent rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "agent_id", "value"])?;
        let scalar = |w: &mut csv::Writer<W>, metric: &str, value: S| {
            w.write_record([metric, "", &value.to_string()])
        };
        scalar(&mut w, "performance", self.performance)?;
        scalar(&mut w, "mean_cost", self.mean_cost)?;
        scalar(&mut w, "utility", self.utility)?;
        for (agent, rate) in &self.per_agent_answer_rate {
            w.write_record(["answer_rate", agent.as_str(), &rate.to_string()])?;
        }
        for (agent, share) in &self.routing_distribution {
            w.write_record(["routing_share", agent.as_str(), &share.to_string()])?;
        }
        if let Some(c) = &self.classification {
            scalar(&mut w, "classification_accuracy", c.accuracy)?;
            scalar(&mut w, "classification_precision", c.precision)?;
            scalar(&mut w, "classification_recall", c.recall)?;
            scalar(&mut w, "classification_f1", c.f1)?;
        }
        if let Some(eh) = &self.easy_hard_costs {
            if let Some(v) = eh.easy_mean_cost {
                scalar(&mut w, "easy_mean_cost", v)?;
            }
            if let Some(v) = eh.hard_mean_cost {
                scalar(&mut w, "hard_mean_cost", v)?;
            }
        }
        if let Some(v) = self.delta_performance {
            scalar(&mut w, "delta_performance", v)?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON summary mirroring the report fields.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
