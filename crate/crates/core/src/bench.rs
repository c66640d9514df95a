//! Wall-time scaling of verification in the number of behaviors.
//!
//! Systems come from [`gen_random`] with an empty goal set, so every behavior
//! runs the full horizon and the work is exactly `s * H` step applications.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::domains::gen_random;
use crate::error::{validation, Result};
use crate::model::ActionId;
use crate::plan::plan_from_action_sequence;
use crate::verify::verify;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub behaviors: Vec<usize>,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            behaviors: vec![16, 32, 64, 128, 256],
            states: 32,
            actions: 4,
            horizon: 64,
            repetitions: 7,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub behaviors: usize,
    pub step_applications: usize,
    pub plan_entries: usize,
    /// Fastest of the repetitions.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub points: Vec<BenchPoint>,
}

impl BenchReport {
    /// Time ratios between consecutive sizes, normalized to a doubling of `s`.
    pub fn ratios_per_doubling(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .map(|w| {
                let doublings = (w[1].behaviors as f64 / w[0].behaviors as f64).log2();
                (w[1].seconds / w[0].seconds).powf(1.0 / doublings)
            })
            .collect()
    }

    /// Deterministic work counts only.
    pub fn work_json(&self) -> Value {
        let work: Vec<Value> = self
            .points
            .iter()
            .map(|p| {
                json!({
                    "behaviors": p.behaviors,
                    "step_applications": p.step_applications,
                    "plan_entries": p.plan_entries,
                })
            })
            .collect();
        json!({"config": self.config, "work": work})
    }

    /// Work counts plus a separate `timing` section.
    pub fn to_json(&self) -> Value {
        let mut out = self.work_json();
        let ratios = self.ratios_per_doubling();
        let timing: Vec<Value> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                json!({
                    "behaviors": p.behaviors,
                    "seconds": p.seconds,
                    "ratio_per_doubling": i.checked_sub(1).map(|j| ratios[j]),
                })
            })
            .collect();
        out["timing"] = Value::Array(timing);
        out
    }
}

/// Times verification of one fixed unconditional plan on systems of growing
/// behavior count, keeping states, actions and horizon fixed.
pub fn verification_scaling(config: &BenchConfig) -> Result<BenchReport> {
    if config.behaviors.is_empty() || config.behaviors.contains(&0) {
        return Err(validation("behavior counts must be positive"));
    }
    if config.states == 0 || config.actions == 0 || config.repetitions == 0 {
        return Err(validation("states, actions and repetitions must be positive"));
    }
    let sequence: Vec<ActionId> = (0..config.horizon)
        .map(|k| ActionId((k % config.actions) as u32))
        .collect();
    let cases: Vec<_> = config
        .behaviors
        .iter()
        .map(|&s| {
            let sys = gen_random(config.seed, config.states, config.actions, s, 0.0);
            let plan = plan_from_action_sequence(&sequence, &sys, config.horizon);
            (sys, plan)
        })
        .collect();
    // Each round times every size once.
    let mut best = vec![f64::INFINITY; cases.len()];
    let mut steps = vec![0; cases.len()];
    for _ in 0..config.repetitions {
        for (i, (sys, plan)) in cases.iter().enumerate() {
            let start = Instant::now();
            let verdict = verify(sys, plan, config.horizon, 1.0)?;
            best[i] = best[i].min(start.elapsed().as_secs_f64());
            steps[i] = verdict.step_applications;
        }
    }
    let points = cases
        .iter()
        .enumerate()
        .map(|(i, (_, plan))| BenchPoint {
            behaviors: config.behaviors[i],
            step_applications: steps[i],
            plan_entries: plan.len(),
            seconds: best[i],
        })
        .collect();
    Ok(BenchReport {
        config: config.clone(),
        points,
    })
}
