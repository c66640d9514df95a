//! Plan verification by simulating the plan under every candidate behavior.
//!
//! Each run costs at most `H` plan lookups and `H` transitions, so a full
//! verification performs at most `s * H` transitions.

use serde_json::{json, Value};

use crate::dynamics::Dynamics;
use crate::error::{validation, PwlError, Result};
use crate::model::{HistoryKey, PwlSystem};
use crate::plan::{PlanContext, PlanTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// The state after `step` actions is a goal and no earlier state was.
    GoalReached { step: usize },
    /// The plan has no entry for this (plausible) history.
    UndefinedEntry { history: HistoryKey },
    HorizonExhausted,
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::GoalReached { .. })
    }
}

/// One run of a plan under a fixed starting behavior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// Index of the starting behavior.
    pub behavior: usize,
    /// Observed states and actions, starting at the initial state.
    pub history: HistoryKey,
    /// Hidden behavior in force at each state of `history`; constant for
    /// basic systems.
    pub hidden: Vec<usize>,
    pub outcome: Outcome,
}

impl Trace {
    /// Number of transitions applied.
    pub fn steps(&self) -> usize {
        self.history.len()
    }

    pub fn to_json(&self, dynamics: &dyn Dynamics, with_hidden: bool) -> Value {
        let (states, actions) = (dynamics.states(), dynamics.actions());
        let outcome = match &self.outcome {
            Outcome::GoalReached { step } => json!({"kind": "goal_reached", "step": step}),
            Outcome::UndefinedEntry { history } => json!({
                "kind": "undefined_entry",
                "history": history.to_names(states, actions),
            }),
            Outcome::HorizonExhausted => json!({"kind": "horizon_exhausted"}),
        };
        let mut obj = serde_json::Map::new();
        obj.insert("behavior".into(), dynamics.hidden_names()[self.behavior].clone().into());
        obj.insert("history".into(), json!(self.history.to_names(states, actions)));
        if with_hidden {
            let names: Vec<&str> = self
                .hidden
                .iter()
                .map(|&b| dynamics.hidden_names()[b].as_str())
                .collect();
            obj.insert("hidden".into(), json!(names));
        }
        obj.insert("outcome".into(), outcome);
        Value::Object(obj)
    }
}

/// Aggregated result of running a plan under every candidate behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub traces: Vec<Trace>,
    pub satisfied_count: usize,
    pub satisfied_fraction: f64,
    pub threshold: f64,
    pub satisfactory: bool,
    /// Total transitions applied across all runs.
    pub step_applications: usize,
}

impl Verdict {
    fn from_traces(traces: Vec<Trace>, threshold: f64) -> Self {
        let satisfied_count = traces.iter().filter(|t| t.outcome.is_success()).count();
        let satisfied_fraction = if traces.is_empty() {
            1.0
        } else {
            satisfied_count as f64 / traces.len() as f64
        };
        let step_applications = traces.iter().map(Trace::steps).sum();
        Verdict {
            satisfactory: satisfied_fraction >= threshold,
            traces,
            satisfied_count,
            satisfied_fraction,
            threshold,
            step_applications,
        }
    }

    /// Traces that did not reach the goal, in behavior order.
    pub fn failures(&self) -> impl Iterator<Item = &Trace> {
        self.traces.iter().filter(|t| !t.outcome.is_success())
    }

    pub fn to_json(&self, dynamics: &dyn Dynamics, with_hidden: bool) -> Value {
        let failures: Vec<&str> = self
            .failures()
            .map(|t| dynamics.hidden_names()[t.behavior].as_str())
            .collect();
        json!({
            "satisfactory": self.satisfactory,
            "satisfied_count": self.satisfied_count,
            "behavior_count": self.traces.len(),
            "satisfied_fraction": self.satisfied_fraction,
            "threshold": self.threshold,
            "step_applications": self.step_applications,
            "failures": failures,
            "traces": self.traces.iter().map(|t| t.to_json(dynamics, with_hidden)).collect::<Vec<_>>(),
        })
    }
}

/// Runs `plan` from the initial state with hidden value `hidden`.
///
/// Goal membership is tested before each lookup, so reaching the goal ends
/// the run even if the table has further entries.
pub fn simulate_dynamics<D: Dynamics + ?Sized>(
    dynamics: &D,
    plan: &PlanTable,
    hidden: usize,
    horizon: usize,
) -> Trace {
    let mut q = dynamics.initial_state();
    let mut b = hidden;
    let mut history = HistoryKey::new(q);
    let mut hidden_path = vec![b];
    let outcome = loop {
        if dynamics.is_goal(q) {
            break Outcome::GoalReached { step: history.len() };
        }
        if history.len() >= horizon {
            break Outcome::HorizonExhausted;
        }
        let Some(a) = plan.action_raw(history.as_raw()) else {
            break Outcome::UndefinedEntry {
                history: history.clone(),
            };
        };
        (q, b) = dynamics.advance(q, b, a);
        history.push(a, q);
        hidden_path.push(b);
    };
    Trace {
        behavior: hidden,
        history,
        hidden: hidden_path,
        outcome,
    }
}

pub(crate) fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(validation(format!("threshold {threshold} is outside (0, 1]")))
    }
}

/// Verifies `plan` under every admissible starting hidden value, in order.
pub fn verify_dynamics<D: Dynamics + ?Sized>(
    dynamics: &D,
    plan: &PlanTable,
    horizon: usize,
    threshold: f64,
) -> Result<Verdict> {
    check_threshold(threshold)?;
    let initials = [dynamics.initial_state()];
    plan.check(&PlanContext {
        states: dynamics.states(),
        actions: dynamics.actions(),
        initials: &initials,
    })?;
    let traces = dynamics
        .initial_hidden()
        .into_iter()
        .map(|b| simulate_dynamics(dynamics, plan, b, horizon))
        .collect();
    Ok(Verdict::from_traces(traces, threshold))
}

/// Runs `plan` under behavior `b` for at most `horizon` actions.
pub fn simulate(sys: &PwlSystem, plan: &PlanTable, b: usize, horizon: usize) -> Result<Trace> {
    if b >= sys.num_behaviors() {
        return Err(PwlError::Index(format!("behavior {b} of {}", sys.num_behaviors())));
    }
    Ok(simulate_dynamics(sys, plan, b, horizon))
}

/// Decides whether `plan` reaches the goal within `horizon` actions under at
/// least a `threshold` fraction of the behaviors.
pub fn verify(sys: &PwlSystem, plan: &PlanTable, horizon: usize, threshold: f64) -> Result<Verdict> {
    verify_dynamics(sys, plan, horizon, threshold)
}

/// True when replaying the trace through the system's transition tables
/// reproduces every step and the outcome is consistent with the goal set.
pub fn replays(sys: &PwlSystem, trace: &Trace) -> bool {
    if trace.history.first_state() != sys.initial() {
        return false;
    }
    let transitions_match = trace
        .history
        .transitions()
        .all(|(q, a, q2)| sys.transition(trace.behavior, q, a) == q2);
    let no_early_goal = trace
        .history
        .states()
        .take(trace.history.len())
        .all(|q| !sys.is_goal(q));
    let outcome_ok = match &trace.outcome {
        Outcome::GoalReached { step } => *step == trace.history.len() && sys.is_goal(trace.history.last_state()),
        Outcome::UndefinedEntry { history } => *history == trace.history && !sys.is_goal(history.last_state()),
        Outcome::HorizonExhausted => !sys.is_goal(trace.history.last_state()),
    };
    transitions_match && no_early_goal && outcome_ok
}
