//! Systems whose environment behavior can itself change in response to the
//! agent's actions: a global transition maps `(state, behavior, action)` to
//! `(state, behavior)`. The agent never observes the behavior component.

use fixedbitset::FixedBitSet;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dynamics::Dynamics;
use crate::error::{validation, PwlError, Result};
use crate::model::{ActionId, Limits, PwlSystem, StateId, SymbolTable, KEY_SEPARATOR};
use crate::plan::PlanTable;
use crate::synth::{synthesize_with_stats, SearchStats};
use crate::verify::{simulate_dynamics, verify_dynamics, Trace, Verdict};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedSystem {
    states: SymbolTable,
    actions: SymbolTable,
    behaviors: SymbolTable,
    initial: StateId,
    candidates: Vec<usize>,
    /// `gamma[(q * |B| + b) * |A| + a]`
    gamma: Vec<(StateId, u32)>,
    goal: FixedBitSet,
}

impl ExtendedSystem {
    pub fn new(
        states: SymbolTable,
        actions: SymbolTable,
        behaviors: SymbolTable,
        initial: StateId,
        candidates: Vec<usize>,
        gamma: Vec<(StateId, u32)>,
        goal: impl IntoIterator<Item = StateId>,
    ) -> Result<Self> {
        let (nq, na, nb) = (states.len(), actions.len(), behaviors.len());
        if initial.index() >= nq {
            return Err(validation("initial state is not a declared state"));
        }
        if candidates.is_empty() {
            return Err(validation("the set of initial behavior candidates is empty"));
        }
        let mut sorted = candidates.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != candidates.len() || sorted.iter().any(|&b| b >= nb) {
            return Err(validation("initial candidates must be distinct declared behaviors"));
        }
        if gamma.len() != nq * nb * na {
            return Err(validation("non-total global transition"));
        }
        if gamma.iter().any(|&(q, b)| q.index() >= nq || b as usize >= nb) {
            return Err(validation("global transition references unknown states or behaviors"));
        }
        let mut goal_bits = FixedBitSet::with_capacity(nq);
        for q in goal {
            if q.index() >= nq {
                return Err(validation("goal references an unknown state"));
            }
            goal_bits.insert(q.index());
        }
        Ok(ExtendedSystem {
            states,
            actions,
            behaviors,
            initial,
            candidates: sorted,
            gamma,
            goal: goal_bits,
        })
    }

    pub fn behaviors(&self) -> &SymbolTable {
        &self.behaviors
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn gamma(&self, q: StateId, b: usize, a: ActionId) -> (StateId, usize) {
        let nb = self.behaviors.len();
        let na = self.actions.len();
        let (q2, b2) = self.gamma[(q.index() * nb + b) * na + a.index()];
        (q2, b2 as usize)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with_limits(text, &Limits::default())
    }

    pub fn from_json_with_limits(text: &str, limits: &Limits) -> Result<Self> {
        let file: ExtendedSystemFile =
            serde_json::from_str(text).map_err(|e| PwlError::Parse(e.to_string()))?;
        limits.check(file.states.len(), file.behavior_ids.len())?;
        let states = SymbolTable::new("state", file.states)?;
        let actions = SymbolTable::new("action", file.actions)?;
        let behaviors = SymbolTable::new("behavior", file.behavior_ids)?;
        let lookup = |table: &SymbolTable, kind: &str, name: &str| {
            table
                .get(name)
                .ok_or_else(|| validation(format!("unknown {kind} {name:?}")))
        };
        let initial = StateId(lookup(&states, "state", &file.initial)?);
        let candidates = file
            .initial_candidates
            .iter()
            .map(|b| lookup(&behaviors, "behavior", b).map(|i| i as usize))
            .collect::<Result<Vec<_>>>()?;
        let goal = file
            .goal
            .iter()
            .map(|q| lookup(&states, "state", q).map(StateId))
            .collect::<Result<Vec<_>>>()?;
        let (nq, na, nb) = (states.len(), actions.len(), behaviors.len());
        let mut gamma: Vec<Option<(StateId, u32)>> = vec![None; nq * nb * na];
        for (key, value) in &file.gamma {
            let parts: Vec<&str> = key.split(KEY_SEPARATOR).collect();
            let [q, b, a] = parts.as_slice() else {
                return Err(validation(format!("malformed gamma key {key:?}")));
            };
            let (q2, b2) = value
                .split_once(KEY_SEPARATOR)
                .ok_or_else(|| validation(format!("malformed gamma value {value:?}")))?;
            let q = lookup(&states, "state", q)? as usize;
            let b = lookup(&behaviors, "behavior", b)? as usize;
            let a = lookup(&actions, "action", a)? as usize;
            gamma[(q * nb + b) * na + a] = Some((
                StateId(lookup(&states, "state", q2)?),
                lookup(&behaviors, "behavior", b2)?,
            ));
        }
        if let Some(missing) = gamma.iter().position(Option::is_none) {
            let (qb, a) = (missing / na, missing % na);
            return Err(validation(format!(
                "non-total global transition: no entry for {}|{}|{}",
                states.name((qb / nb) as u32),
                behaviors.name((qb % nb) as u32),
                actions.name(a as u32)
            )));
        }
        let gamma = gamma.into_iter().map(|x| x.expect("checked total")).collect();
        ExtendedSystem::new(states, actions, behaviors, initial, candidates, gamma, goal)
    }

    pub fn to_file(&self) -> ExtendedSystemFile {
        let mut gamma = IndexMap::new();
        for q in 0..self.states.len() as u32 {
            for b in 0..self.behaviors.len() {
                for a in 0..self.actions.len() as u32 {
                    let (q2, b2) = self.gamma(StateId(q), b, ActionId(a));
                    gamma.insert(
                        format!(
                            "{}|{}|{}",
                            self.states.name(q),
                            self.behaviors.name(b as u32),
                            self.actions.name(a)
                        ),
                        format!("{}|{}", self.states.name(q2.0), self.behaviors.name(b2 as u32)),
                    );
                }
            }
        }
        ExtendedSystemFile {
            states: self.states.names().to_vec(),
            actions: self.actions.names().to_vec(),
            initial: self.states.name(self.initial.0).to_string(),
            goal: self.goal.ones().map(|q| self.states.name(q as u32).to_string()).collect(),
            behavior_ids: self.behaviors.names().to_vec(),
            initial_candidates: self
                .candidates
                .iter()
                .map(|&b| self.behaviors.name(b as u32).to_string())
                .collect(),
            gamma,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("system serializes")
    }
}

impl Dynamics for ExtendedSystem {
    fn states(&self) -> &SymbolTable {
        &self.states
    }

    fn actions(&self) -> &SymbolTable {
        &self.actions
    }

    fn hidden_names(&self) -> &[String] {
        self.behaviors.names()
    }

    fn initial_state(&self) -> StateId {
        self.initial
    }

    fn initial_hidden(&self) -> Vec<usize> {
        self.candidates.clone()
    }

    fn advance(&self, q: StateId, hidden: usize, a: ActionId) -> (StateId, usize) {
        self.gamma(q, hidden, a)
    }

    fn is_goal(&self, q: StateId) -> bool {
        self.goal.contains(q.index())
    }
}

/// On-disk layout of an extended system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedSystemFile {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub initial: String,
    pub goal: Vec<String>,
    pub behavior_ids: Vec<String>,
    pub initial_candidates: Vec<String>,
    pub gamma: IndexMap<String, String>,
}

/// A basic system viewed as an extended one whose behavior never changes.
pub fn embed_basic(sys: &PwlSystem) -> ExtendedSystem {
    let (nq, na, nb) = (sys.num_states(), sys.num_actions(), sys.num_behaviors());
    let mut gamma = Vec::with_capacity(nq * nb * na);
    for q in 0..nq as u32 {
        for b in 0..nb {
            for a in 0..na as u32 {
                gamma.push((sys.transition(b, StateId(q), ActionId(a)), b as u32));
            }
        }
    }
    let behaviors = SymbolTable::new("behavior", sys.behavior_names().iter().cloned())
        .expect("behavior names already validated");
    ExtendedSystem::new(
        sys.states().clone(),
        sys.actions().clone(),
        behaviors,
        sys.initial(),
        (0..nb).collect(),
        gamma,
        sys.goal_states(),
    )
    .expect("embedding of a valid system is valid")
}

/// Runs `plan` starting from hidden behavior `b0`; the behavior evolves with
/// the global transition and is recorded in [`Trace::hidden`].
pub fn ext_simulate(es: &ExtendedSystem, plan: &PlanTable, b0: usize, horizon: usize) -> Result<Trace> {
    if !es.candidates.contains(&b0) {
        return Err(PwlError::Index(format!("behavior {b0} is not an initial candidate")));
    }
    Ok(simulate_dynamics(es, plan, b0, horizon))
}

/// Verifies `plan` against every initial candidate behavior.
pub fn ext_verify(es: &ExtendedSystem, plan: &PlanTable, horizon: usize, threshold: f64) -> Result<Verdict> {
    verify_dynamics(es, plan, horizon, threshold)
}

/// Plan search with an explicit horizon; there is no complete default bound
/// once actions can change the behavior.
pub fn ext_synthesize(es: &ExtendedSystem, horizon: usize) -> Option<PlanTable> {
    ext_synthesize_with_stats(es, horizon).0
}

pub fn ext_synthesize_with_stats(es: &ExtendedSystem, horizon: usize) -> (Option<PlanTable>, SearchStats) {
    synthesize_with_stats(es, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{gen_intro_example, intro_plan};
    use crate::synth::synthesize;
    use crate::verify::Outcome;

    #[test]
    fn embedding_is_static() {
        let sys = gen_intro_example();
        let es = embed_basic(&sys);
        assert_eq!(es.behaviors().len(), 2);
        for q in 0..6 {
            for b in 0..2 {
                for a in 0..4 {
                    let (q2, b2) = es.gamma(StateId(q), b, ActionId(a));
                    assert_eq!(b2, b);
                    assert_eq!(q2, sys.transition(b, StateId(q), ActionId(a)));
                }
            }
        }
        assert_eq!(ExtendedSystem::from_json(&es.to_json()).unwrap(), es);
    }

    #[test]
    fn embedded_synthesis_matches_basic() {
        let sys = gen_intro_example();
        let es = embed_basic(&sys);
        assert_eq!(ext_synthesize(&es, 3), synthesize(&sys, 3));
        let trace = ext_simulate(&es, &intro_plan(&sys), 1, 3).unwrap();
        assert_eq!(trace.hidden, vec![1; 4]);
        assert_eq!(trace.outcome, Outcome::GoalReached { step: 3 });
    }

    #[test]
    fn zero_horizon_outside_goal_exhausts() {
        let es = embed_basic(&gen_intro_example());
        let trace = ext_simulate(&es, &PlanTable::new(0), 0, 0).unwrap();
        assert_eq!(trace.outcome, Outcome::HorizonExhausted);
        assert!(trace.history.is_empty());
    }

    #[test]
    fn empty_goal_has_no_plan() {
        let text = r#"{
            "states": ["s"], "actions": ["a"], "initial": "s", "goal": [],
            "behavior_ids": ["b"], "initial_candidates": ["b"],
            "gamma": {"s|b|a": "s|b"}
        }"#;
        let es = ExtendedSystem::from_json(text).unwrap();
        assert!(ext_synthesize(&es, 5).is_none());
    }

    #[test]
    fn rejects_partial_gamma() {
        let text = r#"{
            "states": ["s", "t"], "actions": ["a"], "initial": "s", "goal": ["t"],
            "behavior_ids": ["b"], "initial_candidates": ["b"],
            "gamma": {"s|b|a": "t|b"}
        }"#;
        let err = ExtendedSystem::from_json(text).unwrap_err();
        assert!(matches!(&err, PwlError::Validation(m) if m.contains("non-total")), "{err}");
    }
}
