//! Two-agent systems with a shared action alphabet and a joint transition
//! `(q1, q2, b, a1, a2) -> (q1', q2', b')`.
//!
//! Each agent observes only its own states and acts on its own history. A
//! multi-agent plan is one set of plans per agent; it is satisfactory when,
//! for every goal of every agent, some plan in that agent's set reaches the
//! goal against every plan in the other agent's set, every pair of initial
//! states and every initial behavior.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{validation, PwlError, Result};
use crate::model::{ActionId, HistoryKey, StateId, SymbolTable, KEY_SEPARATOR};
use crate::plan::{PlanContext, PlanFile, PlanTable};

/// Declared size caps for multi-agent systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaCaps {
    pub max_states: usize,
    pub max_behaviors: usize,
    pub max_initials: usize,
    pub max_goals: usize,
    /// Maximum number of entries in the dense joint transition table.
    pub max_table: usize,
}

impl Default for MaCaps {
    fn default() -> Self {
        MaCaps {
            max_states: 65536,
            max_behaviors: 4096,
            max_initials: 256,
            max_goals: 64,
            max_table: 1 << 26,
        }
    }
}

impl MaCaps {
    pub fn from_limits(limits: &crate::model::Limits) -> Self {
        MaCaps {
            max_states: limits.max_states,
            max_behaviors: limits.max_behaviors,
            ..MaCaps::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    pub name: String,
    states: FixedBitSet,
}

impl Goal {
    pub fn new(name: impl Into<String>, universe: usize, states: impl IntoIterator<Item = StateId>) -> Self {
        let mut bits = FixedBitSet::with_capacity(universe);
        for q in states {
            bits.insert(q.index());
        }
        Goal {
            name: name.into(),
            states: bits,
        }
    }

    pub fn contains(&self, q: StateId) -> bool {
        self.states.contains(q.index())
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.states.ones().map(|q| StateId(q as u32))
    }
}

/// One agent's view: its observable states, possible initial states and
/// possible goals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub states: SymbolTable,
    pub initials: Vec<StateId>,
    pub goals: Vec<Goal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiAgentSystem {
    actions: SymbolTable,
    behaviors: SymbolTable,
    initial_behaviors: Vec<usize>,
    agents: [Agent; 2],
    gamma: Vec<(StateId, StateId, u32)>,
}

fn table_size(agents: &[Agent; 2], nb: usize, na: usize) -> Option<usize> {
    agents[0]
        .states
        .len()
        .checked_mul(agents[1].states.len())?
        .checked_mul(nb)?
        .checked_mul(na)?
        .checked_mul(na)
}

impl MultiAgentSystem {
    /// Builds a system by evaluating `gamma` on every joint configuration.
    pub fn from_fn(
        actions: SymbolTable,
        behaviors: SymbolTable,
        initial_behaviors: Vec<usize>,
        agents: [Agent; 2],
        caps: &MaCaps,
        gamma: impl Fn(StateId, StateId, usize, ActionId, ActionId) -> (StateId, StateId, usize),
    ) -> Result<Self> {
        let (na, nb) = (actions.len(), behaviors.len());
        let size = table_size(&agents, nb, na)
            .filter(|&n| n <= caps.max_table)
            .ok_or_else(|| PwlError::CapExceeded("joint transition table is too large".into()))?;
        let mut table = Vec::with_capacity(size);
        for q1 in 0..agents[0].states.len() as u32 {
            for q2 in 0..agents[1].states.len() as u32 {
                for b in 0..nb {
                    for a1 in 0..na as u32 {
                        for a2 in 0..na as u32 {
                            let (r1, r2, rb) = gamma(StateId(q1), StateId(q2), b, ActionId(a1), ActionId(a2));
                            table.push((r1, r2, rb as u32));
                        }
                    }
                }
            }
        }
        Self::new(actions, behaviors, initial_behaviors, agents, table, caps)
    }

    pub fn new(
        actions: SymbolTable,
        behaviors: SymbolTable,
        initial_behaviors: Vec<usize>,
        agents: [Agent; 2],
        gamma: Vec<(StateId, StateId, u32)>,
        caps: &MaCaps,
    ) -> Result<Self> {
        let (na, nb) = (actions.len(), behaviors.len());
        if nb > caps.max_behaviors {
            return Err(PwlError::CapExceeded(format!("{nb} behaviors exceeds the cap of {}", caps.max_behaviors)));
        }
        for (i, agent) in agents.iter().enumerate() {
            let n = agent.states.len();
            if n > caps.max_states {
                return Err(PwlError::CapExceeded(format!(
                    "agent {} has {n} states, cap is {}",
                    i + 1,
                    caps.max_states
                )));
            }
            if agent.initials.is_empty() {
                return Err(validation(format!("agent {} has no initial state", i + 1)));
            }
            if agent.goals.is_empty() {
                return Err(validation(format!("agent {} has an empty goal family", i + 1)));
            }
            if agent.initials.len() > caps.max_initials || agent.goals.len() > caps.max_goals {
                return Err(PwlError::CapExceeded(format!(
                    "agent {} exceeds the initial-state or goal caps",
                    i + 1
                )));
            }
            if agent.initials.iter().any(|q| q.index() >= n) {
                return Err(validation(format!("agent {} has an unknown initial state", i + 1)));
            }
            let mut names: Vec<&str> = agent.goals.iter().map(|g| g.name.as_str()).collect();
            names.sort_unstable();
            if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|g| g.is_empty()) {
                return Err(validation(format!("agent {} has duplicate or empty goal names", i + 1)));
            }
            if agent.goals.iter().any(|g| g.states.len() != n) {
                return Err(validation(format!("agent {} has a goal over the wrong state set", i + 1)));
            }
        }
        if initial_behaviors.is_empty() || initial_behaviors.iter().any(|&b| b >= nb) {
            return Err(validation("initial behaviors must be a nonempty set of declared behaviors"));
        }
        if Some(gamma.len()) != table_size(&agents, nb, na) {
            return Err(validation("non-total joint transition"));
        }
        let (n1, n2) = (agents[0].states.len(), agents[1].states.len());
        if gamma
            .iter()
            .any(|&(q1, q2, b)| q1.index() >= n1 || q2.index() >= n2 || b as usize >= nb)
        {
            return Err(validation("joint transition references unknown states or behaviors"));
        }
        let mut initial_behaviors = initial_behaviors;
        initial_behaviors.sort_unstable();
        initial_behaviors.dedup();
        Ok(MultiAgentSystem {
            actions,
            behaviors,
            initial_behaviors,
            agents,
            gamma,
        })
    }

    pub fn actions(&self) -> &SymbolTable {
        &self.actions
    }

    pub fn behaviors(&self) -> &SymbolTable {
        &self.behaviors
    }

    pub fn initial_behaviors(&self) -> &[usize] {
        &self.initial_behaviors
    }

    pub fn agent(&self, i: usize) -> &Agent {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[Agent; 2] {
        &self.agents
    }

    pub fn plan_context(&self, i: usize) -> PlanContext<'_> {
        PlanContext {
            states: &self.agents[i].states,
            actions: &self.actions,
            initials: &self.agents[i].initials,
        }
    }

    pub fn advance(&self, q1: StateId, q2: StateId, b: usize, a1: ActionId, a2: ActionId) -> (StateId, StateId, usize) {
        let na = self.actions.len();
        let n2 = self.agents[1].states.len();
        let nb = self.behaviors.len();
        let idx = (((q1.index() * n2 + q2.index()) * nb + b) * na + a1.index()) * na + a2.index();
        let (r1, r2, rb) = self.gamma[idx];
        (r1, r2, rb as usize)
    }

    pub fn from_json(text: &str, caps: &MaCaps) -> Result<Self> {
        let file: MultiAgentFile = serde_json::from_str(text).map_err(|e| PwlError::Parse(e.to_string()))?;
        let actions = SymbolTable::new("action", file.actions)?;
        let behaviors = SymbolTable::new("behavior", file.behaviors)?;
        let lookup = |table: &SymbolTable, kind: &str, name: &str| {
            table
                .get(name)
                .ok_or_else(|| validation(format!("unknown {kind} {name:?}")))
        };
        let initial_behaviors = file
            .initial_behaviors
            .iter()
            .map(|b| lookup(&behaviors, "behavior", b).map(|i| i as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut agents = Vec::with_capacity(2);
        for (i, a) in file.agents.into_iter().enumerate() {
            let states = SymbolTable::new("state", a.states)?;
            let kind = format!("state of agent {}", i + 1);
            let initials = a
                .initial
                .iter()
                .map(|q| lookup(&states, &kind, q).map(StateId))
                .collect::<Result<Vec<_>>>()?;
            let goals = a
                .goals
                .iter()
                .map(|g| {
                    let members = g
                        .states
                        .iter()
                        .map(|q| lookup(&states, &kind, q).map(StateId))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Goal::new(g.name.clone(), states.len(), members))
                })
                .collect::<Result<Vec<_>>>()?;
            agents.push(Agent { states, initials, goals });
        }
        let agents: [Agent; 2] = agents
            .try_into()
            .map_err(|_| validation("exactly two agents are required"))?;
        let (na, nb) = (actions.len(), behaviors.len());
        let size = table_size(&agents, nb, na)
            .filter(|&n| n <= caps.max_table)
            .ok_or_else(|| PwlError::CapExceeded("joint transition table is too large".into()))?;
        let n2 = agents[1].states.len();
        let mut gamma: Vec<Option<(StateId, StateId, u32)>> = vec![None; size];
        for (key, value) in &file.gamma_m {
            let k: Vec<&str> = key.split(KEY_SEPARATOR).collect();
            let v: Vec<&str> = value.split(KEY_SEPARATOR).collect();
            let ([q1, q2, b, a1, a2], [r1, r2, rb]) = (k.as_slice(), v.as_slice()) else {
                return Err(validation(format!("malformed gamma_m entry {key:?} -> {value:?}")));
            };
            let idx = ((((lookup(&agents[0].states, "state of agent 1", q1)? as usize * n2
                + lookup(&agents[1].states, "state of agent 2", q2)? as usize)
                * nb
                + lookup(&behaviors, "behavior", b)? as usize)
                * na
                + lookup(&actions, "action", a1)? as usize)
                * na)
                + lookup(&actions, "action", a2)? as usize;
            gamma[idx] = Some((
                StateId(lookup(&agents[0].states, "state of agent 1", r1)?),
                StateId(lookup(&agents[1].states, "state of agent 2", r2)?),
                lookup(&behaviors, "behavior", rb)?,
            ));
        }
        if gamma.iter().any(Option::is_none) {
            return Err(validation("non-total joint transition"));
        }
        let gamma = gamma.into_iter().map(|x| x.expect("checked total")).collect();
        Self::new(actions, behaviors, initial_behaviors, agents, gamma, caps)
    }

    pub fn to_file(&self) -> MultiAgentFile {
        let agents = self
            .agents
            .iter()
            .map(|a| AgentFile {
                states: a.states.names().to_vec(),
                initial: a.initials.iter().map(|q| a.states.name(q.0).to_string()).collect(),
                goals: a
                    .goals
                    .iter()
                    .map(|g| GoalFile {
                        name: g.name.clone(),
                        states: g.states().map(|q| a.states.name(q.0).to_string()).collect(),
                    })
                    .collect(),
            })
            .collect();
        let [s1, s2] = [&self.agents[0].states, &self.agents[1].states];
        let mut gamma_m = IndexMap::with_capacity(self.gamma.len());
        let na = self.actions.len() as u32;
        for q1 in 0..s1.len() as u32 {
            for q2 in 0..s2.len() as u32 {
                for b in 0..self.behaviors.len() {
                    for a1 in 0..na {
                        for a2 in 0..na {
                            let (r1, r2, rb) = self.advance(StateId(q1), StateId(q2), b, ActionId(a1), ActionId(a2));
                            gamma_m.insert(
                                format!(
                                    "{}|{}|{}|{}|{}",
                                    s1.name(q1),
                                    s2.name(q2),
                                    self.behaviors.name(b as u32),
                                    self.actions.name(a1),
                                    self.actions.name(a2)
                                ),
                                format!("{}|{}|{}", s1.name(r1.0), s2.name(r2.0), self.behaviors.name(rb as u32)),
                            );
                        }
                    }
                }
            }
        }
        MultiAgentFile {
            actions: self.actions.names().to_vec(),
            behaviors: self.behaviors.names().to_vec(),
            initial_behaviors: self
                .initial_behaviors
                .iter()
                .map(|&b| self.behaviors.name(b as u32).to_string())
                .collect(),
            agents,
            gamma_m,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("system serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiAgentFile {
    pub actions: Vec<String>,
    pub behaviors: Vec<String>,
    pub initial_behaviors: Vec<String>,
    pub agents: Vec<AgentFile>,
    pub gamma_m: IndexMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    pub states: Vec<String>,
    pub initial: Vec<String>,
    pub goals: Vec<GoalFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalFile {
    pub name: String,
    pub states: Vec<String>,
}

/// One agent's plan set, optionally designating which plan serves which goal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AgentPlans {
    pub plans: Vec<PlanTable>,
    /// Indexed by goal; `None` means search the whole set.
    pub designation: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiAgentPlan {
    pub agents: [AgentPlans; 2],
}

impl MultiAgentPlan {
    pub fn new(plans1: Vec<PlanTable>, plans2: Vec<PlanTable>) -> Self {
        MultiAgentPlan {
            agents: [
                AgentPlans {
                    plans: plans1,
                    designation: Vec::new(),
                },
                AgentPlans {
                    plans: plans2,
                    designation: Vec::new(),
                },
            ],
        }
    }

    pub fn from_json(text: &str, ms: &MultiAgentSystem) -> Result<Self> {
        let file: MultiAgentPlanFile = serde_json::from_str(text).map_err(|e| PwlError::Parse(e.to_string()))?;
        if file.agents.len() != 2 {
            return Err(validation("a multi-agent plan lists exactly two agents"));
        }
        let mut agents = Vec::with_capacity(2);
        for (i, a) in file.agents.iter().enumerate() {
            let ctx = ms.plan_context(i);
            let plans = a
                .plans
                .iter()
                .map(|p| PlanTable::from_file(p, &ctx))
                .collect::<Result<Vec<_>>>()?;
            let goals = &ms.agent(i).goals;
            let mut designation = vec![None; goals.len()];
            for (goal, &plan) in &a.designation {
                let g = goals
                    .iter()
                    .position(|g| &g.name == goal)
                    .ok_or_else(|| validation(format!("agent {} has no goal {goal:?}", i + 1)))?;
                designation[g] = Some(plan);
            }
            while designation.last() == Some(&None) {
                designation.pop();
            }
            agents.push(AgentPlans { plans, designation });
        }
        let agents: [AgentPlans; 2] = agents.try_into().expect("two agents");
        Ok(MultiAgentPlan { agents })
    }

    pub fn to_file(&self, ms: &MultiAgentSystem) -> MultiAgentPlanFile {
        MultiAgentPlanFile {
            agents: self
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| AgentPlansFile {
                    plans: a
                        .plans
                        .iter()
                        .map(|p| p.to_file(&ms.agent(i).states, ms.actions()))
                        .collect(),
                    designation: a
                        .designation
                        .iter()
                        .enumerate()
                        .filter_map(|(g, d)| d.map(|p| (ms.agent(i).goals[g].name.clone(), p)))
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiAgentPlanFile {
    pub agents: Vec<AgentPlansFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentPlansFile {
    pub plans: Vec<PlanFile>,
    #[serde(default)]
    pub designation: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JointOutcome {
    /// Both agents acted for the full horizon.
    Completed,
    /// The named agent's plan has no entry for its history.
    UndefinedEntry { agent: usize, history: HistoryKey },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointTrace {
    pub histories: [HistoryKey; 2],
    /// Behavior in force at each time step.
    pub behaviors: Vec<usize>,
    /// Per agent and goal, the first time step at which the agent's state
    /// was in that goal.
    pub first_visits: [Vec<Option<usize>>; 2],
    pub outcome: JointOutcome,
}

impl JointTrace {
    pub fn visited(&self, agent: usize, goal: usize) -> bool {
        self.first_visits[agent][goal].is_some()
    }

    pub fn to_json(&self, ms: &MultiAgentSystem) -> Value {
        let agents: Vec<Value> = (0..2)
            .map(|i| {
                let visits: serde_json::Map<String, Value> = ms
                    .agent(i)
                    .goals
                    .iter()
                    .zip(&self.first_visits[i])
                    .map(|(g, v)| (g.name.clone(), json!(v)))
                    .collect();
                json!({
                    "history": self.histories[i].to_names(&ms.agent(i).states, ms.actions()),
                    "first_visits": visits,
                })
            })
            .collect();
        let outcome = match &self.outcome {
            JointOutcome::Completed => json!({"kind": "completed"}),
            JointOutcome::UndefinedEntry { agent, history } => json!({
                "kind": "undefined_entry",
                "agent": agent + 1,
                "history": history.to_names(&ms.agent(*agent).states, ms.actions()),
            }),
        };
        let behaviors: Vec<&str> = self.behaviors.iter().map(|&b| ms.behaviors().name(b as u32)).collect();
        json!({"agents": agents, "behaviors": behaviors, "outcome": outcome})
    }
}

/// Runs both agents for `horizon` joint steps (they keep acting after
/// reaching a goal), recording first visits to every goal.
pub fn joint_simulate(
    ms: &MultiAgentSystem,
    plans: [&PlanTable; 2],
    initials: [StateId; 2],
    b0: usize,
    horizon: usize,
) -> Result<JointTrace> {
    for (i, q) in initials.iter().enumerate() {
        if !ms.agents[i].initials.contains(q) {
            return Err(PwlError::Index(format!("state {} is not an initial state of agent {}", q.0, i + 1)));
        }
    }
    if !ms.initial_behaviors.contains(&b0) {
        return Err(PwlError::Index(format!("behavior {b0} is not an initial behavior")));
    }
    Ok(joint_run(ms, plans, initials, b0, horizon))
}

fn joint_run(
    ms: &MultiAgentSystem,
    plans: [&PlanTable; 2],
    initials: [StateId; 2],
    b0: usize,
    horizon: usize,
) -> JointTrace {
    let mut histories = [HistoryKey::new(initials[0]), HistoryKey::new(initials[1])];
    let mut first_visits: [Vec<Option<usize>>; 2] =
        [vec![None; ms.agents[0].goals.len()], vec![None; ms.agents[1].goals.len()]];
    let record = |visits: &mut [Vec<Option<usize>>; 2], states: [StateId; 2], time: usize| {
        for i in 0..2 {
            for (g, goal) in ms.agents[i].goals.iter().enumerate() {
                if visits[i][g].is_none() && goal.contains(states[i]) {
                    visits[i][g] = Some(time);
                }
            }
        }
    };
    let (mut q, mut b) = (initials, b0);
    let mut behaviors = vec![b];
    record(&mut first_visits, q, 0);
    let mut outcome = JointOutcome::Completed;
    for time in 1..=horizon {
        let mut actions = [ActionId(0); 2];
        let mut undefined = None;
        for i in 0..2 {
            match plans[i].action(&histories[i]) {
                Some(a) => actions[i] = a,
                None => {
                    undefined = Some(i);
                    break;
                }
            }
        }
        if let Some(agent) = undefined {
            outcome = JointOutcome::UndefinedEntry {
                agent,
                history: histories[agent].clone(),
            };
            break;
        }
        let (r1, r2, rb) = ms.advance(q[0], q[1], b, actions[0], actions[1]);
        q = [r1, r2];
        b = rb;
        for i in 0..2 {
            histories[i].push(actions[i], q[i]);
        }
        behaviors.push(b);
        record(&mut first_visits, q, time);
    }
    JointTrace {
        histories,
        behaviors,
        first_visits,
        outcome,
    }
}

/// A tuple under which a candidate plan misses its goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub plan: usize,
    pub opponent_plan: usize,
    /// Initial states in agent order.
    pub initials: [StateId; 2],
    pub behavior: usize,
    pub trace: JointTrace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalVerdict {
    pub agent: usize,
    pub goal: usize,
    pub satisfied: bool,
    pub chosen_plan: Option<usize>,
    /// One blocking tuple per rejected candidate plan, in candidate order.
    pub counterexamples: Vec<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaVerdict {
    pub goals: Vec<GoalVerdict>,
    pub satisfactory: bool,
}

impl MaVerdict {
    pub fn to_json(&self, ms: &MultiAgentSystem) -> Value {
        let goals: Vec<Value> = self
            .goals
            .iter()
            .map(|g| {
                let agent = ms.agent(g.agent);
                let counterexamples: Vec<Value> = g
                    .counterexamples
                    .iter()
                    .map(|c| {
                        json!({
                            "plan": c.plan,
                            "opponent_plan": c.opponent_plan,
                            "initial": [
                                ms.agent(0).states.name(c.initials[0].0),
                                ms.agent(1).states.name(c.initials[1].0),
                            ],
                            "behavior": ms.behaviors().name(c.behavior as u32),
                            "trace": c.trace.to_json(ms),
                        })
                    })
                    .collect();
                json!({
                    "agent": g.agent + 1,
                    "goal": agent.goals[g.goal].name,
                    "satisfied": g.satisfied,
                    "chosen_plan": g.chosen_plan,
                    "counterexamples": counterexamples,
                })
            })
            .collect();
        json!({"satisfactory": self.satisfactory, "goals": goals})
    }
}

fn check_plans(ms: &MultiAgentSystem, mp: &MultiAgentPlan) -> Result<()> {
    for i in 0..2 {
        let a = &mp.agents[i];
        if a.plans.is_empty() {
            return Err(validation(format!("agent {} has an empty plan set", i + 1)));
        }
        for plan in &a.plans {
            plan.check(&ms.plan_context(i))?;
        }
        if a.designation.len() > ms.agents[i].goals.len() {
            return Err(validation(format!("agent {} designates plans for unknown goals", i + 1)));
        }
        if a.designation.iter().flatten().any(|&p| p >= a.plans.len()) {
            return Err(validation(format!("agent {} designates a nonexistent plan", i + 1)));
        }
    }
    Ok(())
}

/// Checks every goal of every agent against the plan sets, reporting the
/// witnessing plan or, for each rejected candidate, a blocking tuple.
pub fn ma_verify(ms: &MultiAgentSystem, mp: &MultiAgentPlan, horizon: usize) -> Result<MaVerdict> {
    check_plans(ms, mp)?;
    let mut goals = Vec::new();
    for i in 0..2 {
        let own = &mp.agents[i];
        for g in 0..ms.agents[i].goals.len() {
            let candidates: Vec<usize> = match own.designation.get(g).copied().flatten() {
                Some(p) => vec![p],
                None => (0..own.plans.len()).collect(),
            };
            let mut verdict = GoalVerdict {
                agent: i,
                goal: g,
                satisfied: false,
                chosen_plan: None,
                counterexamples: Vec::new(),
            };
            for p in candidates {
                match first_counterexample(ms, mp, i, g, p, horizon) {
                    None => {
                        verdict.satisfied = true;
                        verdict.chosen_plan = Some(p);
                        break;
                    }
                    Some(c) => verdict.counterexamples.push(c),
                }
            }
            goals.push(verdict);
        }
    }
    let satisfactory = goals.iter().all(|g| g.satisfied);
    Ok(MaVerdict { goals, satisfactory })
}

fn first_counterexample(
    ms: &MultiAgentSystem,
    mp: &MultiAgentPlan,
    agent: usize,
    goal: usize,
    plan: usize,
    horizon: usize,
) -> Option<Counterexample> {
    let other = 1 - agent;
    for (opp, opp_plan) in mp.agents[other].plans.iter().enumerate() {
        for &own_init in &ms.agents[agent].initials {
            for &opp_init in &ms.agents[other].initials {
                for &b0 in &ms.initial_behaviors {
                    let mut plans = [opp_plan; 2];
                    plans[agent] = &mp.agents[agent].plans[plan];
                    let mut initials = [opp_init; 2];
                    initials[agent] = own_init;
                    let trace = joint_run(ms, plans, initials, b0, horizon);
                    if !trace.visited(agent, goal) {
                        return Some(Counterexample {
                            plan,
                            opponent_plan: opp,
                            initials,
                            behavior: b0,
                            trace,
                        });
                    }
                }
            }
        }
    }
    None
}

// Component layout of transformed states: (q, c) has index q * (n + 2) + c
// with c = 0 for start, 1..=n for "observed goal k", n + 1 for "goal
// reached"; the single fail state comes last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Component {
    Start,
    Observed(usize),
    Reached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Local {
    Fail,
    At(StateId, Component),
}

struct Layout {
    base_states: usize,
    goals: usize,
}

impl Layout {
    fn width(&self) -> usize {
        self.goals + 2
    }

    fn fail(&self) -> StateId {
        StateId((self.base_states * self.width()) as u32)
    }

    fn encode(&self, local: Local) -> StateId {
        match local {
            Local::Fail => self.fail(),
            Local::At(q, c) => {
                let c = match c {
                    Component::Start => 0,
                    Component::Observed(k) => k + 1,
                    Component::Reached => self.goals + 1,
                };
                StateId((q.index() * self.width() + c) as u32)
            }
        }
    }

    fn decode(&self, x: StateId) -> Local {
        if x == self.fail() {
            return Local::Fail;
        }
        let (q, c) = (x.index() / self.width(), x.index() % self.width());
        let c = match c {
            0 => Component::Start,
            c if c == self.goals + 1 => Component::Reached,
            c => Component::Observed(c - 1),
        };
        Local::At(StateId(q as u32), c)
    }
}

/// Name of the action agent `i` (0-based) must play first in a
/// [`reduce_goals`] system.
pub fn observe_action_name(agent: usize) -> String {
    format!("observe-goal-{}", agent + 1)
}

/// Rewrites a system so that each agent has a single goal: the goal identity
/// becomes part of the hidden behavior and is revealed to its agent by a
/// mandatory first action `observe-goal-i`.
///
/// Agent `i`'s states become `Q_i x {start, observe:g (per goal), goal}` plus
/// one absorbing `@fail` state; behaviors become `B x G_1 x G_2`. Any first
/// action other than the observation, or an observation later on, sends that
/// agent to `@fail`, and while either agent is failed the other one is
/// frozen. Plans of the rewritten system need one more step than plans of
/// the original.
pub fn reduce_goals(ms: &MultiAgentSystem, caps: &MaCaps) -> Result<MultiAgentSystem> {
    let layouts = [0, 1].map(|i| Layout {
        base_states: ms.agents[i].states.len(),
        goals: ms.agents[i].goals.len(),
    });
    let (g1, g2) = (layouts[0].goals, layouts[1].goals);
    let nb = ms.behaviors.len();
    let new_behaviors = nb
        .checked_mul(g1)
        .and_then(|x| x.checked_mul(g2))
        .filter(|&x| x <= caps.max_behaviors)
        .ok_or_else(|| PwlError::CapExceeded("transformed behavior count exceeds the cap".into()))?;
    for (i, l) in layouts.iter().enumerate() {
        let n = l.base_states * l.width() + 1;
        if n > caps.max_states {
            return Err(PwlError::CapExceeded(format!(
                "agent {} would have {n} states, cap is {}",
                i + 1,
                caps.max_states
            )));
        }
    }

    let base_actions = ms.actions.len();
    let actions = SymbolTable::new(
        "action",
        ms.actions
            .names()
            .iter()
            .cloned()
            .chain([observe_action_name(0), observe_action_name(1)]),
    )?;
    let observe = [ActionId(base_actions as u32), ActionId(base_actions as u32 + 1)];

    let mut behavior_names = Vec::with_capacity(new_behaviors);
    for b in ms.behaviors.names() {
        for x in &ms.agents[0].goals {
            for y in &ms.agents[1].goals {
                behavior_names.push(format!("{b}/{}/{}", x.name, y.name));
            }
        }
    }
    let behaviors = SymbolTable::new("behavior", behavior_names)?;
    let encode_b = |b: usize, k1: usize, k2: usize| (b * g1 + k1) * g2 + k2;
    let decode_b = |x: usize| (x / (g1 * g2), (x / g2) % g1, x % g2);
    let initial_behaviors = ms
        .initial_behaviors
        .iter()
        .flat_map(|&b| (0..g1).flat_map(move |k1| (0..g2).map(move |k2| encode_b(b, k1, k2))))
        .collect();

    let mut agents = Vec::with_capacity(2);
    for (i, l) in layouts.iter().enumerate() {
        let src = &ms.agents[i];
        let mut names = Vec::with_capacity(l.base_states * l.width() + 1);
        for q in src.states.names() {
            names.push(format!("{q}@start"));
            for g in &src.goals {
                names.push(format!("{q}@observe:{}", g.name));
            }
            names.push(format!("{q}@goal"));
        }
        names.push("@fail".to_string());
        let states = SymbolTable::new("state", names)?;
        let initials = src
            .initials
            .iter()
            .map(|&q| l.encode(Local::At(q, Component::Start)))
            .collect();
        let reached = (0..l.base_states as u32).map(|q| l.encode(Local::At(StateId(q), Component::Reached)));
        let goal = Goal::new("goal", states.len(), reached);
        agents.push(Agent {
            states,
            initials,
            goals: vec![goal],
        });
    }
    let agents: [Agent; 2] = agents.try_into().expect("two agents");

    #[derive(Clone, Copy)]
    enum Mode {
        Failing,
        Observing,
        Moving,
    }

    let gamma = |x1: StateId, x2: StateId, bx: usize, a1: ActionId, a2: ActionId| {
        let (b, k1, k2) = decode_b(bx);
        let hidden_goal = [k1, k2];
        let locals = [layouts[0].decode(x1), layouts[1].decode(x2)];
        let acts = [a1, a2];
        let modes: [Mode; 2] = [0, 1].map(|i| match locals[i] {
            Local::Fail => Mode::Failing,
            Local::At(_, Component::Start) if acts[i] == observe[i] => Mode::Observing,
            Local::At(_, Component::Start) => Mode::Failing,
            Local::At(..) if acts[i].index() < base_actions => Mode::Moving,
            Local::At(..) => Mode::Failing,
        });
        let settle = |i: usize, q: StateId, c: Component| {
            let c = match c {
                Component::Observed(k) if ms.agents[i].goals[k].contains(q) => Component::Reached,
                c => c,
            };
            layouts[i].encode(Local::At(q, c))
        };
        if let ([Mode::Moving, Mode::Moving], [Local::At(q1, c1), Local::At(q2, c2)]) = (modes, locals) {
            let (r1, r2, rb) = ms.advance(q1, q2, b, a1, a2);
            return (settle(0, r1, c1), settle(1, r2, c2), encode_b(rb, k1, k2));
        }
        let next: [StateId; 2] = [0, 1].map(|i| match (modes[i], locals[i]) {
            (Mode::Failing, _) | (_, Local::Fail) => layouts[i].fail(),
            (Mode::Observing, Local::At(q, _)) => settle(i, q, Component::Observed(hidden_goal[i])),
            (Mode::Moving, Local::At(q, c)) => layouts[i].encode(Local::At(q, c)),
        });
        (next[0], next[1], bx)
    };
    MultiAgentSystem::from_fn(actions, behaviors, initial_behaviors, agents, caps, gamma)
}

/// Hard limits of [`ma_brute_force_exists`].
pub const BRUTE_FORCE_MAX_HORIZON: usize = 3;
pub const BRUTE_FORCE_MAX_STATES: usize = 64;
pub const BRUTE_FORCE_MAX_ACTIONS: usize = 8;

/// Own next states paired with their child nodes.
type Branches = Vec<(StateId, usize)>;

/// Every own history an agent can observe within the horizon when the other
/// agent may play anything, as a tree indexed by node. Actions with identical
/// joint effects at a node are merged into their first representative.
struct HistoryTree {
    /// `children[node]` lists each kept action with its branches.
    children: Vec<Vec<(ActionId, Branches)>>,
    roots: Vec<(StateId, usize)>,
}

type Config = ([StateId; 2], usize);

impl HistoryTree {
    fn build(ms: &MultiAgentSystem, agent: usize, horizon: usize) -> Self {
        let other = 1 - agent;
        let mut tree = HistoryTree {
            children: Vec::new(),
            roots: Vec::new(),
        };
        for &own in &ms.agents[agent].initials {
            let mut configs = Vec::new();
            for &opp in &ms.agents[other].initials {
                for &b in &ms.initial_behaviors {
                    let mut q = [opp; 2];
                    q[agent] = own;
                    configs.push((q, b));
                }
            }
            let root = tree.expand(ms, agent, configs, horizon);
            tree.roots.push((own, root));
        }
        tree
    }

    fn expand(&mut self, ms: &MultiAgentSystem, agent: usize, configs: Vec<Config>, remaining: usize) -> usize {
        let node = self.children.len();
        self.children.push(Vec::new());
        if remaining == 0 {
            return node;
        }
        let na = ms.actions.len() as u32;
        let mut seen: Vec<Vec<Config>> = Vec::new();
        let mut per_action = Vec::new();
        for a in (0..na).map(ActionId) {
            let mut effects = Vec::with_capacity(configs.len() * na as usize);
            for &(q, b) in &configs {
                for x in (0..na).map(ActionId) {
                    let mut acts = [x; 2];
                    acts[agent] = a;
                    let (r1, r2, rb) = ms.advance(q[0], q[1], b, acts[0], acts[1]);
                    effects.push(([r1, r2], rb));
                }
            }
            if seen.contains(&effects) {
                continue;
            }
            let mut groups: BTreeMap<StateId, Vec<Config>> = BTreeMap::new();
            for &next in &effects {
                let group = groups.entry(next.0[agent]).or_default();
                if !group.contains(&next) {
                    group.push(next);
                }
            }
            seen.push(effects);
            let kids = groups
                .into_iter()
                .map(|(q, cfgs)| (q, self.expand(ms, agent, cfgs, remaining - 1)))
                .collect();
            per_action.push((a, kids));
        }
        self.children[node] = per_action;
        node
    }

    /// Number of distinct plans rooted at `node`, saturating.
    fn count(&self, node: usize) -> u128 {
        let per_action = &self.children[node];
        if per_action.is_empty() {
            return 1;
        }
        per_action
            .iter()
            .map(|(_, kids)| {
                kids.iter()
                    .fold(1u128, |acc, &(_, c)| acc.saturating_mul(self.count(c)))
            })
            .fold(0u128, u128::saturating_add)
    }

    /// Enumerates every plan as a per-node choice vector (`u8::MAX` marks
    /// nodes the plan never reaches).
    fn enumerate(&self) -> Vec<Vec<u8>> {
        let mut plans = vec![vec![u8::MAX; self.children.len()]];
        for &(_, root) in &self.roots {
            plans = plans.into_iter().flat_map(|p| self.fill(root, p)).collect();
        }
        plans
    }

    fn fill(&self, node: usize, plan: Vec<u8>) -> Vec<Vec<u8>> {
        let per_action = &self.children[node];
        if per_action.is_empty() {
            return vec![plan];
        }
        let mut out = Vec::new();
        for (choice, (_, kids)) in per_action.iter().enumerate() {
            let mut partial = plan.clone();
            partial[node] = choice as u8;
            let mut acc = vec![partial];
            for &(_, child) in kids {
                acc = acc.into_iter().flat_map(|p| self.fill(child, p)).collect();
            }
            out.extend(acc);
        }
        out
    }

    fn root(&self, q: StateId) -> usize {
        self.roots.iter().find(|(r, _)| *r == q).expect("initial state has a root").1
    }

    fn action(&self, node: usize, choice: u8) -> ActionId {
        self.children[node][choice as usize].0
    }

    fn child(&self, node: usize, choice: u8, q: StateId) -> usize {
        self.children[node][choice as usize]
            .1
            .iter()
            .find(|(r, _)| *r == q)
            .expect("tree covers every reachable observation")
            .1
    }
}

/// Exhaustive existence check for satisfactory multi-agent plans whose
/// branches take `horizon` joint steps, by enumerating every plan of each
/// agent over the histories it can observe. Exact, and only meant for tiny
/// instances: refuses horizons above 3, more than 64 states per agent, more
/// than 8 actions, or more than `plan_cap` plans for either agent.
///
/// Restricting each agent to at most one plan per goal loses nothing, since
/// extra plans only add obligations for the other agent.
pub fn ma_brute_force_exists(ms: &MultiAgentSystem, horizon: usize, plan_cap: usize) -> Result<bool> {
    if horizon > BRUTE_FORCE_MAX_HORIZON {
        return Err(PwlError::SizeLimit(format!("horizon {horizon} exceeds {BRUTE_FORCE_MAX_HORIZON}")));
    }
    if ms.agents.iter().any(|a| a.states.len() > BRUTE_FORCE_MAX_STATES)
        || ms.actions.len() > BRUTE_FORCE_MAX_ACTIONS
        || ms.agents.iter().any(|a| a.goals.len() > 64)
    {
        return Err(PwlError::SizeLimit("instance too large for brute force".into()));
    }
    let trees = [HistoryTree::build(ms, 0, horizon), HistoryTree::build(ms, 1, horizon)];
    for (i, tree) in trees.iter().enumerate() {
        let count = tree
            .roots
            .iter()
            .fold(1u128, |acc, &(_, r)| acc.saturating_mul(tree.count(r)));
        if count > plan_cap as u128 {
            return Err(PwlError::SizeLimit(format!(
                "agent {} has {count} candidate plans, cap is {plan_cap}",
                i + 1
            )));
        }
    }
    let plans = [trees[0].enumerate(), trees[1].enumerate()];
    let (n1, n2) = (plans[0].len(), plans[1].len());

    // wins[i][p1 * n2 + p2]: goals of agent i reached under every initial
    // combination when agent 1 plays p1 and agent 2 plays p2.
    let mut wins = [vec![0u64; n1 * n2], vec![0u64; n1 * n2]];
    for p1 in 0..n1 {
        for p2 in 0..n2 {
            let mut masks = [u64::MAX; 2];
            'combos: for &i1 in &ms.agents[0].initials {
                for &i2 in &ms.agents[1].initials {
                    for &b0 in &ms.initial_behaviors {
                        let reached = tree_run(ms, &trees, [&plans[0][p1], &plans[1][p2]], [i1, i2], b0, horizon);
                        masks[0] &= reached[0];
                        masks[1] &= reached[1];
                        if masks == [0, 0] {
                            break 'combos;
                        }
                    }
                }
            }
            wins[0][p1 * n2 + p2] = masks[0];
            wins[1][p1 * n2 + p2] = masks[1];
        }
    }

    // Enumerate agent 2's per-goal choice f, then look for agent 1 plans.
    let g1 = ms.agents[0].goals.len();
    let g2 = ms.agents[1].goals.len();
    let combos = (n2 as u128).saturating_pow(g2 as u32);
    if combos > 50_000_000 {
        return Err(PwlError::SizeLimit("too many plan-set combinations".into()));
    }
    let mut f = vec![0usize; g2];
    loop {
        let mut image = f.clone();
        image.sort_unstable();
        image.dedup();
        let ok = (0..g1).all(|k| {
            (0..n1).any(|p1| {
                image.iter().all(|&p2| wins[0][p1 * n2 + p2] >> k & 1 == 1)
                    && f.iter().enumerate().all(|(k2, &p2)| wins[1][p1 * n2 + p2] >> k2 & 1 == 1)
            })
        });
        if ok {
            return Ok(true);
        }
        // Next assignment in odometer order.
        let mut pos = 0;
        loop {
            if pos == g2 {
                return Ok(false);
            }
            f[pos] += 1;
            if f[pos] < n2 {
                break;
            }
            f[pos] = 0;
            pos += 1;
        }
    }
}

/// Goal bitmasks each agent visits when both follow their enumerated plans.
fn tree_run(
    ms: &MultiAgentSystem,
    trees: &[HistoryTree; 2],
    plans: [&Vec<u8>; 2],
    initials: [StateId; 2],
    b0: usize,
    horizon: usize,
) -> [u64; 2] {
    let visit = |q: [StateId; 2], masks: &mut [u64; 2]| {
        for i in 0..2 {
            for (g, goal) in ms.agents[i].goals.iter().enumerate() {
                if goal.contains(q[i]) {
                    masks[i] |= 1 << g;
                }
            }
        }
    };
    let mut masks = [0u64; 2];
    let mut q = initials;
    let mut b = b0;
    let mut nodes = [trees[0].root(initials[0]), trees[1].root(initials[1])];
    visit(q, &mut masks);
    for _ in 0..horizon {
        let choices = [plans[0][nodes[0]], plans[1][nodes[1]]];
        let (a1, a2) = (trees[0].action(nodes[0], choices[0]), trees[1].action(nodes[1], choices[1]));
        let (r1, r2, rb) = ms.advance(q[0], q[1], b, a1, a2);
        q = [r1, r2];
        b = rb;
        nodes = [trees[0].child(nodes[0], choices[0], r1), trees[1].child(nodes[1], choices[1], r2)];
        visit(q, &mut masks);
    }
    masks
}

/// A plan for agent `agent` that plays `sequence[k]` at step `k` whatever it
/// observes. It lists every own history, so its size grows as `|Q|^k`.
pub fn open_loop_plan(ms: &MultiAgentSystem, agent: usize, sequence: &[ActionId]) -> PlanTable {
    let nq = ms.agents[agent].states.len() as u32;
    let mut plan = PlanTable::new(sequence.len());
    let mut frontier: Vec<HistoryKey> = ms.agents[agent].initials.iter().map(|&q| HistoryKey::new(q)).collect();
    for &a in sequence {
        let mut next = Vec::with_capacity(frontier.len() * nq as usize);
        for h in frontier {
            for q in 0..nq {
                next.push(h.extended(a, StateId(q)));
            }
            plan.insert(h, a);
        }
        frontier = next;
    }
    plan
}
