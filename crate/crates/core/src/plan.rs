//! Conditional plans as decision tables keyed by the full observed history.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{belief_successors, BeliefNode, Dynamics};
use crate::error::{validation, PwlError, Result};
use crate::model::{ActionId, BehaviorSet, HistoryKey, StateId, SymbolTable};
use crate::verify::simulate_dynamics;

/// Finite map from observed histories to actions, plus the horizon `H`
/// (maximum number of actions on any branch).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlanTable {
    horizon: usize,
    entries: BTreeMap<HistoryKey, ActionId>,
}

/// Symbols and admissible starting states a plan is interpreted against.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub states: &'a SymbolTable,
    pub actions: &'a SymbolTable,
    pub initials: &'a [StateId],
}

impl PlanTable {
    pub fn new(horizon: usize) -> Self {
        PlanTable {
            horizon,
            entries: BTreeMap::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, history: HistoryKey, action: ActionId) -> Option<ActionId> {
        self.entries.insert(history, action)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&HistoryKey, ActionId)> + '_ {
        self.entries.iter().map(|(h, &a)| (h, a))
    }

    /// Exact-match lookup; `None` means the plan is undefined on `h`.
    pub fn action(&self, h: &HistoryKey) -> Option<ActionId> {
        self.entries.get(h).copied()
    }

    pub(crate) fn action_raw(&self, h: &[u32]) -> Option<ActionId> {
        self.entries.get(h).copied()
    }

    /// Longest branch, in actions, among the table's keys (one more than the
    /// longest key since each key schedules an action).
    pub fn depth(&self) -> usize {
        self.entries.keys().map(|h| h.len() + 1).max().unwrap_or(0)
    }

    /// Checks every key against the given symbols and starting states.
    pub fn check(&self, ctx: &PlanContext<'_>) -> Result<()> {
        for (h, a) in &self.entries {
            if !ctx.initials.contains(&h.first_state()) {
                return Err(validation(format!(
                    "plan entry {:?} does not start at an initial state",
                    h.as_raw()
                )));
            }
            if h.states().any(|q| q.index() >= ctx.states.len())
                || h.actions().chain([*a]).any(|a| a.index() >= ctx.actions.len())
            {
                return Err(validation(format!(
                    "plan entry {:?} references unknown symbols",
                    h.as_raw()
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, ctx: &PlanContext<'_>) -> Result<Self> {
        let file: PlanFile = serde_json::from_str(text).map_err(|e| PwlError::Parse(e.to_string()))?;
        Self::from_file(&file, ctx)
    }

    pub fn from_file(file: &PlanFile, ctx: &PlanContext<'_>) -> Result<Self> {
        let mut plan = PlanTable::new(file.horizon);
        for entry in &file.entries {
            let h = HistoryKey::from_names(&entry.history, ctx.states, ctx.actions)?;
            if h.len() > file.horizon {
                return Err(validation(format!(
                    "history {:?} is longer than the horizon {}",
                    entry.history, file.horizon
                )));
            }
            let a = ctx
                .actions
                .get(&entry.action)
                .ok_or_else(|| validation(format!("unknown action {:?}", entry.action)))?;
            if plan.insert(h, ActionId(a)).is_some() {
                return Err(validation(format!("duplicate plan entry {:?}", entry.history)));
            }
        }
        plan.check(ctx)?;
        Ok(plan)
    }

    pub fn to_file(&self, states: &SymbolTable, actions: &SymbolTable) -> PlanFile {
        PlanFile {
            horizon: self.horizon,
            entries: self
                .entries
                .iter()
                .map(|(h, a)| PlanEntry {
                    history: h.to_names(states, actions),
                    action: actions.name(a.0).to_string(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self, states: &SymbolTable, actions: &SymbolTable) -> String {
        serde_json::to_string_pretty(&self.to_file(states, actions)).expect("plan serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub horizon: usize,
    pub entries: Vec<PlanEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub history: Vec<String>,
    pub action: String,
}

/// Keeps exactly the entries consulted when running `plan` for up to its
/// horizon from every admissible start. The result has at most
/// `|starts| * H` entries.
pub fn canonicalize_plan<D: Dynamics + ?Sized>(dynamics: &D, plan: &PlanTable) -> Result<PlanTable> {
    let initials = [dynamics.initial_state()];
    plan.check(&PlanContext {
        states: dynamics.states(),
        actions: dynamics.actions(),
        initials: &initials,
    })?;
    let mut out = PlanTable::new(plan.horizon);
    for hidden in dynamics.initial_hidden() {
        let trace = simulate_dynamics(dynamics, plan, hidden, plan.horizon);
        // Every step of the trace was a successful lookup; an undefined
        // entry ends the trace without adding a step.
        let raw = trace.history.as_raw();
        for k in 0..trace.history.len() {
            let prefix = &raw[..2 * k + 1];
            let action = plan.action_raw(prefix).expect("consulted entries exist");
            out.insert(HistoryKey::from_raw(prefix.to_vec()), action);
        }
    }
    Ok(out)
}

/// Plays `sequence[k]` at every non-goal history with `k` actions, for
/// `k < min(|sequence|, H)`.
pub fn plan_from_action_sequence<D: Dynamics + ?Sized>(
    sequence: &[ActionId],
    dynamics: &D,
    horizon: usize,
) -> PlanTable {
    let mut plan = PlanTable::new(horizon);
    let steps = sequence.len().min(horizon);
    for hidden in dynamics.initial_hidden() {
        let mut h = HistoryKey::new(dynamics.initial_state());
        let (mut q, mut b) = (dynamics.initial_state(), hidden);
        for &a in &sequence[..steps] {
            if dynamics.is_goal(q) {
                break;
            }
            plan.insert(h.clone(), a);
            (q, b) = dynamics.advance(q, b, a);
            h.push(a, q);
        }
    }
    plan
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    Goal,
    Undefined,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeChoice {
    Leaf(LeafKind),
    /// Chosen action and one child per observed next state, in state order.
    Act(ActionId, Vec<TreeNode>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub state: StateId,
    pub knowledge: BehaviorSet,
    pub choice: TreeChoice,
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match &self.choice {
            TreeChoice::Leaf(_) => 0,
            TreeChoice::Act(_, children) => 1 + children.iter().map(TreeNode::depth).max().unwrap_or(0),
        }
    }

    pub fn to_json(&self, dynamics: &dyn Dynamics) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        obj.insert(
            "state".into(),
            dynamics.states().name(self.state.0).into(),
        );
        obj.insert(
            "knowledge".into(),
            self.knowledge
                .iter()
                .map(|b| serde_json::Value::from(dynamics.hidden_names()[b].as_str()))
                .collect(),
        );
        match &self.choice {
            TreeChoice::Leaf(kind) => {
                obj.insert("leaf".into(), serde_json::to_value(kind).expect("leaf kind"));
            }
            TreeChoice::Act(a, children) => {
                obj.insert("action".into(), dynamics.actions().name(a.0).into());
                obj.insert(
                    "children".into(),
                    children.iter().map(|c| c.to_json(dynamics)).collect(),
                );
            }
        }
        serde_json::Value::Object(obj)
    }
}

/// Renders the plan as the decision tree it induces over belief nodes.
pub fn decision_tree_view<D: Dynamics + ?Sized>(dynamics: &D, plan: &PlanTable) -> TreeNode {
    fn build<D: Dynamics + ?Sized>(
        dynamics: &D,
        plan: &PlanTable,
        h: &mut HistoryKey,
        node: BeliefNode,
    ) -> TreeNode {
        let choice = if dynamics.is_goal(node.state) {
            TreeChoice::Leaf(LeafKind::Goal)
        } else if h.len() >= plan.horizon() {
            TreeChoice::Leaf(LeafKind::Horizon)
        } else {
            match plan.action(h) {
                None => TreeChoice::Leaf(LeafKind::Undefined),
                Some(a) => {
                    let children = belief_successors(dynamics, &node, a)
                        .into_iter()
                        .map(|child| {
                            let mut next = h.extended(a, child.state);
                            build(dynamics, plan, &mut next, child)
                        })
                        .collect();
                    TreeChoice::Act(a, children)
                }
            }
        };
        TreeNode {
            state: node.state,
            knowledge: node.knowledge,
            choice,
        }
    }
    let root = BeliefNode::root(dynamics);
    build(dynamics, plan, &mut HistoryKey::new(root.state), root)
}
