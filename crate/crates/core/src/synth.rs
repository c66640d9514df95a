//! Plan existence and construction by depth-bounded AND-OR search over
//! belief nodes `(state, knowledge)`.
//!
//! A node is solved with budget `d` iff its state is a goal, or `d > 0` and
//! some action has every successor solved with budget `d - 1`. Solvability is
//! monotone in the budget, so the memo keeps, per node, the smallest budget
//! known to succeed and the largest budget known to fail.
//!
//! Worst-case time is exponential; deciding plan existence is NP-hard.

use std::collections::HashMap;

use crate::dynamics::{belief_successors, BeliefNode, Dynamics};
use crate::model::{ActionId, BehaviorSet, HistoryKey, PwlSystem, StateId};
use crate::plan::PlanTable;

/// Splits `node` by the observable outcome of `a` in a basic system.
pub fn successors(sys: &PwlSystem, node: &BeliefNode, a: ActionId) -> Vec<BeliefNode> {
    belief_successors(sys, node, a)
}

/// The horizon that makes search complete for a basic system: `s * t`.
pub fn default_horizon(sys: &PwlSystem) -> usize {
    sys.num_behaviors() * sys.num_states()
}

#[derive(Debug, Clone, Copy, Default)]
struct Bounds {
    min_success: Option<usize>,
    max_fail: Option<usize>,
}

/// Counters reported by a search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Node expansions that were not answered by the memo.
    pub explored: u64,
}

pub struct Search<'a, D: Dynamics + ?Sized> {
    dynamics: &'a D,
    memo: HashMap<(StateId, BehaviorSet), Bounds>,
    stats: SearchStats,
}

impl<'a, D: Dynamics + ?Sized> Search<'a, D> {
    pub fn new(dynamics: &'a D) -> Self {
        Search {
            dynamics,
            memo: HashMap::new(),
            stats: SearchStats::default(),
        }
    }

    pub fn stats(&self) -> SearchStats {
        self.stats
    }

    /// With a static hidden component, any solvable node has a solution of
    /// depth below `|K| * t` (repeated `(state, knowledge)` labels along a
    /// branch can be spliced out), so larger budgets add nothing.
    fn effective_budget(&self, node: &BeliefNode, budget: usize) -> usize {
        if self.dynamics.static_hidden() {
            budget.min(node.knowledge.len() * self.dynamics.num_states())
        } else {
            budget
        }
    }

    pub fn solvable(&mut self, node: &BeliefNode, budget: usize) -> bool {
        if self.dynamics.is_goal(node.state) {
            return true;
        }
        if budget == 0 {
            return false;
        }
        let budget = self.effective_budget(node, budget);
        let key = (node.state, node.knowledge.clone());
        if let Some(bounds) = self.memo.get(&key) {
            if bounds.min_success.is_some_and(|m| budget >= m) {
                return true;
            }
            if bounds.max_fail.is_some_and(|m| budget <= m) {
                return false;
            }
        }
        self.stats.explored += 1;
        let solved = (0..self.dynamics.num_actions() as u32)
            .map(ActionId)
            .any(|a| self.action_solves(node, a, budget));
        let bounds = self.memo.entry(key).or_default();
        if solved {
            bounds.min_success = Some(bounds.min_success.map_or(budget, |m| m.min(budget)));
        } else {
            bounds.max_fail = Some(bounds.max_fail.map_or(budget, |m| m.max(budget)));
        }
        solved
    }

    fn action_solves(&mut self, node: &BeliefNode, a: ActionId, budget: usize) -> bool {
        belief_successors(self.dynamics, node, a)
            .iter()
            .all(|child| self.solvable(child, budget - 1))
    }

    /// First action, in declaration order, all of whose successors are
    /// solvable with one less unit of budget.
    fn choose(&mut self, node: &BeliefNode, budget: usize) -> Option<ActionId> {
        (0..self.dynamics.num_actions() as u32)
            .map(ActionId)
            .find(|&a| self.action_solves(node, a, budget))
    }

    fn extract(&mut self, node: BeliefNode, history: HistoryKey, budget: usize, plan: &mut PlanTable) {
        if self.dynamics.is_goal(node.state) {
            return;
        }
        let budget = self.effective_budget(&node, budget);
        let a = self.choose(&node, budget).expect("node was solvable");
        plan.insert(history.clone(), a);
        for child in belief_successors(self.dynamics, &node, a) {
            let h = history.extended(a, child.state);
            self.extract(child, h, budget - 1, plan);
        }
    }

    /// A satisfactory plan with every branch at most `horizon` actions, if one exists.
    pub fn plan(&mut self, horizon: usize) -> Option<PlanTable> {
        let root = BeliefNode::root(self.dynamics);
        if !self.solvable(&root, horizon) {
            return None;
        }
        let mut plan = PlanTable::new(horizon);
        let history = HistoryKey::new(root.state);
        self.extract(root, history, horizon, &mut plan);
        Some(plan)
    }
}

/// True iff a satisfactory plan with branches of at most `horizon` actions exists.
pub fn exists_plan(sys: &PwlSystem, horizon: usize) -> bool {
    exists_plan_dynamics(sys, horizon)
}

pub fn exists_plan_dynamics<D: Dynamics + ?Sized>(dynamics: &D, horizon: usize) -> bool {
    let mut search = Search::new(dynamics);
    let root = BeliefNode::root(dynamics);
    search.solvable(&root, horizon)
}

/// Constructs a satisfactory plan within `horizon`, trying actions in
/// declaration order and expanding successors in state order.
pub fn synthesize(sys: &PwlSystem, horizon: usize) -> Option<PlanTable> {
    synthesize_with_stats(sys, horizon).0
}

pub fn synthesize_with_stats<D: Dynamics + ?Sized>(
    dynamics: &D,
    horizon: usize,
) -> (Option<PlanTable>, SearchStats) {
    let mut search = Search::new(dynamics);
    let plan = search.plan(horizon);
    (plan, search.stats())
}
