//! The interface shared by basic and extended systems: an observable state
//! plus a hidden behavior component that the agent never sees directly.

use crate::model::{ActionId, BehaviorSet, PwlSystem, StateId, SymbolTable};

pub trait Dynamics {
    fn states(&self) -> &SymbolTable;
    fn actions(&self) -> &SymbolTable;
    fn hidden_names(&self) -> &[String];
    fn initial_state(&self) -> StateId;
    /// Hidden values the adversary may start from, in increasing order.
    fn initial_hidden(&self) -> Vec<usize>;
    /// Next observable state and next hidden value.
    fn advance(&self, q: StateId, hidden: usize, a: ActionId) -> (StateId, usize);
    fn is_goal(&self, q: StateId) -> bool;

    /// True when the hidden component never changes (basic systems).
    fn static_hidden(&self) -> bool {
        false
    }

    fn num_states(&self) -> usize {
        self.states().len()
    }

    fn num_actions(&self) -> usize {
        self.actions().len()
    }

    fn num_hidden(&self) -> usize {
        self.hidden_names().len()
    }
}

impl Dynamics for PwlSystem {
    fn states(&self) -> &SymbolTable {
        PwlSystem::states(self)
    }

    fn actions(&self) -> &SymbolTable {
        PwlSystem::actions(self)
    }

    fn hidden_names(&self) -> &[String] {
        self.behavior_names()
    }

    fn initial_state(&self) -> StateId {
        self.initial()
    }

    fn initial_hidden(&self) -> Vec<usize> {
        (0..self.num_behaviors()).collect()
    }

    fn advance(&self, q: StateId, hidden: usize, a: ActionId) -> (StateId, usize) {
        (self.transition(hidden, q, a), hidden)
    }

    fn is_goal(&self, q: StateId) -> bool {
        PwlSystem::is_goal(self, q)
    }

    fn static_hidden(&self) -> bool {
        true
    }
}

/// A search node: the current observable state and the hidden values still
/// consistent with everything observed so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefNode {
    pub state: StateId,
    pub knowledge: BehaviorSet,
}

impl BeliefNode {
    pub fn root<D: Dynamics + ?Sized>(dynamics: &D) -> Self {
        BeliefNode {
            state: dynamics.initial_state(),
            knowledge: BehaviorSet::from_indices(dynamics.num_hidden(), dynamics.initial_hidden()),
        }
    }
}

/// Splits a belief node by the observable outcome of `a`. Successors come
/// back in increasing state order and their knowledge sets partition the
/// input (for static hidden components; otherwise they hold the advanced
/// hidden values).
pub fn belief_successors<D: Dynamics + ?Sized>(
    dynamics: &D,
    node: &BeliefNode,
    a: ActionId,
) -> Vec<BeliefNode> {
    let mut out: Vec<BeliefNode> = Vec::new();
    for h in node.knowledge.iter() {
        let (q, h2) = dynamics.advance(node.state, h, a);
        match out.binary_search_by_key(&q, |n| n.state) {
            Ok(i) => out[i].knowledge.insert(h2),
            Err(i) => {
                let mut knowledge = BehaviorSet::empty(dynamics.num_hidden());
                knowledge.insert(h2);
                out.insert(i, BeliefNode { state: q, knowledge });
            }
        }
    }
    out
}
