//! Depth reduction for satisfactory plans.
//!
//! Along a branch of the belief run tree, if a label `(state, knowledge)`
//! repeats with no knowledge change in between, every behavior still in play
//! walks the same segment, so the segment can be cut out and the later
//! subtree hung at the earlier node. Knowledge can shrink at most `s - 1`
//! times and a no-learning segment without repeats visits at most `t`
//! states, so after splicing every branch has fewer than `s * t` actions.

use crate::dynamics::{belief_successors, BeliefNode};
use crate::error::{PwlError, Result};
use crate::model::{HistoryKey, PwlSystem};
use crate::plan::PlanTable;
use crate::verify::verify;

/// Returns a satisfactory plan whose branches are at most `s * t` actions.
///
/// At each node the earliest repeat is handled first, and among the repeats
/// of its label along the following no-learning chain the last one is used,
/// so the longest segment is removed.
pub fn shrink(sys: &PwlSystem, plan: &PlanTable) -> Result<PlanTable> {
    let verdict = verify(sys, plan, plan.horizon(), 1.0)?;
    if !verdict.satisfactory {
        let failing: Vec<&str> = verdict
            .failures()
            .map(|t| sys.behaviors()[t.behavior].name())
            .collect();
        return Err(PwlError::NotSatisfactory(format!(
            "fails under behaviors {}",
            failing.join(", ")
        )));
    }
    let bound = sys.num_behaviors() * sys.num_states();
    let mut out = PlanTable::new(plan.horizon().min(bound));
    let root = BeliefNode::root(sys);
    let start = HistoryKey::new(root.state);
    rebuild(sys, plan, start.clone(), start, root, &mut out);
    Ok(out)
}

/// `old` is the history in the input plan, `new` the corresponding history
/// in the output; both lead to `node`.
fn rebuild(
    sys: &PwlSystem,
    plan: &PlanTable,
    old: HistoryKey,
    new: HistoryKey,
    node: BeliefNode,
    out: &mut PlanTable,
) {
    if sys.is_goal(node.state) {
        return;
    }
    let target = last_repeat(sys, plan, &old, &node);
    let Some(a) = plan.action(&target) else {
        return;
    };
    out.insert(new.clone(), a);
    for child in belief_successors(sys, &node, a) {
        let old_child = target.extended(a, child.state);
        let new_child = new.extended(a, child.state);
        rebuild(sys, plan, old_child, new_child, child, out);
    }
}

/// Follows the plan from `old` while knowledge stays unchanged and returns
/// the last history on that chain ending in `node.state` (or `old` itself).
fn last_repeat(sys: &PwlSystem, plan: &PlanTable, old: &HistoryKey, node: &BeliefNode) -> HistoryKey {
    let mut best = old.clone();
    let mut cursor = old.clone();
    let mut state = node.state;
    for _ in 0..plan.horizon() {
        let Some(a) = plan.action(&cursor) else {
            break;
        };
        let current = BeliefNode {
            state,
            knowledge: node.knowledge.clone(),
        };
        let next = belief_successors(sys, &current, a);
        if next.len() != 1 {
            break;
        }
        state = next[0].state;
        cursor.push(a, state);
        if sys.is_goal(state) {
            break;
        }
        if state == node.state {
            best = cursor.clone();
        }
    }
    best
}
