//! Modeling, verification, shrinking and synthesis of conditional plans for
//! agents that must reach a goal while learning which of finitely many
//! deterministic behaviors governs their environment.

pub mod bench;
pub mod domains;
pub mod dynamics;
pub mod error;
pub mod extended;
pub mod model;
pub mod multiagent;
pub mod plan;
pub mod reduction;
pub mod shrink;
pub mod synth;
pub mod verify;

pub use dynamics::{belief_successors, BeliefNode, Dynamics};
pub use error::{PwlError, Result};
pub use model::{ActionId, BehaviorSet, HistoryKey, Limits, PwlSystem, StateId, SymbolTable};
pub use plan::{canonicalize_plan, decision_tree_view, plan_from_action_sequence, PlanTable};
pub use shrink::shrink;
pub use synth::{exists_plan, synthesize};
pub use verify::{simulate, verify, Outcome, Trace, Verdict};
