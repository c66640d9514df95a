//! Instance generators: the sensing example, transportation networks with
//! uncertain routes, seeded random systems, small extended systems with
//! changing behavior, and two-agent instances.
//!
//! Unspecified transitions go to an absorbing `dead` state.

use std::collections::HashMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, PwlError, Result};
use crate::extended::ExtendedSystem;
use crate::model::{ActionId, BehaviorTable, HistoryKey, PwlSystem, StateId, SymbolTable};
use crate::multiagent::{Agent, Goal, MaCaps, MultiAgentSystem};
use crate::plan::PlanTable;

pub const DEAD: &str = "dead";

/// Builds a behavior table where every transition not listed goes to `dead`
/// (which must be a declared state).
fn table_with_default(
    name: &str,
    states: &SymbolTable,
    actions: &SymbolTable,
    moves: &[(&str, &str, &str)],
) -> BehaviorTable {
    let dead = StateId(states.get(DEAD).expect("dead state declared"));
    let na = actions.len();
    let mut next = vec![dead; states.len() * na];
    for &(from, action, to) in moves {
        let q = states.get(from).expect("known state") as usize;
        let a = actions.get(action).expect("known action") as usize;
        next[q * na + a] = StateId(states.get(to).expect("known state"));
    }
    BehaviorTable::new(name, na, next)
}

/// Two worlds that differ only in where `c` leads from `s0`; the agent must
/// take `c`, observe where it landed, come back with `d` and then pick `x`
/// (world E1) or `y` (world E2).
pub fn gen_intro_example() -> PwlSystem {
    let states = SymbolTable::new("state", ["s0", "sA", "sB", "gA", "gB", DEAD]).expect("static names");
    let actions = SymbolTable::new("action", ["c", "d", "x", "y"]).expect("static names");
    let shared = [("sA", "d", "s0"), ("sB", "d", "s0")];
    let e1: Vec<_> = [("s0", "c", "sA"), ("s0", "x", "gA")].into_iter().chain(shared).collect();
    let e2: Vec<_> = [("s0", "c", "sB"), ("s0", "y", "gB")].into_iter().chain(shared).collect();
    let behaviors = vec![
        table_with_default("E1", &states, &actions, &e1),
        table_with_default("E2", &states, &actions, &e2),
    ];
    let goal = [StateId(3), StateId(4)];
    PwlSystem::new(states, actions, StateId(0), goal, behaviors).expect("intro example is valid")
}

/// The sensing plan for [`gen_intro_example`]: `c`, then `d`, then `x` after
/// seeing `sA` or `y` after seeing `sB`.
pub fn intro_plan(sys: &PwlSystem) -> PlanTable {
    let s = |n: &str| sys.state(n).expect("intro state");
    let a = |n: &str| sys.action(n).expect("intro action");
    let root = HistoryKey::new(s("s0"));
    let mut plan = PlanTable::new(3);
    plan.insert(root.clone(), a("c"));
    for (seen, finish) in [("sA", "x"), ("sB", "y")] {
        let h = root.extended(a("c"), s(seen));
        plan.insert(h.clone(), a("d"));
        plan.insert(h.extended(a("d"), s("s0")), a(finish));
    }
    plan
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportEdge {
    pub label: String,
    pub from: String,
    pub to: String,
}

/// An edge whose endpoint is one of several alternatives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertainEdge {
    pub edge: String,
    pub endpoints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSpec {
    pub vertices: Vec<String>,
    pub edges: Vec<TransportEdge>,
    #[serde(default)]
    pub uncertain: Vec<UncertainEdge>,
    pub start: String,
    pub target: String,
}

/// One behavior per combination of uncertain endpoints (the first uncertain
/// edge varies slowest). Actions are edge labels; using an edge away from its
/// source vertex leads to `dead`.
pub fn gen_transport(spec: &TransportSpec, max_behaviors: usize) -> Result<PwlSystem> {
    if spec.vertices.iter().any(|v| v == DEAD) {
        return Err(validation(format!("vertex name {DEAD:?} is reserved")));
    }
    let states = SymbolTable::new("state", spec.vertices.iter().cloned().chain([DEAD.to_string()]))?;
    let actions = SymbolTable::new("action", spec.edges.iter().map(|e| e.label.clone()))?;
    let vertex = |name: &str| {
        states
            .get(name)
            .filter(|_| name != DEAD)
            .map(StateId)
            .ok_or_else(|| validation(format!("unknown vertex {name:?}")))
    };
    let mut base = Vec::with_capacity(spec.edges.len());
    for e in &spec.edges {
        base.push((vertex(&e.from)?, vertex(&e.to)?));
    }
    let mut alternatives: Vec<(usize, Vec<StateId>)> = Vec::new();
    for u in &spec.uncertain {
        let edge = actions
            .get(&u.edge)
            .ok_or_else(|| validation(format!("unknown uncertain edge {:?}", u.edge)))? as usize;
        if alternatives.iter().any(|(e, _)| *e == edge) {
            return Err(validation(format!("edge {:?} declared uncertain twice", u.edge)));
        }
        if u.endpoints.is_empty() {
            return Err(validation(format!("edge {:?} has no alternative endpoints", u.edge)));
        }
        let ends = u.endpoints.iter().map(|v| vertex(v)).collect::<Result<Vec<_>>>()?;
        alternatives.push((edge, ends));
    }
    let count = alternatives
        .iter()
        .try_fold(1usize, |acc, (_, ends)| acc.checked_mul(ends.len()))
        .filter(|&c| c <= max_behaviors)
        .ok_or_else(|| {
            PwlError::CapExceeded(format!("alternative combinations exceed the cap of {max_behaviors}"))
        })?;
    let start = vertex(&spec.start)?;
    let target = vertex(&spec.target)?;
    let dead = StateId(states.get(DEAD).expect("declared"));
    let (nq, na) = (states.len(), actions.len());

    let mut behaviors = Vec::with_capacity(count);
    for mut k in 0..count {
        // Mixed-radix decode, last uncertain edge varying fastest.
        let mut choice = vec![0; alternatives.len()];
        for (slot, (_, ends)) in alternatives.iter().enumerate().rev() {
            choice[slot] = k % ends.len();
            k /= ends.len();
        }
        let mut endpoint: Vec<StateId> = base.iter().map(|&(_, to)| to).collect();
        for (slot, (edge, ends)) in alternatives.iter().enumerate() {
            endpoint[*edge] = ends[choice[slot]];
        }
        let mut next = vec![dead; nq * na];
        for (a, &(from, _)) in base.iter().enumerate() {
            next[from.index() * na + a] = endpoint[a];
        }
        let name = if alternatives.is_empty() {
            "known".to_string()
        } else {
            alternatives
                .iter()
                .enumerate()
                .map(|(slot, (edge, ends))| {
                    format!(
                        "{}={}",
                        actions.name(*edge as u32),
                        states.name(ends[choice[slot]].0)
                    )
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        behaviors.push(BehaviorTable::new(name, na, next));
    }
    PwlSystem::new(states, actions, start, [target], behaviors)
}

/// Seeded random system: every transition of every behavior is drawn
/// uniformly and independently; each state joins the goal with probability
/// `goal_density`. State `q0` is initial.
pub fn gen_random(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    num_behaviors: usize,
    goal_density: f64,
) -> PwlSystem {
    assert!(num_states >= 1 && num_actions >= 1 && num_behaviors >= 1, "sizes must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = SymbolTable::new("state", (0..num_states).map(|i| format!("q{i}"))).expect("generated");
    let actions = SymbolTable::new("action", (0..num_actions).map(|i| format!("a{i}"))).expect("generated");
    let behaviors = (0..num_behaviors)
        .map(|b| {
            let next = (0..num_states * num_actions)
                .map(|_| StateId(rng.random_range(0..num_states as u32)))
                .collect();
            BehaviorTable::new(format!("E{b}"), num_actions, next)
        })
        .collect();
    let density = goal_density.clamp(0.0, 1.0);
    let goal: Vec<StateId> = (0..num_states as u32)
        .filter(|_| rng.random_bool(density))
        .map(StateId)
        .collect();
    PwlSystem::new(states, actions, StateId(0), goal, behaviors).expect("generated system is valid")
}

/// Vertices reachable from `start` along the given edges (plain BFS).
pub fn reachable_vertices(spec: &TransportSpec) -> Vec<String> {
    let mut adjacency: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in &spec.edges {
        adjacency.entry(&e.from).or_default().push(&e.to);
    }
    let mut seen = vec![spec.start.as_str()];
    let mut queue = std::collections::VecDeque::from([spec.start.as_str()]);
    while let Some(v) = queue.pop_front() {
        for &w in adjacency.get(v).map(Vec::as_slice).unwrap_or_default() {
            if !seen.contains(&w) {
                seen.push(w);
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().map(str::to_string).collect()
}

/// Convenience lookup used by tests and the command line.
pub fn action_ids(sys: &PwlSystem, names: &[&str]) -> Result<Vec<ActionId>> {
    names
        .iter()
        .map(|n| sys.action(n).ok_or_else(|| validation(format!("unknown action {n:?}"))))
        .collect()
}

/// Builds an extended system from `(state, behavior, action) -> (state,
/// behavior)` rules; anything unlisted goes to `dead` keeping the behavior.
fn extended_from_rules(
    states: &[&'static str],
    actions: &[&'static str],
    behaviors: &[&'static str],
    initial: &str,
    candidates: &[&str],
    goal: &[&str],
    rules: impl Fn(&'static str, &'static str, &'static str) -> Option<(&'static str, &'static str)>,
) -> ExtendedSystem {
    let st = SymbolTable::new("state", states.iter().copied()).expect("static names");
    let at = SymbolTable::new("action", actions.iter().copied()).expect("static names");
    let bt = SymbolTable::new("behavior", behaviors.iter().copied()).expect("static names");
    let dead = st.get(DEAD).expect("dead state declared");
    let mut gamma = Vec::with_capacity(states.len() * behaviors.len() * actions.len());
    for q in states {
        for (bi, b) in behaviors.iter().enumerate() {
            for a in actions {
                gamma.push(match rules(q, b, a) {
                    Some((q2, b2)) => (
                        StateId(st.get(q2).expect("known state")),
                        bt.get(b2).expect("known behavior"),
                    ),
                    None => (StateId(dead), bi as u32),
                });
            }
        }
    }
    let candidates = candidates.iter().map(|b| bt.get(b).expect("known behavior") as usize).collect();
    let initial = StateId(st.get(initial).expect("known state"));
    let goal: Vec<StateId> = goal.iter().map(|q| StateId(st.get(q).expect("known state"))).collect();
    ExtendedSystem::new(st, at, bt, initial, candidates, gamma, goal).expect("static instance is valid")
}

/// Extended system where the safe route (`left` or `right`) depends on one of
/// two benign behaviors, revealed by `sense` (then `back` home). Sounding the
/// `alarm` anywhere switches the environment to `hostile`, under which both
/// routes lead to `dead`.
pub fn gen_alarm_example() -> ExtendedSystem {
    extended_from_rules(
        &["home", "seenL", "seenR", "goal", DEAD],
        &["sense", "back", "left", "right", "alarm"],
        &["benign_left", "benign_right", "hostile"],
        "home",
        &["benign_left", "benign_right"],
        &["goal"],
        |q, b, a| match (q, b, a) {
            ("goal", "benign_left", _) => Some(("goal", "benign_left")),
            ("goal", "benign_right", _) => Some(("goal", "benign_right")),
            ("goal", "hostile", _) => Some(("goal", "hostile")),
            ("home" | "seenL" | "seenR", _, "alarm") => Some((q, "hostile")),
            ("home", "benign_left", "sense") => Some(("seenL", "benign_left")),
            ("home", "benign_right", "sense") => Some(("seenR", "benign_right")),
            ("seenL", "benign_left", "back") => Some(("home", "benign_left")),
            ("seenR", "benign_right", "back") => Some(("home", "benign_right")),
            ("home", "benign_left", "left") => Some(("goal", "benign_left")),
            ("home", "benign_right", "right") => Some(("goal", "benign_right")),
            ("home", "hostile", "sense" | "back") => Some(("home", "hostile")),
            _ => None,
        },
    )
}

/// Extended system with one initial behavior, `locked`; `knock` turns it into
/// `open`, after which `enter` reaches the goal.
pub fn gen_door_example() -> ExtendedSystem {
    extended_from_rules(
        &["outside", "inside", DEAD],
        &["knock", "enter"],
        &["locked", "open"],
        "outside",
        &["locked"],
        &["inside"],
        |q, b, a| match (q, b, a) {
            ("outside", _, "knock") => Some(("outside", "open")),
            ("outside", "open", "enter") => Some(("inside", "open")),
            ("inside", "locked", _) => Some(("inside", "locked")),
            ("inside", "open", _) => Some(("inside", "open")),
            _ => None,
        },
    )
}

fn ma_agent(states: &[&str], initial: &[&str], goals: &[(&str, &[&str])]) -> Agent {
    let table = SymbolTable::new("state", states.iter().copied()).expect("static names");
    let id = |q: &str| StateId(table.get(q).expect("known state"));
    let initials = initial.iter().map(|q| id(q)).collect();
    let goals = goals
        .iter()
        .map(|(name, members)| Goal::new(*name, table.len(), members.iter().map(|q| id(q))))
        .collect();
    Agent {
        states: table,
        initials,
        goals,
    }
}

/// Two basic systems side by side: agent `i` moves by its own system, the
/// hidden behavior is the pair of behaviors and both agents start at their
/// system's initial state with their system's goal as the only goal. Both
/// systems must declare the same actions in the same order.
pub fn gen_independent_product(first: &PwlSystem, second: &PwlSystem) -> Result<MultiAgentSystem> {
    if first.actions().names() != second.actions().names() {
        return Err(validation("product systems must share their action list"));
    }
    let n2 = second.num_behaviors();
    let names = first
        .behavior_names()
        .iter()
        .flat_map(|x| second.behavior_names().iter().map(move |y| format!("{x}+{y}")));
    let behaviors = SymbolTable::new("behavior", names)?;
    let initial_behaviors = (0..behaviors.len()).collect();
    let agents = [first, second].map(|sys| Agent {
        states: sys.states().clone(),
        initials: vec![sys.initial()],
        goals: vec![Goal::new("goal", sys.num_states(), sys.goal_states())],
    });
    MultiAgentSystem::from_fn(
        first.actions().clone(),
        behaviors,
        initial_behaviors,
        agents,
        &MaCaps::default(),
        |q1, q2, b, a1, a2| {
            let (b1, b2) = (b / n2, b % n2);
            (first.transition(b1, q1, a1), second.transition(b2, q2, a2), b)
        },
    )
}

/// Two agents at the `near` end of a one-lane bridge, each wanting to reach
/// `far`. A lone `cross` succeeds; if both cross at once neither moves and
/// the bridge becomes `jammed`, after which agent 1 can no longer cross while
/// agent 2 still can.
pub fn gen_narrow_bridge() -> MultiAgentSystem {
    narrow_bridge(&[("far", &["far"])])
}

fn narrow_bridge(goals: &[(&str, &[&str])]) -> MultiAgentSystem {
    let agents = [0, 1].map(|_| ma_agent(&["near", "far"], &["near"], goals));
    let actions = SymbolTable::new("action", ["cross", "wait"]).expect("static names");
    let behaviors = SymbolTable::new("behavior", ["open", "jammed"]).expect("static names");
    let (near, far, cross) = (StateId(0), StateId(1), ActionId(0));
    MultiAgentSystem::from_fn(actions, behaviors, vec![0], agents, &MaCaps::default(), |q1, q2, b, a1, a2| {
        let c1 = q1 == near && a1 == cross;
        let c2 = q2 == near && a2 == cross;
        let go = |c: bool, q: StateId| if c { far } else { q };
        match b {
            0 if c1 && c2 => (q1, q2, 1),
            0 => (go(c1, q1), go(c2, q2), 0),
            _ => (q1, go(c2, q2), 1),
        }
    })
    .expect("static instance is valid")
}

/// A small named two-agent instance paired with the horizon to study it at.
#[derive(Debug, Clone)]
pub struct MaInstance {
    pub name: &'static str,
    pub system: MultiAgentSystem,
    pub horizon: usize,
}

fn corridor(behaviors: &[&str], agent1_moves: impl Fn(usize, StateId, ActionId) -> StateId, frozen: bool) -> MultiAgentSystem {
    let goals: &[(&str, &[&str])] = &[("left", &["l"]), ("right", &["r"])];
    let agents = [0, 1].map(|_| ma_agent(&["l", "m", "r"], &["m"], goals));
    let actions = SymbolTable::new("action", ["left", "right"]).expect("static names");
    let table = SymbolTable::new("behavior", behaviors.iter().copied()).expect("static names");
    let all = (0..table.len()).collect();
    MultiAgentSystem::from_fn(actions, table, all, agents, &MaCaps::default(), |q1, q2, b, a1, a2| {
        if frozen {
            (q1, q2, b)
        } else {
            (agent1_moves(b, q1, a1), line_move(q2, a2), b)
        }
    })
    .expect("static instance is valid")
}

/// Move along `l - m - r`; action 0 is `left`, walls at both ends.
fn line_move(q: StateId, a: ActionId) -> StateId {
    match a.0 {
        0 => StateId(q.0.saturating_sub(1)),
        _ => StateId((q.0 + 1).min(2)),
    }
}

fn blocking() -> MultiAgentSystem {
    let agents = [
        ma_agent(&["s", "t", "u"], &["s"], &[("t", &["t"]), ("u", &["u"])]),
        ma_agent(&["p", "v", "w"], &["p"], &[("v", &["v"]), ("w", &["w"])]),
    ];
    let actions = SymbolTable::new("action", ["x", "y"]).expect("static names");
    let behaviors = SymbolTable::new("behavior", ["only"]).expect("static names");
    let (s, p, y) = (StateId(0), StateId(0), ActionId(1));
    MultiAgentSystem::from_fn(actions, behaviors, vec![0], agents, &MaCaps::default(), |q1, q2, b, a1, a2| {
        let blocked = q2 == p && a2 == y;
        let r1 = if q1 == s && !blocked { StateId(1 + a1.0) } else { q1 };
        let r2 = if q2 == p { StateId(1 + a2.0) } else { q2 };
        (r1, r2, b)
    })
    .expect("static instance is valid")
}

/// Hand-built two-agent instances with two goals per agent, covering both
/// positive and negative plan existence at small horizons.
pub fn gen_ma_goal_instances() -> Vec<MaInstance> {
    let plain = |_: usize, q: StateId, a: ActionId| line_move(q, a);
    let mirrored = |b: usize, q: StateId, a: ActionId| line_move(q, if b == 1 { ActionId(1 - a.0) } else { a });
    let bridge = || narrow_bridge(&[("far", &["far"]), ("near", &["near"])]);
    vec![
        MaInstance {
            name: "corridor",
            system: corridor(&["calm"], plain, false),
            horizon: 1,
        },
        MaInstance {
            name: "frozen-corridor",
            system: corridor(&["calm"], plain, true),
            horizon: 2,
        },
        MaInstance {
            name: "mirrored-corridor",
            system: corridor(&["plain", "mirrored"], mirrored, false),
            horizon: 2,
        },
        MaInstance {
            name: "blocking-short",
            system: blocking(),
            horizon: 1,
        },
        MaInstance {
            name: "blocking",
            system: blocking(),
            horizon: 2,
        },
        MaInstance {
            name: "bridge-short",
            system: bridge(),
            horizon: 1,
        },
        MaInstance {
            name: "bridge",
            system: bridge(),
            horizon: 2,
        },
    ]
}
