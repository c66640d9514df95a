//! Planning-while-learning systems: observable states, actions, a finite list
//! of candidate deterministic behaviors and a goal set.
//!
//! Knowledge is never stored explicitly. It is recovered from an observed
//! history as the set of behaviors that reproduce every transition in it.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{validation, PwlError, Result};

/// Separator used in transition-table keys; forbidden inside names.
pub const KEY_SEPARATOR: char = '|';

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Validation caps applied when loading systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_behaviors: usize,
    pub max_states: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_behaviors: 4096,
            max_states: 65536,
        }
    }
}

impl Limits {
    /// Reads `PWL_MAX_BEHAVIORS` / `PWL_MAX_STATES`, falling back to the defaults.
    pub fn from_env() -> Self {
        let default = Limits::default();
        let read = |key: &str, fallback: usize| {
            std::env::var(key)
                .ok()
                .and_then(|v| v.trim().parse().ok())
                .unwrap_or(fallback)
        };
        Limits {
            max_behaviors: read("PWL_MAX_BEHAVIORS", default.max_behaviors),
            max_states: read("PWL_MAX_STATES", default.max_states),
        }
    }

    pub(crate) fn check(&self, states: usize, behaviors: usize) -> Result<()> {
        if states > self.max_states {
            return Err(PwlError::CapExceeded(format!(
                "{states} states exceeds the cap of {}",
                self.max_states
            )));
        }
        if behaviors > self.max_behaviors {
            return Err(PwlError::CapExceeded(format!(
                "{behaviors} behaviors exceeds the cap of {}",
                self.max_behaviors
            )));
        }
        Ok(())
    }
}

/// Names with dense indices assigned in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl SymbolTable {
    pub fn new<I, S>(kind: &str, names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = SymbolTable {
            names: Vec::new(),
            index: HashMap::new(),
        };
        for name in names {
            let name = name.into();
            if name.is_empty() {
                return Err(validation(format!("empty {kind} name")));
            }
            if name.contains(KEY_SEPARATOR) {
                return Err(validation(format!(
                    "{kind} name {name:?} contains the reserved separator '{KEY_SEPARATOR}'"
                )));
            }
            if table.index.contains_key(&name) {
                return Err(validation(format!("duplicate {kind} name {name:?}")));
            }
            table.index.insert(name.clone(), table.names.len() as u32);
            table.names.push(name);
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: u32) -> &str {
        &self.names[index as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A subset of behavior indices, iterated in increasing index order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BehaviorSet(FixedBitSet);

impl BehaviorSet {
    pub fn empty(universe: usize) -> Self {
        BehaviorSet(FixedBitSet::with_capacity(universe))
    }

    pub fn full(universe: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(universe);
        bits.insert_range(..);
        BehaviorSet(bits)
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(universe);
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn insert(&mut self, index: usize) {
        self.0.insert(index);
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(index)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn is_subset(&self, other: &BehaviorSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for BehaviorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// An observed history `state0, action1, state1, ..., action_k, state_k`,
/// stored as alternating raw indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HistoryKey(Vec<u32>);

impl HistoryKey {
    pub fn new(initial: StateId) -> Self {
        HistoryKey(vec![initial.0])
    }

    /// Builds a history from explicit states and actions; `states.len()` must be
    /// `actions.len() + 1`.
    pub fn from_parts(states: &[StateId], actions: &[ActionId]) -> Result<Self> {
        if states.len() != actions.len() + 1 {
            return Err(validation(format!(
                "history with {} states and {} actions does not alternate",
                states.len(),
                actions.len()
            )));
        }
        let mut raw = Vec::with_capacity(states.len() + actions.len());
        raw.push(states[0].0);
        for (a, q) in actions.iter().zip(&states[1..]) {
            raw.push(a.0);
            raw.push(q.0);
        }
        Ok(HistoryKey(raw))
    }

    pub(crate) fn from_raw(raw: Vec<u32>) -> Self {
        debug_assert!(raw.len() % 2 == 1);
        HistoryKey(raw)
    }

    pub fn as_raw(&self) -> &[u32] {
        &self.0
    }

    pub fn push(&mut self, action: ActionId, state: StateId) {
        self.0.push(action.0);
        self.0.push(state.0);
    }

    pub fn extended(&self, action: ActionId, state: StateId) -> Self {
        let mut next = self.clone();
        next.push(action, state);
        next
    }

    /// Number of actions in the history.
    pub fn len(&self) -> usize {
        self.0.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 1
    }

    pub fn first_state(&self) -> StateId {
        StateId(self.0[0])
    }

    pub fn last_state(&self) -> StateId {
        StateId(self.0[self.0.len() - 1])
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.0.iter().step_by(2).map(|&q| StateId(q))
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.0.iter().skip(1).step_by(2).map(|&a| ActionId(a))
    }

    /// `(from, action, to)` for every step of the history.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, ActionId, StateId)> + '_ {
        self.0
            .windows(3)
            .step_by(2)
            .map(|w| (StateId(w[0]), ActionId(w[1]), StateId(w[2])))
    }

    /// Renders the history as alternating state/action names.
    pub fn to_names(&self, states: &SymbolTable, actions: &SymbolTable) -> Vec<String> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if i % 2 == 0 {
                    states.name(x).to_string()
                } else {
                    actions.name(x).to_string()
                }
            })
            .collect()
    }

    pub fn from_names(names: &[String], states: &SymbolTable, actions: &SymbolTable) -> Result<Self> {
        if names.len() % 2 != 1 {
            return Err(validation(format!(
                "history {names:?} must alternate state, action, ..., state"
            )));
        }
        let mut raw = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let id = if i % 2 == 0 {
                states.get(name).ok_or_else(|| validation(format!("unknown state {name:?} in history")))?
            } else {
                actions.get(name).ok_or_else(|| validation(format!("unknown action {name:?} in history")))?
            };
            raw.push(id);
        }
        Ok(HistoryKey(raw))
    }
}

impl Borrow<[u32]> for HistoryKey {
    fn borrow(&self) -> &[u32] {
        &self.0
    }
}

/// One candidate deterministic world: a total transition table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorTable {
    name: String,
    num_actions: usize,
    next: Vec<StateId>,
}

impl BehaviorTable {
    /// `next[q * num_actions + a]` is the successor of state `q` under action `a`.
    pub fn new(name: impl Into<String>, num_actions: usize, next: Vec<StateId>) -> Self {
        BehaviorTable {
            name: name.into(),
            num_actions,
            next,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn next(&self, q: StateId, a: ActionId) -> StateId {
        self.next[q.index() * self.num_actions + a.index()]
    }
}

/// A planning-while-learning system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PwlSystem {
    states: SymbolTable,
    actions: SymbolTable,
    initial: StateId,
    goal: FixedBitSet,
    behaviors: Vec<BehaviorTable>,
    behavior_names: Vec<String>,
}

impl PwlSystem {
    /// Assembles and validates a system from already-indexed parts.
    pub fn new(
        states: SymbolTable,
        actions: SymbolTable,
        initial: StateId,
        goal: impl IntoIterator<Item = StateId>,
        behaviors: Vec<BehaviorTable>,
    ) -> Result<Self> {
        let n = states.len();
        if initial.index() >= n {
            return Err(validation("initial state is not a declared state"));
        }
        let mut goal_bits = FixedBitSet::with_capacity(n);
        for q in goal {
            if q.index() >= n {
                return Err(validation("goal references an unknown state"));
            }
            goal_bits.insert(q.index());
        }
        if behaviors.is_empty() {
            return Err(validation("a system needs at least one behavior"));
        }
        let mut seen = HashMap::new();
        for (i, b) in behaviors.iter().enumerate() {
            if b.name.is_empty() || b.name.contains(KEY_SEPARATOR) {
                return Err(validation(format!("invalid behavior name {:?}", b.name)));
            }
            if seen.insert(b.name.clone(), i).is_some() {
                return Err(validation(format!("duplicate behavior name {:?}", b.name)));
            }
            if b.num_actions != actions.len() || b.next.len() != n * actions.len() {
                return Err(validation(format!("non-total behavior {:?}", b.name)));
            }
            if b.next.iter().any(|q| q.index() >= n) {
                return Err(validation(format!(
                    "behavior {:?} references an unknown state",
                    b.name
                )));
            }
        }
        let behavior_names = behaviors.iter().map(|b| b.name.clone()).collect();
        Ok(PwlSystem {
            states,
            actions,
            initial,
            goal: goal_bits,
            behaviors,
            behavior_names,
        })
    }

    pub fn states(&self) -> &SymbolTable {
        &self.states
    }

    pub fn actions(&self) -> &SymbolTable {
        &self.actions
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn behaviors(&self) -> &[BehaviorTable] {
        &self.behaviors
    }

    pub fn behavior_names(&self) -> &[String] {
        &self.behavior_names
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_behaviors(&self) -> usize {
        self.behaviors.len()
    }

    pub fn goal_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.goal.ones().map(|q| StateId(q as u32))
    }

    pub fn state(&self, name: &str) -> Option<StateId> {
        self.states.get(name).map(StateId)
    }

    pub fn action(&self, name: &str) -> Option<ActionId> {
        self.actions.get(name).map(ActionId)
    }

    pub fn behavior(&self, name: &str) -> Option<usize> {
        self.behaviors.iter().position(|b| b.name == name)
    }

    pub fn is_goal(&self, q: StateId) -> bool {
        self.goal.contains(q.index())
    }

    /// Successor of `q` under action `a` in behavior `b`.
    pub fn step(&self, b: usize, q: StateId, a: ActionId) -> Result<StateId> {
        if b >= self.behaviors.len() {
            return Err(PwlError::Index(format!("behavior {b} of {}", self.behaviors.len())));
        }
        if q.index() >= self.num_states() {
            return Err(PwlError::Index(format!("state {} of {}", q.0, self.num_states())));
        }
        if a.index() >= self.num_actions() {
            return Err(PwlError::Index(format!("action {} of {}", a.0, self.num_actions())));
        }
        Ok(self.behaviors[b].next(q, a))
    }

    /// Unchecked variant of [`PwlSystem::step`] for validated identifiers.
    pub fn transition(&self, b: usize, q: StateId, a: ActionId) -> StateId {
        self.behaviors[b].next(q, a)
    }

    /// Behaviors that reproduce every transition of `h`.
    pub fn consistent_behaviors(&self, h: &HistoryKey) -> BehaviorSet {
        let mut set = BehaviorSet::empty(self.num_behaviors());
        if h.first_state() != self.initial || !self.history_in_range(h) {
            return set;
        }
        for (i, table) in self.behaviors.iter().enumerate() {
            if h.transitions().all(|(q, a, q2)| table.next(q, a) == q2) {
                set.insert(i);
            }
        }
        set
    }

    pub(crate) fn history_in_range(&self, h: &HistoryKey) -> bool {
        h.states().all(|q| q.index() < self.num_states())
            && h.actions().all(|a| a.index() < self.num_actions())
    }

    /// Parses and validates the JSON system format.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with_limits(text, &Limits::default())
    }

    pub fn from_json_with_limits(text: &str, limits: &Limits) -> Result<Self> {
        let file: SystemFile =
            serde_json::from_str(text).map_err(|e| PwlError::Parse(e.to_string()))?;
        limits.check(file.states.len(), file.behaviors.len())?;
        let states = SymbolTable::new("state", file.states)?;
        let actions = SymbolTable::new("action", file.actions)?;
        let initial = states
            .get(&file.initial)
            .map(StateId)
            .ok_or_else(|| validation(format!("unknown initial state {:?}", file.initial)))?;
        let mut goal = Vec::with_capacity(file.goal.len());
        for name in &file.goal {
            let q = states
                .get(name)
                .ok_or_else(|| validation(format!("unknown goal state {name:?}")))?;
            goal.push(StateId(q));
        }
        let (nq, na) = (states.len(), actions.len());
        let mut behaviors = Vec::with_capacity(file.behaviors.len());
        for b in file.behaviors {
            let mut next: Vec<Option<StateId>> = vec![None; nq * na];
            for (key, target) in &b.table {
                let (s, a) = key.split_once(KEY_SEPARATOR).ok_or_else(|| {
                    validation(format!("behavior {:?}: malformed key {key:?}", b.name))
                })?;
                let q = states
                    .get(s)
                    .ok_or_else(|| validation(format!("behavior {:?}: unknown state {s:?}", b.name)))?;
                let a = actions
                    .get(a)
                    .ok_or_else(|| validation(format!("behavior {:?}: unknown action {a:?}", b.name)))?;
                let t = states.get(target).ok_or_else(|| {
                    validation(format!("behavior {:?}: unknown state {target:?}", b.name))
                })?;
                next[q as usize * na + a as usize] = Some(StateId(t));
            }
            if let Some(missing) = next.iter().position(Option::is_none) {
                return Err(validation(format!(
                    "non-total behavior {:?}: no transition for {}|{}",
                    b.name,
                    states.name((missing / na) as u32),
                    actions.name((missing % na) as u32)
                )));
            }
            let next = next.into_iter().map(|q| q.expect("checked total")).collect();
            behaviors.push(BehaviorTable::new(b.name, na, next));
        }
        PwlSystem::new(states, actions, initial, goal, behaviors)
    }

    pub fn to_file(&self) -> SystemFile {
        let behaviors = self
            .behaviors
            .iter()
            .map(|b| {
                let mut table = IndexMap::new();
                for q in 0..self.num_states() as u32 {
                    for a in 0..self.num_actions() as u32 {
                        table.insert(
                            format!("{}{KEY_SEPARATOR}{}", self.states.name(q), self.actions.name(a)),
                            self.states.name(b.next(StateId(q), ActionId(a)).0).to_string(),
                        );
                    }
                }
                BehaviorFile {
                    name: b.name.clone(),
                    table,
                }
            })
            .collect();
        SystemFile {
            states: self.states.names().to_vec(),
            actions: self.actions.names().to_vec(),
            initial: self.states.name(self.initial.0).to_string(),
            goal: self
                .goal_states()
                .map(|q| self.states.name(q.0).to_string())
                .collect(),
            behaviors,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("system serializes")
    }
}

/// On-disk layout of a system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub initial: String,
    pub goal: Vec<String>,
    pub behaviors: Vec<BehaviorFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorFile {
    pub name: String,
    pub table: IndexMap<String, String>,
}
