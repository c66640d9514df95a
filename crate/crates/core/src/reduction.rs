//! Reduction from 3-SAT to plan existence, with both directions of the
//! plan/assignment correspondence and a brute-force satisfiability oracle.
//!
//! For `n` variables and `t` clauses the system has states
//! `b, q1, ..., q(n+t+1)`, behaviors `E1:0 .. En:0, E1:1 .. En:1`, actions
//! `0, 1, a1 .. a7`, initial state `q1` and goal `q(n+t+1)`. Behavior
//! `Ei:x` is eliminated from the main path by playing the complement of `x`
//! at row `i`; clause rows send a behavior to the absorbing `b` whenever the
//! chosen clause assignment disagrees with it.

use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{validation, PwlError, Result};
use crate::model::{ActionId, BehaviorTable, HistoryKey, PwlSystem, StateId, SymbolTable};
use crate::plan::{plan_from_action_sequence, PlanTable};
use crate::verify::verify;

/// Largest variable count the brute-force oracle accepts.
pub const SAT_ORACLE_MAX_VARS: usize = 25;

pub const ZERO: ActionId = ActionId(0);
pub const ONE: ActionId = ActionId(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    /// 1-based variable index.
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn from_dimacs(x: i64) -> Self {
        Literal {
            var: x.unsigned_abs() as usize,
            positive: x > 0,
        }
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }
}

/// A CNF whose clauses each mention exactly three distinct variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf3 {
    num_vars: usize,
    clauses: Vec<[Literal; 3]>,
}

impl Cnf3 {
    pub fn new(num_vars: usize, clauses: Vec<[Literal; 3]>) -> Result<Self> {
        if num_vars == 0 {
            return Err(validation("a formula needs at least one variable"));
        }
        if clauses.is_empty() {
            return Err(validation("a formula needs at least one clause"));
        }
        for (j, c) in clauses.iter().enumerate() {
            if c.iter().any(|l| l.var == 0 || l.var > num_vars) {
                return Err(validation(format!("clause {} mentions an undeclared variable", j + 1)));
            }
            if c[0].var == c[1].var || c[0].var == c[2].var || c[1].var == c[2].var {
                return Err(validation(format!(
                    "clause {} does not mention three distinct variables",
                    j + 1
                )));
            }
        }
        Ok(Cnf3 { num_vars, clauses })
    }

    /// Builds a formula from signed DIMACS-style literals.
    pub fn from_signed(num_vars: usize, clauses: &[[i64; 3]]) -> Result<Self> {
        Self::new(
            num_vars,
            clauses.iter().map(|c| c.map(Literal::from_dimacs)).collect(),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[[Literal; 3]] {
        &self.clauses
    }

    pub fn is_satisfied_by(&self, s: &Assignment) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|l| s.value(l.var) == l.positive))
    }

    /// Parses DIMACS CNF text. Every clause must have exactly three literals
    /// over distinct variables.
    pub fn from_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut pending: Vec<i64> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                match fields.as_slice() {
                    ["cnf", v, c] => {
                        let v = v.parse().map_err(|_| PwlError::Parse(format!("bad header {line:?}")))?;
                        let c = c.parse().map_err(|_| PwlError::Parse(format!("bad header {line:?}")))?;
                        header = Some((v, c));
                    }
                    _ => return Err(PwlError::Parse(format!("bad header {line:?}"))),
                }
                continue;
            }
            if header.is_none() {
                return Err(PwlError::Parse("clause before the 'p cnf' header".into()));
            }
            for tok in line.split_whitespace() {
                let x: i64 = tok
                    .parse()
                    .map_err(|_| PwlError::Parse(format!("bad literal {tok:?}")))?;
                if x == 0 {
                    let lits: [i64; 3] = pending.as_slice().try_into().map_err(|_| {
                        validation(format!(
                            "clause {} has {} literals, expected 3",
                            clauses.len() + 1,
                            pending.len()
                        ))
                    })?;
                    clauses.push(lits);
                    pending.clear();
                } else {
                    pending.push(x);
                }
            }
        }
        let (num_vars, declared) = header.ok_or_else(|| PwlError::Parse("missing 'p cnf' header".into()))?;
        if !pending.is_empty() {
            return Err(PwlError::Parse("last clause is not terminated by 0".into()));
        }
        if declared != clauses.len() {
            return Err(validation(format!(
                "header declares {declared} clauses but {} were given",
                clauses.len()
            )));
        }
        Self::from_signed(num_vars, &clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            out.push_str(&format!(
                "{} {} {} 0\n",
                c[0].to_dimacs(),
                c[1].to_dimacs(),
                c[2].to_dimacs()
            ));
        }
        out
    }

    /// Seeded random formula: each clause picks three distinct variables
    /// and independent polarities.
    pub fn random(seed: u64, num_vars: usize, num_clauses: usize) -> Result<Self> {
        if num_vars < 3 {
            return Err(validation("random 3-CNF needs at least three variables"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clauses = (0..num_clauses)
            .map(|_| {
                let mut vars = [0usize; 3];
                let mut k = 0;
                while k < 3 {
                    let v = rng.random_range(1..=num_vars);
                    if !vars[..k].contains(&v) {
                        vars[k] = v;
                        k += 1;
                    }
                }
                vars.map(|var| Literal {
                    var,
                    positive: rng.random_bool(0.5),
                })
            })
            .collect();
        Self::new(num_vars, clauses)
    }
}

/// Total assignment to variables `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Assignment(values)
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Assignment(bits.iter().map(|&b| b != 0).collect())
    }

    pub fn num_vars(&self) -> usize {
        self.0.len()
    }

    /// Value of the 1-based variable `var`.
    pub fn value(&self, var: usize) -> bool {
        self.0[var - 1]
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: Vec<String> = self.0.iter().map(|&b| (b as u8).to_string()).collect();
        write!(f, "({})", bits.join(","))
    }
}

/// Clause variables in increasing index order, paired with their literals.
fn sorted_literals(clause: &[Literal; 3]) -> [Literal; 3] {
    let mut lits = *clause;
    lits.sort_by_key(|l| l.var);
    lits
}

/// The seven satisfying assignments of a clause, in lexicographic order over
/// its variables sorted by index. Entry `k` is played as action `a(k+1)`.
pub fn clause_assignments(clause: &[Literal; 3]) -> Vec<[bool; 3]> {
    let lits = sorted_literals(clause);
    (0..8u8)
        .map(|m| [m & 4 != 0, m & 2 != 0, m & 1 != 0])
        .filter(|vals| lits.iter().zip(vals).any(|(l, &v)| v == l.positive))
        .collect()
}

fn clause_action(k: usize) -> ActionId {
    ActionId(2 + k as u32)
}

/// Builds the system whose plan existence is equivalent to satisfiability of `phi`.
pub fn system_from_cnf(phi: &Cnf3) -> PwlSystem {
    let n = phi.num_vars();
    let t = phi.num_clauses();
    let states = SymbolTable::new(
        "state",
        std::iter::once("b".to_string()).chain((1..=n + t + 1).map(|i| format!("q{i}"))),
    )
    .expect("generated names");
    let actions = SymbolTable::new(
        "action",
        ["0", "1"].into_iter().map(String::from).chain((1..=7).map(|k| format!("a{k}"))),
    )
    .expect("generated names");
    let sink = StateId(0);
    let row = |i: usize| StateId(i as u32); // q_i has index i
    let goal = row(n + t + 1);
    let na = actions.len();
    let nq = states.len();
    let clause_tables: Vec<Vec<[bool; 3]>> = phi.clauses().iter().map(clause_assignments).collect();

    let mut behaviors = Vec::with_capacity(2 * n);
    for value in [false, true] {
        for var in 1..=n {
            let mut next = vec![sink; nq * na];
            for q in 0..nq {
                for a in 0..na {
                    let to = if q == 0 || q == goal.index() {
                        StateId(q as u32)
                    } else if q <= n {
                        // Variable row q: the complement of this behavior's value exits to the goal.
                        match a {
                            0 | 1 => {
                                let played = a == 1;
                                if q == var && played != value {
                                    goal
                                } else {
                                    row(q + 1)
                                }
                            }
                            _ => sink,
                        }
                    } else {
                        let j = q - n - 1;
                        let lits = sorted_literals(&phi.clauses()[j]);
                        match a.checked_sub(2).and_then(|k| clause_tables[j].get(k)) {
                            Some(vals) => {
                                let contradicts = lits
                                    .iter()
                                    .zip(vals)
                                    .any(|(l, &v)| l.var == var && v != value);
                                if contradicts {
                                    sink
                                } else {
                                    row(q + 1)
                                }
                            }
                            None => sink,
                        }
                    };
                    next[q * na + a] = to;
                }
            }
            behaviors.push(BehaviorTable::new(format!("E{var}:{}", value as u8), na, next));
        }
    }
    PwlSystem::new(states, actions, row(1), [goal], behaviors).expect("reduction output is valid")
}

/// The action sequence that plays `s(i)` at variable row `i` and the clause
/// action matching `s` restricted to clause `j` at row `n + j`.
pub fn assignment_actions(phi: &Cnf3, s: &Assignment) -> Result<Vec<ActionId>> {
    if s.num_vars() != phi.num_vars() {
        return Err(validation(format!(
            "assignment has {} values for {} variables",
            s.num_vars(),
            phi.num_vars()
        )));
    }
    let mut seq: Vec<ActionId> = s.values().iter().map(|&v| if v { ONE } else { ZERO }).collect();
    for (j, clause) in phi.clauses().iter().enumerate() {
        let lits = sorted_literals(clause);
        let restricted = lits.map(|l| s.value(l.var));
        let k = clause_assignments(clause)
            .iter()
            .position(|vals| *vals == restricted)
            .ok_or(PwlError::RestrictionUnsatisfied { clause: j + 1 })?;
        seq.push(clause_action(k));
    }
    Ok(seq)
}

/// The plan induced by an assignment, with horizon `n + t`.
pub fn plan_from_assignment(phi: &Cnf3, s: &Assignment) -> Result<PlanTable> {
    let seq = assignment_actions(phi, s)?;
    let sys = system_from_cnf(phi);
    Ok(plan_from_action_sequence(&seq, &sys, phi.num_vars() + phi.num_clauses()))
}

/// Reads an assignment off the first `n` actions of a satisfactory plan,
/// along the history where no behavior has exited yet.
pub fn assignment_from_plan(phi: &Cnf3, plan: &PlanTable) -> Result<Assignment> {
    let sys = system_from_cnf(phi);
    let horizon = phi.num_vars() + phi.num_clauses();
    let verdict = verify(&sys, plan, horizon, 1.0)?;
    if !verdict.satisfactory {
        return Err(PwlError::NotSatisfactory(format!(
            "{} of {} behaviors reach the goal",
            verdict.satisfied_count,
            verdict.traces.len()
        )));
    }
    let mut h = HistoryKey::new(sys.initial());
    let mut values = Vec::with_capacity(phi.num_vars());
    for i in 1..=phi.num_vars() {
        let value = match plan.action(&h) {
            Some(ZERO) => false,
            Some(ONE) => true,
            _ => {
                return Err(PwlError::NotSatisfactory(format!(
                    "row {i} does not play 0 or 1"
                )))
            }
        };
        values.push(value);
        h.push(if value { ONE } else { ZERO }, StateId(i as u32 + 1));
    }
    Ok(Assignment(values))
}

/// First satisfying assignment in lexicographic order (`v1` most
/// significant), or `None` when the formula is unsatisfiable.
pub fn sat_oracle(phi: &Cnf3) -> Result<Option<Assignment>> {
    let n = phi.num_vars();
    if n > SAT_ORACLE_MAX_VARS {
        return Err(PwlError::SizeLimit(format!(
            "{n} variables exceeds the brute-force limit of {SAT_ORACLE_MAX_VARS}"
        )));
    }
    Ok((0u32..1 << n)
        .map(|m| Assignment((0..n).map(|i| m >> (n - 1 - i) & 1 == 1).collect()))
        .find(|s| phi.is_satisfied_by(s)))
}

/// The eight clauses over `v1, v2, v3` with every sign pattern.
pub fn all_sign_patterns_cnf() -> Cnf3 {
    let clauses: Vec<[i64; 3]> = (0..8)
        .map(|m| [1, 2, 3].map(|v: i64| if m >> (3 - v) & 1 == 1 { -v } else { v }))
        .collect();
    Cnf3::from_signed(3, &clauses).expect("valid formula")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi() -> Cnf3 {
        Cnf3::from_signed(3, &[[1, 2, -3]]).unwrap()
    }

    #[test]
    fn clause_assignment_order() {
        let vals = clause_assignments(&phi().clauses()[0]);
        assert_eq!(vals.len(), 7);
        // (0,0,1) falsifies v1 | v2 | !v3.
        assert!(!vals.contains(&[false, false, true]));
        assert_eq!(vals[0], [false, false, false]);
        assert_eq!(vals[1], [false, true, false]);
        assert_eq!(vals[6], [true, true, true]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(Cnf3::from_signed(3, &[[1, 1, 2]]), Err(PwlError::Validation(_))));
        assert!(matches!(Cnf3::from_signed(1, &[[1, 2, 3]]), Err(PwlError::Validation(_))));
        assert!(matches!(Cnf3::from_signed(3, &[]), Err(PwlError::Validation(_))));
    }

    #[test]
    fn dimacs_round_trip() {
        let text = "c example\np cnf 3 2\n1 2 -3 0\n-1 2 3 0\n";
        let cnf = Cnf3::from_dimacs(text).unwrap();
        assert_eq!(cnf.num_clauses(), 2);
        assert_eq!(Cnf3::from_dimacs(&cnf.to_dimacs()).unwrap(), cnf);
        assert!(Cnf3::from_dimacs("p cnf 3 1\n1 2 0\n").is_err());
        assert!(Cnf3::from_dimacs("p cnf 3 1\n1 2 -2 0\n").is_err());
        assert!(Cnf3::from_dimacs("1 2 3 0\n").is_err());
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(sat_oracle(&phi()).unwrap(), Some(Assignment::from_bits(&[0, 0, 0])));
        assert_eq!(sat_oracle(&all_sign_patterns_cnf()).unwrap(), None);
        let big = Cnf3::from_signed(26, &[[1, 2, 3]]).unwrap();
        assert!(matches!(sat_oracle(&big), Err(PwlError::SizeLimit(_))));
    }

    #[test]
    fn restriction_unsatisfied() {
        let err = plan_from_assignment(&phi(), &Assignment::from_bits(&[0, 0, 1])).unwrap_err();
        assert_eq!(err, PwlError::RestrictionUnsatisfied { clause: 1 });
    }

    #[test]
    fn system_shape() {
        let sys = system_from_cnf(&phi());
        assert_eq!((sys.num_states(), sys.num_behaviors(), sys.num_actions()), (6, 6, 9));
        assert_eq!(sys.goal_states().collect::<Vec<_>>(), vec![sys.state("q5").unwrap()]);
        assert_eq!(sys.initial(), sys.state("q1").unwrap());
        let b = sys.state("b").unwrap();
        for e in 0..6 {
            for a in 0..9 {
                assert_eq!(sys.transition(e, b, ActionId(a)), b);
            }
        }
    }
}
