//! Acceptance suite: one PASS/FAIL line per criterion. Oracles here are
//! written independently of the library's search and simulation code.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use pwl::bench::{verification_scaling, BenchConfig};
use pwl::domains::{gen_intro_example, gen_ma_goal_instances, gen_random, intro_plan};
use pwl::extended::{embed_basic, ext_verify};
use pwl::multiagent::{ma_brute_force_exists, open_loop_plan, reduce_goals, MaCaps, MultiAgentPlan};
use pwl::plan::TreeChoice;
use pwl::reduction::{
    all_sign_patterns_cnf, assignment_from_plan, plan_from_assignment, sat_oracle, system_from_cnf, Cnf3, Literal,
};
use pwl::{
    canonicalize_plan, decision_tree_view, exists_plan, plan_from_action_sequence, shrink, synthesize, verify,
    ActionId, BehaviorSet, HistoryKey, PlanTable, PwlSystem, StateId,
};

const SUITE1_MAX_SECONDS: f64 = 60.0;
const ORACLE_MAX_SECONDS: f64 = 300.0;
const MAX_RATIO_PER_DOUBLING: f64 = 3.0;
const SHRINK_SYSTEMS: usize = 100;
const ORACLE_SYSTEMS: usize = 500;
const ORACLE_HORIZON: usize = 4;
const EMBEDDING_PAIRS: usize = 100;
const MA_PLAN_CAP: usize = 200_000;

struct Report {
    lines: Vec<(usize, bool, String)>,
}

impl Report {
    fn record(&mut self, id: usize, title: &str, pass: bool, detail: String) {
        let line = format!("{} [{id:>2}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id, pass, line));
    }
}

/// Tally for the canonical-size bound, fed by every suite.
#[derive(Default)]
struct CanonTally {
    checked: usize,
    violations: Vec<String>,
}

impl CanonTally {
    fn check(&mut self, sys: &PwlSystem, plan: &PlanTable, origin: &str) {
        let canonical = canonicalize_plan(sys, plan).expect("plan fits its system");
        self.checked += 1;
        let bound = sys.num_behaviors() * plan.horizon();
        if canonical.len() > bound {
            self.violations.push(format!("{origin}: {} > {bound}", canonical.len()));
        }
    }
}

// ---------------------------------------------------------------- oracles

fn literal_true(lit: &Literal, bits: u32) -> bool {
    let x = lit.to_dimacs();
    (bits >> (x.unsigned_abs() - 1) & 1 == 1) == (x > 0)
}

/// Brute-force satisfiability over all assignments; returns one model.
fn brute_sat(phi: &Cnf3) -> Option<u32> {
    (0u32..1 << phi.num_vars()).find(|&bits| phi.clauses().iter().all(|c| c.iter().any(|l| literal_true(l, bits))))
}

fn assignment_bits(values: &[bool]) -> u32 {
    values.iter().enumerate().map(|(i, &v)| (v as u32) << i).sum()
}

/// Runs `plan` under behavior `b` by direct table lookups; returns the number
/// of actions to the goal, or `None` on failure within `horizon`.
fn run_to_goal(sys: &PwlSystem, plan: &PlanTable, b: usize, horizon: usize) -> Option<usize> {
    let mut q = sys.initial();
    let mut states = vec![q];
    let mut actions = Vec::new();
    loop {
        if sys.is_goal(q) {
            return Some(actions.len());
        }
        if actions.len() == horizon {
            return None;
        }
        let h = HistoryKey::from_parts(&states, &actions).expect("alternating history");
        let a = plan.action(&h)?;
        q = sys.behaviors()[b].next(q, a);
        actions.push(a);
        states.push(q);
    }
}

fn solves_all(sys: &PwlSystem, plan: &PlanTable, horizon: usize) -> bool {
    (0..sys.num_behaviors()).all(|b| run_to_goal(sys, plan, b, horizon).is_some())
}

/// Every decision tree of depth at most `depth` rooted at `h`, as entry
/// lists. Children are the distinct next states among behaviors that agree
/// with `h`, found by replaying each behavior.
fn all_trees(sys: &PwlSystem, states: &[StateId], actions: &[ActionId], alive: &[usize], depth: usize) -> Vec<Vec<(HistoryKey, ActionId)>> {
    let q = *states.last().unwrap();
    if sys.is_goal(q) || depth == 0 {
        return vec![Vec::new()];
    }
    let h = HistoryKey::from_parts(states, actions).unwrap();
    let mut out = Vec::new();
    for a in (0..sys.num_actions() as u32).map(ActionId) {
        let mut groups: BTreeMap<StateId, Vec<usize>> = BTreeMap::new();
        for &b in alive {
            groups.entry(sys.behaviors()[b].next(q, a)).or_default().push(b);
        }
        let mut partial: Vec<Vec<(HistoryKey, ActionId)>> = vec![vec![(h.clone(), a)]];
        for (next, group) in groups {
            let mut s2 = states.to_vec();
            s2.push(next);
            let mut a2 = actions.to_vec();
            a2.push(a);
            let subtrees = all_trees(sys, &s2, &a2, &group, depth - 1);
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    subtrees.iter().map(move |t| {
                        let mut merged = p.clone();
                        merged.extend(t.iter().cloned());
                        merged
                    })
                })
                .collect();
        }
        out.extend(partial);
    }
    out
}

fn brute_force_exists(sys: &PwlSystem, horizon: usize) -> bool {
    let all: Vec<usize> = (0..sys.num_behaviors()).collect();
    all_trees(sys, &[sys.initial()], &[], &all, horizon).into_iter().any(|entries| {
        let mut plan = PlanTable::new(horizon);
        for (h, a) in entries {
            plan.insert(h, a);
        }
        solves_all(sys, &plan, horizon)
    })
}

/// Longest run of `plan` over all behaviors, by direct replay.
fn longest_branch(sys: &PwlSystem, plan: &PlanTable) -> Option<usize> {
    (0..sys.num_behaviors())
        .map(|b| run_to_goal(sys, plan, b, plan.horizon()))
        .try_fold(0, |m, r| r.map(|x| m.max(x)))
}

// ---------------------------------------------------------------- padding

fn no_learning_loop(sys: &PwlSystem, q: StateId, k: &BehaviorSet) -> Option<Vec<(ActionId, StateId)>> {
    let mut parent: Vec<Option<(StateId, ActionId)>> = vec![None; sys.num_states()];
    let mut seen = vec![false; sys.num_states()];
    seen[q.index()] = true;
    let mut queue = std::collections::VecDeque::from([q]);
    while let Some(cur) = queue.pop_front() {
        for a in (0..sys.num_actions() as u32).map(ActionId) {
            let mut next: Vec<StateId> = k.iter().map(|b| sys.behaviors()[b].next(cur, a)).collect();
            next.dedup();
            if next.len() != 1 || sys.is_goal(next[0]) {
                continue;
            }
            if next[0] == q {
                let mut path = vec![(a, q)];
                let mut at = cur;
                while at != q {
                    let (p, pa) = parent[at.index()].unwrap();
                    path.push((pa, at));
                    at = p;
                }
                path.reverse();
                return Some(path);
            }
            if !seen[next[0].index()] {
                seen[next[0].index()] = true;
                parent[next[0].index()] = Some((cur, a));
                queue.push_back(next[0]);
            }
        }
    }
    None
}

fn pad(plan: &PlanTable, h: &HistoryKey, cycle: &[(ActionId, StateId)], reps: usize) -> PlanTable {
    let mut segment = h.clone();
    let mut out = PlanTable::new(plan.horizon() + reps * cycle.len());
    for _ in 0..reps {
        for &(a, q) in cycle {
            out.insert(segment.clone(), a);
            segment.push(a, q);
        }
    }
    let prefix = h.as_raw();
    for (key, a) in plan.entries() {
        let raw = key.as_raw();
        if raw.starts_with(prefix) {
            let mut shifted = segment.clone();
            for pair in raw[prefix.len()..].chunks(2) {
                shifted.push(ActionId(pair[0]), StateId(pair[1]));
            }
            out.insert(shifted, a);
        } else {
            out.insert(key.clone(), a);
        }
    }
    out
}

/// Pads every entry of `plan` that admits a no-learning loop.
fn pad_everywhere(sys: &PwlSystem, plan: &PlanTable, reps: usize) -> Option<PlanTable> {
    let spots: Vec<(HistoryKey, Vec<(ActionId, StateId)>)> = plan
        .entries()
        .filter_map(|(h, _)| no_learning_loop(sys, h.last_state(), &sys.consistent_behaviors(h)).map(|c| (h.clone(), c)))
        .collect();
    if spots.is_empty() {
        return None;
    }
    // Deepest first so earlier insertions do not move later spots.
    let mut current = plan.clone();
    for (h, cycle) in spots.into_iter().rev() {
        current = pad(&current, &h, &cycle, reps);
    }
    Some(current)
}

// ---------------------------------------------------------------- suites

fn suite_one() -> Vec<Cnf3> {
    let mut formulas = Vec::new();
    let patterns: Vec<[i64; 3]> = (0..8)
        .map(|m| [1, 2, 3].map(|v: i64| if m >> (v - 1) & 1 == 1 { -v } else { v }))
        .collect();
    for mask in 1u32..1 << 8 {
        if mask.count_ones() <= 4 {
            let clauses: Vec<[i64; 3]> = (0..8).filter(|i| mask >> i & 1 == 1).map(|i| patterns[i]).collect();
            formulas.push(Cnf3::from_signed(3, &clauses).unwrap());
        }
    }
    for seed in 0..200u64 {
        formulas.push(Cnf3::random(seed, 4, 1 + (seed % 4) as usize).unwrap());
    }
    formulas
}

fn criteria_one_two(report: &mut Report, canon: &mut CanonTally) {
    let start = Instant::now();
    let formulas = suite_one();
    let mut agree = 0;
    let mut sat_count = 0;
    let mut round_trip_ok = 0;
    let mut round_trip_total = 0;
    let mut problems = Vec::new();
    for (i, phi) in formulas.iter().enumerate() {
        let sys = system_from_cnf(phi);
        let h = phi.num_vars() + phi.num_clauses();
        let oracle = sat_oracle(phi).unwrap();
        let exists = exists_plan(&sys, h);
        let brute = brute_sat(phi);
        if exists == oracle.is_some() && brute.is_some() == oracle.is_some() {
            agree += 1;
        } else {
            problems.push(format!("formula {i}"));
        }
        if let Some(s) = oracle {
            sat_count += 1;
            round_trip_total += 2;
            let plan = plan_from_assignment(phi, &s).unwrap();
            canon.check(&sys, &plan, "assignment plan");
            if solves_all(&sys, &plan, h) && verify(&sys, &plan, h, 1.0).unwrap().satisfactory {
                round_trip_ok += 1;
            }
            if let Some(synth) = synthesize(&sys, h) {
                canon.check(&sys, &synth, "reduction synthesis");
                let decoded = assignment_from_plan(phi, &synth).unwrap();
                let bits = assignment_bits(decoded.values());
                if phi.clauses().iter().all(|c| c.iter().any(|l| literal_true(l, bits))) {
                    round_trip_ok += 1;
                }
            }
        }
    }
    // An unsatisfiable case on top of the suite.
    let uns = all_sign_patterns_cnf();
    let uns_ok = brute_sat(&uns).is_none() && !exists_plan(&system_from_cnf(&uns), 11);
    let secs = start.elapsed().as_secs_f64();
    report.record(
        1,
        "3-SAT reduction equivalence",
        agree == formulas.len() && uns_ok && secs < SUITE1_MAX_SECONDS,
        format!(
            "{agree}/{} formulas agree ({sat_count} satisfiable), 8-clause UNSAT has no plan: {uns_ok}, {secs:.2}s < {SUITE1_MAX_SECONDS}s{}",
            formulas.len(),
            if problems.is_empty() { String::new() } else { format!("; mismatches: {problems:?}") }
        ),
    );
    report.record(
        2,
        "3-SAT round trips",
        round_trip_ok == round_trip_total && round_trip_total == 2 * sat_count,
        format!("{round_trip_ok}/{round_trip_total} plan and assignment round trips hold"),
    );
}

fn criteria_three(report: &mut Report, canon: &mut CanonTally) {
    let mut accepted = 0;
    let mut ok = 0;
    let mut grew = 0;
    let mut seed = 0u64;
    let mut failures = Vec::new();
    while accepted < SHRINK_SYSTEMS && seed < 100_000 {
        seed += 1;
        let t = 2 + (seed % 7) as usize;
        let s = 1 + (seed / 7 % 4) as usize;
        let a = 2 + (seed / 28 % 2) as usize;
        let sys = gen_random(seed, t, a, s, 0.2);
        let bound = s * t;
        let Some(plan) = synthesize(&sys, bound) else { continue };
        let Some(long) = pad_everywhere(&sys, &plan, 1 + (seed % 3) as usize) else { continue };
        if !solves_all(&sys, &long, long.horizon()) {
            failures.push(format!("seed {seed}: padding broke the plan"));
            continue;
        }
        accepted += 1;
        if longest_branch(&sys, &long).unwrap() > bound {
            grew += 1;
        }
        canon.check(&sys, &long, "padded plan");
        let short = shrink(&sys, &long).unwrap();
        canon.check(&sys, &short, "shrunk plan");
        match longest_branch(&sys, &short) {
            Some(depth) if depth <= bound && short.horizon() <= bound => ok += 1,
            other => failures.push(format!("seed {seed}: longest branch {other:?}, bound {bound}")),
        }
    }
    report.record(
        3,
        "shrink bound",
        accepted == SHRINK_SYSTEMS && ok == accepted && failures.is_empty(),
        format!(
            "{ok}/{accepted} padded plans shrink to branches <= s*t and stay satisfactory ({grew} padded past s*t){}",
            if failures.is_empty() { String::new() } else { format!("; {failures:?}") }
        ),
    );
}

fn criterion_five(report: &mut Report, canon: &mut CanonTally) {
    let start = Instant::now();
    let mut agree = 0;
    let mut positives = 0;
    let mut mismatches = Vec::new();
    for seed in 0..ORACLE_SYSTEMS as u64 {
        let t = 1 + (seed % 4) as usize;
        let a = 1 + (seed / 4 % 2) as usize;
        let s = 1 + (seed / 8 % 3) as usize;
        let density = [0.1, 0.25, 0.4][(seed / 24 % 3) as usize];
        let sys = gen_random(seed, t, a, s, density);
        let expected = brute_force_exists(&sys, ORACLE_HORIZON);
        let got = exists_plan(&sys, ORACLE_HORIZON);
        if let Some(plan) = synthesize(&sys, ORACLE_HORIZON) {
            canon.check(&sys, &plan, "oracle synthesis");
            if !solves_all(&sys, &plan, ORACLE_HORIZON) {
                mismatches.push(format!("seed {seed}: synthesized plan fails"));
            }
        }
        positives += expected as usize;
        if expected == got {
            agree += 1;
        } else {
            mismatches.push(format!("seed {seed}: oracle {expected}, search {got}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report.record(
        5,
        "synthesizer vs decision-tree enumeration",
        agree == ORACLE_SYSTEMS && mismatches.is_empty() && secs < ORACLE_MAX_SECONDS,
        format!(
            "{agree}/{ORACLE_SYSTEMS} agree at H={ORACLE_HORIZON} ({positives} solvable), {secs:.2}s < {ORACLE_MAX_SECONDS}s{}",
            if mismatches.is_empty() { String::new() } else { format!("; {mismatches:?}") }
        ),
    );
}

fn criterion_six(report: &mut Report) {
    let config = BenchConfig::default();
    let bench = verification_scaling(&config).unwrap();
    let ratios = bench.ratios_per_doubling();
    let steps_exact = bench.points.iter().all(|p| p.step_applications == p.behaviors * config.horizon);
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let times: Vec<String> = bench.points.iter().map(|p| format!("s={}:{:.3}ms", p.behaviors, p.seconds * 1e3)).collect();
    report.record(
        6,
        "verification scaling in s",
        steps_exact && max_ratio < MAX_RATIO_PER_DOUBLING,
        format!(
            "max ratio per doubling {max_ratio:.2} < {MAX_RATIO_PER_DOUBLING}, step applications == s*H: {steps_exact} ({})",
            times.join(", ")
        ),
    );
}

fn criterion_seven(report: &mut Report, canon: &mut CanonTally) {
    let sys = gen_intro_example();
    let plan = synthesize(&sys, 3).expect("intro example is solvable at H=3");
    canon.check(&sys, &plan, "intro");
    let tree = decision_tree_view(&sys, &plan);
    let c = sys.action("c").unwrap();
    let senses = matches!(&tree.choice, TreeChoice::Act(a, children) if *a == c && children.len() == 2);
    let conditional_ok = solves_all(&sys, &plan, 3) && verify(&sys, &plan, 3, 1.0).unwrap().satisfactory;
    let expected_ok = plan == intro_plan(&sys);
    let mut unconditional_fail = 0;
    for code in 0..64u32 {
        let seq: Vec<ActionId> = (0..3).map(|k| ActionId(code >> (2 * k) & 3)).collect();
        let p = plan_from_action_sequence(&seq, &sys, 3);
        let fails = !verify(&sys, &p, 3, 1.0).unwrap().satisfactory;
        // Independent check: some behavior misses the goal.
        let mut open = PlanTable::new(3);
        for b in 0..2 {
            let mut states = vec![sys.initial()];
            for (k, &a) in seq.iter().enumerate() {
                let h = HistoryKey::from_parts(&states, &seq[..k]).unwrap();
                open.insert(h, a);
                states.push(sys.behaviors()[b].next(states[k], a));
            }
        }
        if fails && !solves_all(&sys, &open, 3) {
            unconditional_fail += 1;
        }
    }
    report.record(
        7,
        "introductory sensing example",
        senses && conditional_ok && expected_ok && unconditional_fail == 64,
        format!(
            "root senses with c and branches: {senses}, conditional plan passes: {conditional_ok}, matches c/d/x|y shape: {expected_ok}, unconditional plans failing: {unconditional_fail}/64"
        ),
    );
}

fn criterion_eight(report: &mut Report, canon: &mut CanonTally) {
    let mut agree = 0;
    for seed in 0..EMBEDDING_PAIRS as u64 {
        let sys = gen_random(seed * 31 + 7, 2 + (seed % 7) as usize, 2 + (seed % 2) as usize, 1 + (seed % 5) as usize, 0.25);
        let h = 1 + (seed % 6) as usize;
        let seq: Vec<ActionId> = (0..h).map(|k| ActionId(((seed >> k) as usize % sys.num_actions()) as u32)).collect();
        let plan = plan_from_action_sequence(&seq, &sys, h);
        canon.check(&sys, &plan, "embedding");
        let theta = [1.0, 0.5, 0.2][(seed % 3) as usize];
        let basic = verify(&sys, &plan, h, theta).unwrap();
        let ext = ext_verify(&embed_basic(&sys), &plan, h, theta).unwrap();
        let same_traces = basic
            .traces
            .iter()
            .zip(&ext.traces)
            .all(|(x, y)| x.history == y.history && x.outcome == y.outcome);
        if basic.satisfactory == ext.satisfactory
            && basic.satisfied_count == ext.satisfied_count
            && basic.traces.len() == ext.traces.len()
            && same_traces
        {
            agree += 1;
        }
    }
    report.record(
        8,
        "extended embedding",
        agree == EMBEDDING_PAIRS,
        format!("{agree}/{EMBEDDING_PAIRS} (system, plan) pairs give identical verdicts and traces"),
    );
}

fn criterion_nine(report: &mut Report) {
    let instances = gen_ma_goal_instances();
    let mut agree = 0;
    let mut sizes_ok = 0;
    let mut verdicts = Vec::new();
    for inst in &instances {
        let ms = &inst.system;
        let reduced = reduce_goals(ms, &MaCaps::default()).unwrap();
        let n = [ms.agent(0).goals.len(), ms.agent(1).goals.len()];
        let sizes = (0..2).all(|i| reduced.agent(i).states.len() == ms.agent(i).states.len() * (n[i] + 2) + 1)
            && reduced.behaviors().len() == ms.behaviors().len() * n[0] * n[1];
        sizes_ok += sizes as usize;
        let original = ma_brute_force_exists(ms, inst.horizon, MA_PLAN_CAP).unwrap();
        let transformed = ma_brute_force_exists(&reduced, inst.horizon + 1, MA_PLAN_CAP).unwrap();
        agree += (original == transformed) as usize;
        verdicts.push(format!("{}={}", inst.name, original));
    }
    let two_goal = instances.iter().all(|i| i.system.agent(0).goals.len() == 2 && i.system.agent(1).goals.len() == 2);
    let mixed = verdicts.iter().any(|v| v.ends_with("true")) && verdicts.iter().any(|v| v.ends_with("false"));
    report.record(
        9,
        "goal reduction preserves plan existence",
        instances.len() >= 5 && two_goal && agree == instances.len() && sizes_ok == instances.len() && mixed,
        format!(
            "{agree}/{} instances agree (S at H, reduced at H+1), size formulas hold on {sizes_ok}; {}",
            instances.len(),
            verdicts.join(", ")
        ),
    );
}

// ---------------------------------------------------------------- CLI determinism

fn run_cli(args: &[&str], dir: &Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_pwl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn without_timing(stdout: &[u8]) -> Vec<u8> {
    let mut v: serde_json::Value = serde_json::from_slice(stdout).expect("bench prints JSON");
    v.as_object_mut().unwrap().remove("timing");
    serde_json::to_vec(&v).unwrap()
}

fn criterion_ten(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sys = gen_intro_example();
    let padded = {
        let h = HistoryKey::new(sys.state("s0").unwrap()).extended(sys.action("c").unwrap(), sys.state("sA").unwrap());
        let cycle = [(sys.action("d").unwrap(), sys.state("s0").unwrap()), (sys.action("c").unwrap(), sys.state("sA").unwrap())];
        pad(&intro_plan(&sys), &h, &cycle, 2)
    };
    std::fs::write(d.join("long.json"), padded.to_json(sys.states(), sys.actions())).unwrap();
    std::fs::write(d.join("phi.cnf"), "p cnf 3 2\n1 2 3 0\n-1 -2 3 0\n").unwrap();
    std::fs::write(
        d.join("net.json"),
        r#"{"vertices":["S","A","B","T"],"edges":[{"label":"u","from":"S","to":"A"},{"label":"at","from":"A","to":"T"},{"label":"bt","from":"B","to":"T"}],"uncertain":[{"edge":"u","endpoints":["A","B"]}],"start":"S","target":"T"}"#,
    )
    .unwrap();
    std::fs::write(d.join("bench.json"), r#"{"behaviors":[1,2,4],"horizon":8,"repetitions":1}"#).unwrap();

    // Setup commands whose outputs feed later ones.
    let setup: &[&[&str]] = &[
        &["gen", "intro", "--out", "intro.json"],
        &["gen", "bridge", "--out", "bridge.json"],
        &["gen", "alarm", "--out", "alarm.json"],
        &["synthesize", "--system", "intro.json", "--horizon", "3", "--out", "good.json"],
        &["ext-synthesize", "--system", "alarm.json", "--horizon", "3", "--out", "alarm_plan.json"],
        &["from-cnf", "--cnf", "phi.cnf", "--out", "phi.json"],
        &["synthesize", "--system", "phi.json", "--horizon", "5", "--out", "phi_plan.json"],
    ];
    for args in setup {
        run_cli(args, d);
    }
    let bridge = pwl::multiagent::MultiAgentSystem::from_json(
        &std::fs::read_to_string(d.join("bridge.json")).unwrap(),
        &MaCaps::default(),
    )
    .unwrap();
    let cross = ActionId(0);
    let wait = ActionId(1);
    let mp = MultiAgentPlan::new(
        vec![open_loop_plan(&bridge, 0, &[cross, wait])],
        vec![open_loop_plan(&bridge, 1, &[wait, cross]), open_loop_plan(&bridge, 1, &[cross, cross])],
    );
    std::fs::write(d.join("ma_plan.json"), serde_json::to_string_pretty(&mp.to_file(&bridge)).unwrap()).unwrap();

    let commands: Vec<(&[&str], Option<&str>)> = vec![
        (&["validate", "--system", "intro.json"], None),
        (&["validate", "--system", "bridge.json"], None),
        (&["verify", "--system", "intro.json", "--plan", "good.json"], None),
        (&["verify", "--system", "intro.json", "--plan", "long.json", "--horizon", "4"], None),
        (&["simulate", "--system", "intro.json", "--plan", "good.json", "--behavior", "E2"], None),
        (&["shrink", "--system", "intro.json", "--plan", "long.json", "--out", "short.json"], Some("short.json")),
        (&["synthesize", "--system", "intro.json", "--out", "synth.json"], Some("synth.json")),
        (&["from-cnf", "--cnf", "phi.cnf"], None),
        (&["plan-from-assignment", "--cnf", "phi.cnf", "--assignment", "001", "--out", "pa.json"], Some("pa.json")),
        (&["plan-from-assignment", "--cnf", "phi.cnf", "--assignment", "111"], None),
        (&["assignment-from-plan", "--cnf", "phi.cnf", "--plan", "phi_plan.json"], None),
        (&["gen", "intro"], None),
        (&["gen", "transport", "--spec", "net.json"], None),
        (&["gen", "random", "--seed", "5", "--states", "5", "--behaviors", "3"], None),
        (&["gen", "cnf", "--seed", "2", "--vars", "4", "--clauses", "3", "--dimacs-out", "r.cnf"], Some("r.cnf")),
        (&["gen", "cnf", "--unsat"], None),
        (&["gen", "alarm"], None),
        (&["gen", "door"], None),
        (&["gen", "ma", "--name", "blocking"], None),
        (&["ext-verify", "--system", "alarm.json", "--plan", "alarm_plan.json"], None),
        (&["ext-synthesize", "--system", "alarm.json", "--horizon", "3"], None),
        (&["ma-verify", "--system", "bridge.json", "--plan", "ma_plan.json", "--horizon", "2"], None),
        (&["reduce-goals", "--system", "bridge.json"], None),
        (&["bench", "--spec", "bench.json"], None),
    ];
    let mut identical = 0;
    let mut differing = Vec::new();
    for (args, file) in &commands {
        let runs: Vec<(i32, Vec<u8>, Option<Vec<u8>>)> = (0..2)
            .map(|_| {
                let (code, mut out) = run_cli(args, d);
                if args[0] == "bench" {
                    out = without_timing(&out);
                }
                let written = file.map(|f| std::fs::read(d.join(f)).unwrap());
                (code, out, written)
            })
            .collect();
        if runs[0] == runs[1] && !runs[0].1.is_empty() {
            identical += 1;
        } else {
            differing.push(args.join(" "));
        }
    }
    let covered: std::collections::BTreeSet<&str> = commands.iter().map(|(a, _)| a[0]).collect();
    let all_commands = [
        "validate", "verify", "simulate", "shrink", "synthesize", "from-cnf", "plan-from-assignment",
        "assignment-from-plan", "gen", "ext-verify", "ext-synthesize", "ma-verify", "reduce-goals", "bench",
    ];
    let coverage = all_commands.iter().all(|c| covered.contains(c));
    report.record(
        10,
        "determinism",
        identical == commands.len() && coverage,
        format!(
            "{identical}/{} invocations byte-identical across reruns, all {} subcommands covered: {coverage}{}",
            commands.len(),
            all_commands.len(),
            if differing.is_empty() { String::new() } else { format!("; differing: {differing:?}") }
        ),
    );
}

fn main() {
    let mut report = Report { lines: Vec::new() };
    let mut canon = CanonTally::default();
    criteria_one_two(&mut report, &mut canon);
    criteria_three(&mut report, &mut canon);
    criterion_five(&mut report, &mut canon);
    criterion_six(&mut report);
    criterion_seven(&mut report, &mut canon);
    criterion_eight(&mut report, &mut canon);
    report.record(
        4,
        "canonical plan size",
        canon.violations.is_empty() && canon.checked > 0,
        format!(
            "{} canonicalized plans across suites, {} exceed s*H{}",
            canon.checked,
            canon.violations.len(),
            if canon.violations.is_empty() { String::new() } else { format!(": {:?}", canon.violations) }
        ),
    );
    criterion_nine(&mut report);
    criterion_ten(&mut report);
    report.lines.sort_by_key(|(id, _, _)| *id);
    for (_, _, line) in &report.lines {
        println!("{line}");
    }
    let failed = report.lines.iter().filter(|(_, p, _)| !p).count();
    println!("acceptance: {} passed, {failed} failed", report.lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
