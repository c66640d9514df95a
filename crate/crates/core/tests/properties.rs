use proptest::prelude::*;

use pwl::domains::{gen_intro_example, gen_random, intro_plan};
use pwl::plan::TreeChoice;
use pwl::verify::replays;
use pwl::{
    canonicalize_plan, decision_tree_view, exists_plan, plan_from_action_sequence, shrink, simulate, synthesize,
    verify, ActionId, BehaviorSet, HistoryKey, PlanTable, PwlSystem, StateId,
};

/// A cycle from `q` back to `q` that avoids the goal and on which every
/// behavior in `k` makes the same moves.
fn no_learning_loop(sys: &PwlSystem, q: StateId, k: &BehaviorSet) -> Option<Vec<(ActionId, StateId)>> {
    let mut parent: Vec<Option<(usize, ActionId)>> = vec![None; sys.num_states()];
    let mut queue = std::collections::VecDeque::from([q]);
    let mut seen = vec![false; sys.num_states()];
    seen[q.index()] = true;
    while let Some(cur) = queue.pop_front() {
        for a in (0..sys.num_actions() as u32).map(ActionId) {
            let mut next: Vec<StateId> = k.iter().map(|b| sys.transition(b, cur, a)).collect();
            next.dedup();
            if next.len() != 1 || sys.is_goal(next[0]) {
                continue;
            }
            let n = next[0];
            if n == q {
                let mut path = vec![(a, q)];
                let mut at = cur;
                while at != q {
                    let (p, pa) = parent[at.index()].unwrap();
                    path.push((pa, at));
                    at = StateId(p as u32);
                }
                path.reverse();
                return Some(path);
            }
            if !seen[n.index()] {
                seen[n.index()] = true;
                parent[n.index()] = Some((cur.index(), a));
                queue.push_back(n);
            }
        }
    }
    None
}

/// Inserts `reps` traversals of a no-learning loop at history `h`, shifting
/// the subtree below `h` after the inserted segment.
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
            let rest: Vec<u32> = raw[prefix.len()..].to_vec();
            for pair in rest.chunks(2) {
                shifted.push(ActionId(pair[0]), StateId(pair[1]));
            }
            out.insert(shifted, a);
        } else {
            out.insert(key.clone(), a);
        }
    }
    out
}

/// Pads a satisfactory plan at up to `count` of its nodes that admit a loop.
fn padded(sys: &PwlSystem, plan: &PlanTable, count: usize, reps: usize) -> Option<PlanTable> {
    let mut current = plan.clone();
    let mut done = 0;
    while done < count {
        let spot = current.entries().find_map(|(h, _)| {
            let k = sys.consistent_behaviors(h);
            no_learning_loop(sys, h.last_state(), &k).map(|c| (h.clone(), c))
        })?;
        current = pad(&current, &spot.0, &spot.1, reps);
        done += 1;
    }
    Some(current)
}

fn random_system(seed: u64) -> PwlSystem {
    let t = 2 + (seed % 7) as usize;
    let a = 2 + (seed / 7 % 2) as usize;
    let s = 1 + (seed / 14 % 4) as usize;
    gen_random(seed, t, a, s, 0.2)
}

fn sequence(bits: u64, len: usize, na: usize) -> Vec<ActionId> {
    (0..len).map(|k| ActionId(((bits >> (2 * k)) % na as u64) as u32)).collect()
}

proptest! {
    #[test]
    fn knowledge_only_shrinks(seed in 0u64..5000, bits in any::<u64>(), h in 1usize..10) {
        let sys = random_system(seed);
        let plan = plan_from_action_sequence(&sequence(bits, h, sys.num_actions()), &sys, h);
        for b in 0..sys.num_behaviors() {
            let trace = simulate(&sys, &plan, b, h).unwrap();
            let raw = trace.history.as_raw();
            let mut previous = BehaviorSet::full(sys.num_behaviors());
            for k in (1..=raw.len()).step_by(2) {
                let prefix = HistoryKey::from_parts(
                    &raw[..k].iter().step_by(2).map(|&q| StateId(q)).collect::<Vec<_>>(),
                    &raw[1..k].iter().step_by(2).map(|&a| ActionId(a)).collect::<Vec<_>>(),
                ).unwrap();
                let knowledge = sys.consistent_behaviors(&prefix);
                prop_assert!(knowledge.contains(b));
                prop_assert!(knowledge.is_subset(&previous));
                previous = knowledge;
            }
        }
    }

    #[test]
    fn traces_replay(seed in 0u64..5000, bits in any::<u64>(), h in 0usize..10) {
        let sys = random_system(seed);
        let plan = plan_from_action_sequence(&sequence(bits, h, sys.num_actions()), &sys, h);
        let verdict = verify(&sys, &plan, h, 1.0).unwrap();
        prop_assert_eq!(verdict.traces.len(), sys.num_behaviors());
        for trace in &verdict.traces {
            prop_assert!(replays(&sys, trace));
        }
        prop_assert_eq!(verdict.step_applications, verdict.traces.iter().map(|t| t.steps()).sum::<usize>());
        prop_assert!(verdict.step_applications <= sys.num_behaviors() * h);
    }

    #[test]
    fn threshold_is_monotone(seed in 0u64..5000, bits in any::<u64>(), h in 1usize..8, x in 1u32..=100, y in 1u32..=100) {
        let sys = random_system(seed);
        let plan = plan_from_action_sequence(&sequence(bits, h, sys.num_actions()), &sys, h);
        let (lo, hi) = (x.min(y) as f64 / 100.0, x.max(y) as f64 / 100.0);
        let strict = verify(&sys, &plan, h, hi).unwrap();
        let loose = verify(&sys, &plan, h, lo).unwrap();
        prop_assert!(!strict.satisfactory || loose.satisfactory);
    }

    #[test]
    fn canonical_form_is_small_and_equivalent(seed in 0u64..5000, bits in any::<u64>(), h in 1usize..8) {
        let sys = random_system(seed);
        // Unconditional plan over every history of the right length, so
        // canonicalization has something to drop.
        let seq = sequence(bits, h, sys.num_actions());
        let mut plan = PlanTable::new(h);
        let mut frontier = vec![HistoryKey::new(sys.initial())];
        for &a in &seq {
            let mut next = Vec::new();
            for hist in frontier {
                for q in 0..sys.num_states() as u32 {
                    next.push(hist.extended(a, StateId(q)));
                }
                plan.insert(hist, a);
            }
            frontier = next;
            if frontier.len() > 2000 {
                break;
            }
        }
        let canonical = canonicalize_plan(&sys, &plan).unwrap();
        prop_assert!(canonical.len() <= sys.num_behaviors() * h);
        prop_assert_eq!(canonicalize_plan(&sys, &canonical).unwrap(), canonical.clone());
        let (a, b) = (verify(&sys, &plan, h, 1.0).unwrap(), verify(&sys, &canonical, h, 1.0).unwrap());
        prop_assert_eq!(a.traces, b.traces);
    }

    #[test]
    fn synthesized_plans_verify(seed in 0u64..5000) {
        let sys = random_system(seed);
        let bound = sys.num_behaviors() * sys.num_states();
        let plan = synthesize(&sys, bound);
        prop_assert_eq!(plan.is_some(), exists_plan(&sys, bound));
        if let Some(plan) = plan {
            prop_assert!(verify(&sys, &plan, bound, 1.0).unwrap().satisfactory);
            prop_assert!(plan.len() <= sys.num_behaviors() * bound);
            prop_assert_eq!(canonicalize_plan(&sys, &plan).unwrap(), plan.clone());
            prop_assert_eq!(synthesize(&sys, bound), Some(plan));
        }
    }

    #[test]
    fn existence_is_monotone_in_horizon(seed in 0u64..5000, h in 0usize..6) {
        let sys = random_system(seed);
        prop_assert!(!exists_plan(&sys, h) || exists_plan(&sys, h + 1));
        // The default bound is complete.
        prop_assert!(!exists_plan(&sys, h + 20) || exists_plan(&sys, sys.num_behaviors() * sys.num_states()));
    }

    #[test]
    fn shrink_bounds_padded_plans(seed in 0u64..5000, count in 1usize..3, reps in 1usize..4) {
        let sys = random_system(seed);
        let bound = sys.num_behaviors() * sys.num_states();
        let Some(plan) = synthesize(&sys, bound) else { return Ok(()); };
        let Some(long) = padded(&sys, &plan, count, reps) else { return Ok(()); };
        prop_assert!(verify(&sys, &long, long.horizon(), 1.0).unwrap().satisfactory);
        let short = shrink(&sys, &long).unwrap();
        prop_assert!(short.horizon() <= bound);
        prop_assert!(decision_tree_view(&sys, &short).depth() <= bound);
        prop_assert!(verify(&sys, &short, short.horizon(), 1.0).unwrap().satisfactory);
        prop_assert_eq!(shrink(&sys, &short).unwrap(), short);
    }
}

#[test]
fn shrink_removes_a_waiting_loop() {
    let sys = gen_intro_example();
    let plan = intro_plan(&sys);
    let a = |n: &str| sys.action(n).unwrap();
    let s = |n: &str| sys.state(n).unwrap();
    // c then d returns to s0 without learning anything only once knowledge is
    // a singleton, so pad after the split.
    let h = HistoryKey::new(s("s0")).extended(a("c"), s("sA"));
    let cycle = [(a("d"), s("s0")), (a("c"), s("sA"))];
    let long = pad(&plan, &h, &cycle, 3);
    assert_eq!(long.horizon(), 9);
    assert!(verify(&sys, &long, 9, 1.0).unwrap().satisfactory);
    assert_eq!(decision_tree_view(&sys, &long).depth(), 9);
    let short = shrink(&sys, &long).unwrap();
    assert_eq!(short, intro_plan(&sys).with_horizon(9));
}

#[test]
fn tree_view_of_intro_plan() {
    let sys = gen_intro_example();
    let tree = decision_tree_view(&sys, &intro_plan(&sys));
    assert_eq!(tree.depth(), 3);
    let TreeChoice::Act(a, children) = &tree.choice else {
        panic!("root acts");
    };
    assert_eq!(*a, sys.action("c").unwrap());
    assert_eq!(children.len(), 2);
    assert!(children.iter().all(|c| c.knowledge.len() == 1));
}
