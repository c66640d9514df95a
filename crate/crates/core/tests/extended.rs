use proptest::prelude::*;

use pwl::domains::{gen_alarm_example, gen_door_example, gen_random};
use pwl::extended::{embed_basic, ext_simulate, ext_synthesize, ext_verify, ExtendedSystem};
use pwl::plan::plan_from_action_sequence;
use pwl::{exists_plan, synthesize, verify, ActionId, Dynamics, Outcome, PlanTable};

fn names(es: &ExtendedSystem, plan: &PlanTable) -> Vec<(Vec<String>, String)> {
    plan.entries()
        .map(|(h, a)| (h.to_names(es.states(), es.actions()), es.actions().name(a.0).to_string()))
        .collect()
}

#[test]
fn alarm_needs_sensing() {
    let es = gen_alarm_example();
    assert!(ext_synthesize(&es, 2).is_none());
    let plan = ext_synthesize(&es, 3).unwrap();
    let entries = names(&es, &plan);
    assert_eq!(entries[0], (vec!["home".to_string()], "sense".to_string()));
    assert!(entries.iter().all(|(_, a)| a != "alarm"));
    assert!(ext_verify(&es, &plan, 3, 1.0).unwrap().satisfactory);
}

#[test]
fn alarm_switches_behavior() {
    let es = gen_alarm_example();
    let seq: Vec<ActionId> = ["alarm", "left"].iter().map(|a| ActionId(es.actions().get(a).unwrap())).collect();
    let plan = plan_from_action_sequence(&seq, &es, 2);
    let hostile = es.behaviors().get("hostile").unwrap() as usize;
    for &b0 in es.candidates() {
        let trace = ext_simulate(&es, &plan, b0, 2).unwrap();
        assert_eq!(trace.hidden, vec![b0, hostile, hostile]);
        assert_eq!(trace.outcome, Outcome::HorizonExhausted);
    }
    assert!(ext_simulate(&es, &plan, hostile, 2).is_err());
}

#[test]
fn door_opens_after_knock() {
    let es = gen_door_example();
    let plan = ext_synthesize(&es, 2).unwrap();
    let path: Vec<String> = names(&es, &plan).into_iter().map(|(_, a)| a).collect();
    assert_eq!(path, vec!["knock", "enter"]);
    let trace = ext_simulate(&es, &plan, 0, 2).unwrap();
    assert_eq!(trace.hidden, vec![0, 1, 1]);
    assert!(ext_synthesize(&es, 1).is_none());
}

#[test]
fn json_round_trip() {
    for es in [gen_alarm_example(), gen_door_example()] {
        assert_eq!(ExtendedSystem::from_json(&es.to_json()).unwrap(), es);
    }
}

proptest! {
    #[test]
    fn embedding_preserves_verdicts(seed in 0u64..2000, h in 1usize..6, bits in any::<u64>()) {
        let sys = gen_random(seed, 5, 3, 3, 0.25);
        let es = embed_basic(&sys);
        let seq: Vec<ActionId> = (0..h).map(|k| ActionId(((bits >> (2 * k)) % 3) as u32)).collect();
        let plan = plan_from_action_sequence(&seq, &sys, h);
        let basic = verify(&sys, &plan, h, 0.5).unwrap();
        let ext = ext_verify(&es, &plan, h, 0.5).unwrap();
        prop_assert_eq!(basic.satisfied_count, ext.satisfied_count);
        for (x, y) in basic.traces.iter().zip(&ext.traces) {
            prop_assert_eq!(&x.history, &y.history);
            prop_assert_eq!(&x.outcome, &y.outcome);
        }
    }

    #[test]
    fn embedding_preserves_synthesis(seed in 0u64..2000, h in 0usize..6) {
        let sys = gen_random(seed, 4, 2, 3, 0.25);
        let es = embed_basic(&sys);
        prop_assert_eq!(exists_plan(&sys, h), ext_synthesize(&es, h).is_some());
        prop_assert_eq!(synthesize(&sys, h), ext_synthesize(&es, h));
    }

    #[test]
    fn hidden_trace_follows_global_transition(seed in 0u64..2000, h in 1usize..6, bits in any::<u64>()) {
        let es = gen_alarm_example();
        let seq: Vec<ActionId> = (0..h).map(|k| ActionId(((bits >> (3 * k)) % 5) as u32)).collect();
        let plan = plan_from_action_sequence(&seq, &es, h);
        let b0 = es.candidates()[(seed % 2) as usize];
        let trace = ext_simulate(&es, &plan, b0, h).unwrap();
        prop_assert_eq!(trace.hidden.len(), trace.history.len() + 1);
        for (k, (q, a, q2)) in trace.history.transitions().enumerate() {
            prop_assert_eq!(es.gamma(q, trace.hidden[k], a), (q2, trace.hidden[k + 1]));
        }
        prop_assert_eq!(trace.history.first_state(), es.initial());
    }
}
