mod common;

use std::collections::BTreeSet;

use common::graph_oracle::expected;
use common::random_fsm::random_fsm;
use fsmguard::frontend::{self, SourceText};
use fsmguard::rules::{detect_static_deadlock, detect_trap_loops, detect_unreachable_states};
use fsmguard::stg::{extract_stg, reachable_states};

#[test]
fn graph_rules_agree_with_oracle() {
    let mut nontrivial = (0, 0);
    for seed in 0..200 {
        let fsm = random_fsm(seed, 8);
        let ast = frontend::parse(&SourceText::new(fsm.text.clone(), "rnd.v")).unwrap_or_else(|d| panic!("{seed}: {d:?}\n{}", fsm.text));
        let stg = extract_stg(&ast, &BTreeSet::new()).unwrap();
        let want = expected(&fsm);
        assert_eq!(reachable_states(&stg), want.reachable, "seed {seed}");

        let got_dead: BTreeSet<String> = detect_static_deadlock(&stg).into_iter().map(|v| v.locus.states[0].clone()).collect();
        assert_eq!(got_dead, want.deadlocks, "seed {seed}\n{}", fsm.text);

        let got_traps: BTreeSet<Vec<String>> = detect_trap_loops(&stg)
            .into_iter()
            .map(|v| {
                let mut s = v.locus.states.clone();
                s.sort();
                s
            })
            .collect();
        assert_eq!(got_traps, want.traps, "seed {seed}\n{}", fsm.text);

        let got_unreach: BTreeSet<String> = detect_unreachable_states(&stg).into_iter().map(|v| v.locus.states[0].clone()).collect();
        assert_eq!(got_unreach, want.unreachable, "seed {seed}");

        nontrivial.0 += !want.deadlocks.is_empty() as usize;
        nontrivial.1 += !want.traps.is_empty() as usize;
    }
    // the sample exercises both rules
    assert!(nontrivial.0 > 10 && nontrivial.1 > 5, "{nontrivial:?}");
}
