mod common;

use std::collections::BTreeSet;

use common::*;
use fsmguard::rules::{run_all_checks, Evidence, RuleConfig, RuleId};
use fsmguard::stg::{extract_stg, reachable_states, unprotected_transitions, stg_isomorphic_modulo_encoding};

#[test]
fn aes_golden() {
    let r = run_all_checks(&fixture("aes_ctrl.v"), &names(&["WAIT_KEY"]), &RuleConfig::default());
    println!("{}", r.to_text());
    let ids: Vec<RuleId> = r.violations.iter().map(|v| v.rule).collect();
    assert_eq!(ids, vec![RuleId::HdNotOne, RuleId::HdNotOne, RuleId::HdNotOne, RuleId::MissingDefault]);
    let hd: Vec<(String, String, u32)> = r
        .of(RuleId::HdNotOne)
        .map(|v| {
            let (a, b) = v.locus.transition.clone().unwrap();
            let Evidence::HammingDistance { value } = v.evidence else { panic!() };
            (a, b, value)
        })
        .collect();
    assert_eq!(
        hd,
        vec![
            ("WAIT_DATA".into(), "INITIAL_ROUND".into(), 2),
            ("DO_ROUND".into(), "FINAL_ROUND".into(), 3),
            ("FINAL_ROUND".into(), "WAIT_DATA".into(), 2),
        ]
    );
    let md = r.of(RuleId::MissingDefault).next().unwrap();
    let Evidence::MissingDefault { unused, unused_count } = &md.evidence else { panic!() };
    let unused: Vec<String> = unused.iter().map(|e| e.to_string()).collect();
    assert_eq!(unused, vec!["101", "110", "111"]);
    assert_eq!(*unused_count, 3);
}

#[test]
fn vending_clean_and_deadlock() {
    let r = run_all_checks(&fixture("vending.v"), &BTreeSet::new(), &RuleConfig::default());
    assert!(r.violations.is_empty(), "{}", r.to_text());
    assert_eq!(r.skipped.len(), 1);
    let r = run_all_checks(&fixture("vending_deadlock.v"), &BTreeSet::new(), &RuleConfig::default());
    assert_eq!(r.violations.len(), 1, "{}", r.to_text());
    assert_eq!(r.violations[0].rule, RuleId::StaticDeadlock);
    assert_eq!(r.violations[0].locus.states, vec!["DEADLOCK_STATE"]);
}

#[test]
fn pulse_unreachable() {
    let r = run_all_checks(&fixture("pulse_unreachable.v"), &BTreeSet::new(), &RuleConfig::default());
    println!("{}", r.to_text());
    assert_eq!(r.count(RuleId::UnreachableState), 1);
    let v = r.of(RuleId::UnreachableState).next().unwrap();
    assert_eq!(v.locus.states, vec!["s3"]);
    assert!(matches!(v.evidence, Evidence::Unreachable { has_outgoing: true, .. }));
    let stg = extract_stg(&parse_fixture("pulse_unreachable.v"), &BTreeSet::new()).unwrap();
    assert_eq!(reachable_states(&stg), names(&["s0", "s1", "s2", "s4"]));
}

#[test]
fn clean_bases_are_clean() {
    for b in CLEAN_BASES {
        let r = run_all_checks(&fixture(b), &BTreeSet::new(), &RuleConfig::all());
        assert!(r.violations.is_empty(), "{b}: {}", r.to_text());
        assert!(!r.has_errors());
    }
}

#[test]
fn rsa_transitions() {
    let ast = parse_fixture("rsa_ctrl.v");
    let stg = extract_stg(&ast, &BTreeSet::new()).unwrap();
    let ut = unprotected_transitions(&stg);
    let pairs: Vec<String> = ut.iter().map(|t| format!("{}->{}", t.from, t.to)).collect();
    assert_eq!(pairs.len(), 7, "{pairs:?}");
    assert_eq!(pairs[0], "IDLE->INIT");
    let r = run_all_checks(&fixture("rsa_ctrl.v"), &BTreeSet::new(), &RuleConfig::all());
    assert_eq!(r.count(RuleId::FifNonzero), 0, "{}", r.to_text());
}

#[test]
fn aes_stg_shape() {
    let ast = parse_fixture("aes_ctrl.v");
    let stg = extract_stg(&ast, &names(&["WAIT_KEY"])).unwrap();
    assert_eq!(stg.states.len(), 5);
    assert_eq!(stg.transitions.len(), 10);
    assert!(stg.default_arm_target.is_none());
    let gray = extract_stg(&parse_fixture("aes_ctrl_gray.v"), &names(&["WAIT_KEY"])).unwrap();
    assert!(stg_isomorphic_modulo_encoding(&stg, &gray));
    let v3 = extract_stg(&parse_fixture("vending.v"), &BTreeSet::new()).unwrap();
    let v4 = extract_stg(&parse_fixture("vending_deadlock.v"), &BTreeSet::new()).unwrap();
    assert!(!stg_isomorphic_modulo_encoding(&v3, &v4));
    let coin = v3
        .transitions
        .iter()
        .find(|t| t.from == "ACCEPTING_COINS" && t.to == "PRODUCT_SELECTED")
        .unwrap();
    assert!(coin.guard.inputs.contains(&"coin".to_string()));
    print!("{}", v3.dump());
}
