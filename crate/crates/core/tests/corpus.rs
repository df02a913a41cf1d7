mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use fsmguard::corpus::*;
use fsmguard::frontend::{self, emit_verilog};
use fsmguard::inject::{remove_default_arm, VulnClass};
use fsmguard::mitigate::{mitigate, MitigationConfig};
use fsmguard::rules::{run_all_checks, RuleConfig, RuleId};
use fsmguard::stg::{extract_stg, Stg};

fn bases() -> Vec<CorpusBase> {
    CLEAN_BASES
        .iter()
        .map(|b| CorpusBase::new(b.trim_end_matches(".v"), fixture(b)))
        .collect()
}

fn full_mix(n: usize) -> BTreeMap<VulnClass, usize> {
    VulnClass::ALL.iter().map(|c| (*c, n)).collect()
}

#[test]
fn deadlock_mix_on_one_base() {
    let base = vec![CorpusBase::new("vending", fixture("vending.v"))];
    let recs = generate_corpus(&base, &BTreeMap::from([(VulnClass::StaticDeadlock, 10)]), 7).unwrap();
    assert_eq!(recs.len(), 10);
    for r in &recs {
        let rep = run_all_checks(&frontend::SourceText::new(r.source.clone(), "r.v"), &BTreeSet::new(), &RuleConfig::default());
        assert_eq!(rep.rule_ids().into_iter().collect::<Vec<_>>(), vec![RuleId::StaticDeadlock]);
        assert_eq!(r.labels, vec![RuleId::StaticDeadlock]);
    }
    assert!(generate_corpus(&base, &BTreeMap::new(), 7).unwrap().is_empty());
}

#[test]
fn labels_match_checker_and_interleave() {
    let recs = generate_corpus_with(&bases(), &full_mix(6), 11, &CorpusOptions::default()).unwrap();
    let clean = recs.iter().filter(|r| r.vuln.is_none()).count();
    assert_eq!(clean, 30);
    assert_eq!(recs.len(), 60);
    let ids: BTreeSet<&str> = recs.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids.len(), recs.len());
    for r in &recs {
        assert_eq!(r.vuln.is_none(), r.plan.is_none());
        assert_eq!(r.vuln.is_none(), r.labels.is_empty());
        let rep = run_all_checks(&frontend::SourceText::new(r.source.clone(), "r.v"), &BTreeSet::new(), &RuleConfig::default());
        assert_eq!(rep.rule_ids().into_iter().collect::<Vec<_>>(), r.labels, "{}", r.id);
    }
    // 1:1 interleave alternates
    assert!(recs.chunks(2).all(|c| c[0].vuln.is_some() && c[1].vuln.is_none()));
}

#[test]
fn corpus_is_deterministic_and_round_trips() {
    let a = to_jsonl(&generate_corpus_with(&bases(), &full_mix(8), 99, &CorpusOptions::default()).unwrap());
    let b = to_jsonl(&generate_corpus_with(&bases(), &full_mix(8), 99, &CorpusOptions::default()).unwrap());
    assert_eq!(a, b);
    let c = to_jsonl(&generate_corpus_with(&bases(), &full_mix(8), 100, &CorpusOptions::default()).unwrap());
    assert_ne!(a, c);
    assert_eq!(to_jsonl(&from_jsonl(&a).unwrap()), a);
    let bumped = a.replacen("\"schema_version\":1", "\"schema_version\":9", 1);
    assert_eq!(from_jsonl(&bumped), Err(CorpusError::Schema(9)));
}

#[test]
fn generation_errors() {
    let one_bit = frontend::SourceText::new(
        "module t(input clk, input reset, input a);\nparameter S0 = 1'b0, S1 = 1'b1;\nreg s, n;\n\
always @(posedge clk or posedge reset) begin if (reset) s <= S0; else s <= n; end\n\
always @(*) begin case (s) S0: n = a ? S1 : S0; S1: n = S0; endcase end\nendmodule\n",
        "t.v",
    );
    let base = vec![CorpusBase::new("t", one_bit)];
    let err = generate_corpus(&base, &BTreeMap::from([(VulnClass::DuplicateEncoding, 1)]), 1).unwrap_err();
    assert_eq!(err, CorpusError::Unsatisfiable(VulnClass::DuplicateEncoding));
    let dirty = vec![CorpusBase::new("aes", fixture("aes_ctrl.v"))];
    assert!(matches!(
        generate_corpus(&dirty, &full_mix(1), 1),
        Err(CorpusError::BaseNotClean { .. })
    ));
}

#[test]
fn insertion_fidelity() {
    let rc = RuleConfig::default();
    let none = BTreeSet::new();
    let base = fixture("vending.v");
    let dead = fixture("vending_deadlock.v");
    assert!(verify_insertion(&base, &dead, VulnClass::StaticDeadlock, &none, &rc).overall);

    let same = verify_insertion(&base, &base, VulnClass::StaticDeadlock, &none, &rc);
    assert!(!same.overall && !same.intended_present);

    let (both, _) = remove_default_arm(&frontend::parse(&dead).unwrap()).unwrap();
    let v = verify_insertion(&base, &emit_verilog(&both), VulnClass::StaticDeadlock, &none, &rc);
    assert!(v.intended_present && !v.overall);
    assert_eq!(v.unintended.iter().map(|x| x.rule).collect::<Vec<_>>(), vec![RuleId::MissingDefault]);

    let broken = frontend::SourceText::new("module m(; endmodule", "m.v");
    assert!(!verify_insertion(&base, &broken, VulnClass::StaticDeadlock, &none, &rc).syntax_ok);
}

#[test]
fn mitigation_fidelity() {
    let rc = RuleConfig::default();
    let wk = names(&["WAIT_KEY"]);
    let l7 = fixture("aes_ctrl.v");
    let l8 = fixture("aes_ctrl_gray.v");
    let v = verify_mitigation(&l7, &l8, &BTreeSet::from([RuleId::MissingDefault]), &wk, &rc);
    assert!(v.overall, "{v:?}");
    assert_eq!(v.stg_ok, Some(true));
    assert_eq!(v.residual.len(), 1);
    assert_eq!(v.residual[0].rule, RuleId::HdNotOne);
    let hd = verify_mitigation(&l7, &l8, &BTreeSet::from([RuleId::HdNotOne]), &wk, &rc);
    assert!(!hd.overall);

    let renamed = frontend::SourceText::new(l8.content.replace("fsm_module", "other_module"), "x.v");
    let r = verify_mitigation(&l7, &renamed, &BTreeSet::from([RuleId::MissingDefault]), &wk, &rc);
    assert!(!r.interface_ok && !r.overall);
    let bad = frontend::SourceText::new("garbage", "x.v");
    assert!(!verify_mitigation(&l7, &bad, &BTreeSet::new(), &wk, &rc).syntax_ok);
}

#[test]
fn mitigation_clears_table_classes() {
    let mix: BTreeMap<VulnClass, usize> = [VulnClass::DuplicateEncoding, VulnClass::UnreachableState, VulnClass::StaticDeadlock]
        .into_iter()
        .map(|c| (c, 40))
        .collect();
    let recs = generate_corpus(&bases(), &mix, 5).unwrap();
    let rc = RuleConfig::default();
    let none = BTreeSet::new();
    for r in &recs {
        let src = frontend::SourceText::new(r.source.clone(), "r.v");
        let report = run_all_checks(&src, &none, &rc);
        let out = mitigate(&src, &report, &MitigationConfig::default());
        let targets: BTreeSet<RuleId> = r.labels.iter().copied().collect();
        let v = verify_mitigation(&src, &out.design, &targets, &none, &rc);
        assert!(v.overall, "{}: {v:?}", r.id);
    }
}

fn renamed_stg(stg: &Stg, map: &RenameMap) -> Stg {
    let mut s = stg.clone();
    let rn = |n: &mut String| {
        if let Some(x) = map.get(n) {
            *n = x.clone();
        }
    };
    for st in &mut s.states {
        rn(&mut st.name);
    }
    for t in &mut s.transitions {
        rn(&mut t.from);
        rn(&mut t.to);
        for (old, new) in map {
            t.guard.text = t.guard.text.replace(old.as_str(), new);
        }
    }
    rn(&mut s.reset_state);
    s
}

#[test]
fn sanitize_trojan_unit() {
    let ast = parse_fixture("trojan_unit.v");
    let (clean, map) = sanitize_identifiers(&ast, DEFAULT_KEYWORDS, 3).unwrap();
    assert_eq!(map["trojan_trigger_unit"], "u0");
    assert_eq!(clean.module_name, "u0");
    assert!(map.contains_key("TRIGGERED"));
    let text = emit_verilog(&clean).content;
    assert!(text.contains("// logic"));
    let lower = text.to_ascii_lowercase();
    for k in DEFAULT_KEYWORDS {
        assert!(!lower.contains(k), "{k} survived");
    }
    let a = extract_stg(&ast, &BTreeSet::new()).unwrap();
    let b = extract_stg(&clean, &BTreeSet::new()).unwrap();
    assert!(fsmguard::stg::stg_isomorphic_modulo_encoding(&renamed_stg(&a, &map), &b));

    let plain = parse_fixture("vending.v");
    let (same, empty) = sanitize_identifiers(&plain, DEFAULT_KEYWORDS, 3).unwrap();
    assert!(empty.is_empty());
    assert_eq!(same, plain);
    assert_eq!(sanitize_identifiers(&plain, &[], 3).unwrap_err(), CorpusError::NoKeywords);
}

#[test]
fn sanitize_collisions_escape() {
    let src = fixture("trojan_unit.v").content.replace("payload_en", "sig1");
    let ast = frontend::parse(&frontend::SourceText::new(src, "t.v")).unwrap();
    let (_, map) = sanitize_identifiers(&ast, DEFAULT_KEYWORDS, 0).unwrap();
    assert!(map.values().all(|v| v != "sig1"));
    assert!(map.values().any(|v| v == "sig1_1"));
}
