mod common;

use std::collections::BTreeSet;

use common::*;
use fsmguard::frontend::{self, emit_verilog};
use fsmguard::inject::{self, Injector, VulnClass};
use fsmguard::rules::{check_ast, RuleConfig, RuleId};

#[test]
fn round_trip_every_class() {
    let inj = Injector::default();
    for base in CLEAN_BASES {
        let ast = parse_fixture(base);
        for class in VulnClass::ALL {
            for seed in 0..50u64 {
                let (out, plan) = inj
                    .plan_injection(class, &ast, seed)
                    .unwrap_or_else(|e| panic!("{base} {class} {seed}: {e}"));
                let r = check_ast(&out, &BTreeSet::new(), &RuleConfig::default(), base);
                assert!(r.count(class.rule()) >= 1, "{base} {class} {seed}");
                assert!(r.violations.iter().all(|v| v.rule == class.rule()), "{base} {class} {seed}: {}", r.to_text());
                assert_eq!(plan.vuln, class);
                for s in &plan.added_states {
                    assert!(out.parameter(s).is_some());
                }
                if class == VulnClass::MissingDefault {
                    break;
                }
            }
        }
    }
}

#[test]
fn deadlock_matches_reference_shape() {
    let ast = parse_fixture("vending.v");
    let (out, plan) = Injector::default().inject_static_deadlock_at(&ast, "IDLE", 0).unwrap();
    let text = emit_verilog(&out).content;
    println!("{text}\n{plan:#?}");
    assert!(text.contains("parameter DEADLOCK_STATE = 3'b100;"));
    let reference = parse_fixture("vending_deadlock.v");
    let a = fsmguard::stg::extract_stg(&out, &BTreeSet::new()).unwrap();
    let b = fsmguard::stg::extract_stg(&reference, &BTreeSet::new()).unwrap();
    let edges = |s: &fsmguard::Stg| s.transitions.iter().map(|t| (t.from.clone(), t.to.clone())).collect::<BTreeSet<_>>();
    assert_eq!(edges(&a), edges(&b));
}

#[test]
fn determinism() {
    let ast = parse_fixture("traffic.v");
    for class in VulnClass::ALL {
        let (a, pa) = inject::plan_injection(class, &ast, 7).unwrap();
        let (b, pb) = inject::plan_injection(class, &ast, 7).unwrap();
        assert_eq!(emit_verilog(&a).content, emit_verilog(&b).content);
        assert_eq!(pa, pb);
    }
}

#[test]
fn duplicate_pair_and_default_removal() {
    let ast = parse_fixture("aes_ctrl.v");
    let (out, plan) = Injector::default().inject_duplicate_encoding_pair(&ast, "WAIT_DATA", "DO_ROUND").unwrap();
    assert_eq!(out.parameter("DO_ROUND").unwrap().value.to_string(), "001");
    assert_eq!(plan.target_state.as_deref(), Some("DO_ROUND"));
    let r = check_ast(&out, &BTreeSet::new(), &RuleConfig::default(), "x");
    assert_eq!(r.count(RuleId::DuplicateEncoding), 1);

    let gray = parse_fixture("aes_ctrl_gray.v");
    let (out, _) = inject::remove_default_arm(&gray).unwrap();
    assert!(out.case().default_arm().is_none());
    assert!(matches!(inject::remove_default_arm(&out), Err(inject::InjectError::NoDefaultArm)));
}

#[test]
fn preconditions() {
    let one_bit = frontend::parse_str(
        "module m(input clk, input rst, input go);
parameter A = 1'b0, B = 1'b1;
reg s, n;
always @(posedge clk) if (rst) s <= A; else s <= n;
always @(*) case (s)
A: if (go) n = B; else n = A;
B: n = A;
default: n = A;
endcase
endmodule",
    );
    assert!(inject::remove_default_arm(&one_bit).is_err());
    assert!(inject::inject_static_deadlock(&one_bit, 1).is_err());
    assert!(inject::inject_trap_loop(&one_bit, 1).is_err());
    assert!(inject::inject_unreachable_state(&one_bit, 1).is_err());
    assert!("bogus".parse::<VulnClass>().is_err());
    assert_eq!("static_deadlock".parse::<VulnClass>().unwrap(), VulnClass::StaticDeadlock);
}
