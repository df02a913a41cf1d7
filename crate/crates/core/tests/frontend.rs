mod common;

use common::*;
use fsmguard::frontend::{self, emit_verilog, lint, tokenize, ArmLabel, SourceText};

#[test]
fn vending_parameters_and_reset() {
    let ast = parse_fixture("vending.v");
    assert_eq!(
        ast.state_names(),
        vec!["IDLE", "ACCEPTING_COINS", "PRODUCT_SELECTED", "DISPENSING_ITEM"]
    );
    assert_eq!(ast.reset_state(), "IDLE");
    assert_eq!(ast.width(), 3);
}

#[test]
fn dual_net_kind_is_rejected() {
    let errs = frontend::parse(&fixture("moore_conflict.v")).unwrap_err();
    assert!(errs[0].is_error());
    assert_eq!(errs[0].message, "conflicting net kinds for state_out");
    assert_eq!(errs[0].span.line_start, 4);
}

#[test]
fn empty_module_has_no_state_machine() {
    let errs = frontend::parse(&SourceText::new("module empty;\nendmodule\n", "t")).unwrap_err();
    assert_eq!(errs[0].message, "no state machine found");
}

#[test]
fn parse_errors() {
    let cases = [
        ("module m(input clk, input rst);\nparameter A = 0;\nendmodule", "unsized"),
        ("module m(input clk);\nlogic a;\nendmodule", "SystemVerilog"),
    ];
    for (text, needle) in cases {
        let errs = frontend::parse(&SourceText::new(text, "t")).unwrap_err();
        assert!(
            errs.iter().any(|e| e.message.contains(needle)),
            "{needle}: {errs:?}"
        );
        for e in &errs {
            assert!(e.span.end <= text.len());
        }
    }
}

#[test]
fn two_sequential_blocks_are_rejected() {
    let text = "module m(input clk, input rst);
parameter A = 1'b0, B = 1'b1;
reg s, n;
always @(posedge clk) if (rst) s <= A; else s <= n;
always @(posedge clk) if (rst) s <= A; else s <= n;
always @(*) case (s)
A: n = B;
B: n = A;
endcase
endmodule";
    let errs = frontend::parse(&SourceText::new(text, "t")).unwrap_err();
    assert!(errs.iter().any(|e| e.message.contains("two sequential blocks")));
}

#[test]
fn casez_is_rejected() {
    let text = "module m(input clk, input rst);
parameter A = 1'b0, B = 1'b1;
reg s, n;
always @(posedge clk) if (rst) s <= A; else s <= n;
always @(*) casez (s)
A: n = B;
B: n = A;
endcase
endmodule";
    assert!(frontend::parse(&SourceText::new(text, "t")).is_err());
}

#[test]
fn localparam_is_normalized() {
    let ast = parse_fixture("traffic.v");
    assert!(ast.notes.iter().any(|n| n.contains("localparam")));
    let text = emit_verilog(&ast).content;
    assert!(!text.contains("localparam"));
}

#[test]
fn lint_latch_on_unreachable_example() {
    let ast = parse_fixture("pulse_unreachable.v");
    let diags = lint(&ast);
    assert!(diags
        .iter()
        .any(|d| d.code == "LATCH_INFERENCE" && d.message.contains("sbit") && d.message.contains("arm s3")));
    assert!(diags.iter().any(|d| d.code == "SEMICOLON_AFTER_END" && d.message == "semicolon after end"));
}

#[test]
fn lint_full_sensitivity_list_is_quiet() {
    let ast = parse_fixture("aes_ctrl.v");
    assert!(!lint(&ast).iter().any(|d| d.code == "SENSITIVITY_INCOMPLETE"));
    let ast = parse_fixture("vending_deadlock.v");
    assert!(lint(&ast).iter().any(|d| d.code == "SENSITIVITY_INCOMPLETE"));
}

#[test]
fn round_trip_all_fixtures() {
    for name in ALL_FIXTURES {
        let ast = parse_fixture(name);
        let emitted = emit_verilog(&ast);
        let again = frontend::parse(&emitted).unwrap_or_else(|d| panic!("{name}: {d:?}\n{}", emitted.content));
        assert!(ast.structurally_eq(&again), "{name}\n{}", emitted.content);
        assert_eq!(emit_verilog(&again).content, emitted.content, "{name}");
    }
}

#[test]
fn default_arm_emitted_once() {
    let ast = parse_fixture("vending.v");
    assert!(ast.case().arms.iter().any(|a| a.label == ArmLabel::Default));
    let text = emit_verilog(&ast).content;
    assert_eq!(text.matches("default:").count(), 1);
}

#[test]
fn annotations_are_collected() {
    let ast = parse_fixture("rsa_ctrl.v");
    assert_eq!(ast.protected_annotations, vec!["RESULT"]);
    let toks = tokenize(&fixture("rsa_ctrl.v")).unwrap();
    assert!(toks.iter().any(|t| t.text.contains("@protected RESULT")));
}
