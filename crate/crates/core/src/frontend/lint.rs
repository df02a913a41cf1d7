//! Non-blocking style and synthesis warnings.

use std::collections::BTreeSet;

use crate::diag::Diagnostic;

use super::ast::*;

pub const LATCH_INFERENCE: &str = "LATCH_INFERENCE";
pub const SENSITIVITY_INCOMPLETE: &str = "SENSITIVITY_INCOMPLETE";
pub const OBSOLETE_CONSTRUCT: &str = "OBSOLETE_CONSTRUCT";
pub const SEMICOLON_AFTER_END: &str = "SEMICOLON_AFTER_END";

/// True when every path through `stmt` assigns `signal`.
fn assigns_on_all_paths(stmt: &Stmt, signal: &str) -> bool {
    match stmt {
        Stmt::Assign { target, .. } => target_base(target) == signal,
        Stmt::Block { stmts, .. } => stmts.iter().any(|s| assigns_on_all_paths(s, signal)),
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => {
            assigns_on_all_paths(then_branch, signal)
                && else_branch
                    .as_ref()
                    .is_some_and(|e| assigns_on_all_paths(e, signal))
        }
        Stmt::Comment(_) => false,
    }
}

fn assigned_signals(stmt: &Stmt, out: &mut Vec<String>) {
    stmt.walk(&mut |s| {
        if let Stmt::Assign { target, .. } = s {
            let base = target_base(target).to_string();
            if !out.contains(&base) {
                out.push(base);
            }
        }
    });
}

fn read_signals(stmt: &Stmt, out: &mut Vec<String>) {
    stmt.walk(&mut |s| match s {
        Stmt::If { cond, .. } => cond.identifiers(out),
        Stmt::Assign { value, .. } => value.identifiers(out),
        _ => {}
    });
}

fn latch_warnings(comb: &CombBlock, out: &mut Vec<Diagnostic>) {
    let mut signals = Vec::new();
    for arm in &comb.case.arms {
        assigned_signals(&arm.body, &mut signals);
    }
    let defaulted: Vec<&str> = signals
        .iter()
        .filter(|sig| comb.prelude.iter().any(|s| assigns_on_all_paths(s, sig)))
        .map(String::as_str)
        .collect();
    for sig in &signals {
        if defaulted.contains(&sig.as_str()) {
            continue;
        }
        for arm in &comb.case.arms {
            if assigns_on_all_paths(&arm.body, sig) {
                continue;
            }
            let label = match &arm.label {
                ArmLabel::State(s) => s.as_str(),
                ArmLabel::Default => "default",
            };
            out.push(Diagnostic::warning(
                LATCH_INFERENCE,
                format!(
                    "{sig} is not assigned on every path of arm {label}; this might cause latch inference"
                ),
                arm.span,
            ));
        }
    }
}

fn sensitivity_warnings(ast: &FsmAst, comb: &CombBlock, out: &mut Vec<Diagnostic>) {
    let Sensitivity::List { entries, separator } = &comb.sensitivity else {
        return;
    };
    if *separator == SensSeparator::Or && entries.len() > 1 {
        out.push(Diagnostic::warning(
            OBSOLETE_CONSTRUCT,
            "combinational event list uses `or`; prefer @(*)",
            comb.span,
        ));
    }
    let params: BTreeSet<String> = ast.state_names().into_iter().collect();
    let mut assigned = Vec::new();
    let mut reads = vec![comb.case.selector.clone()];
    let all = comb
        .prelude
        .iter()
        .chain(&comb.postlude)
        .chain(comb.case.arms.iter().map(|a| &a.body));
    for s in all {
        assigned_signals(s, &mut assigned);
        read_signals(s, &mut reads);
    }
    let listed: BTreeSet<&str> = entries.iter().map(|e| e.signal.as_str()).collect();
    let missing: Vec<&str> = reads
        .iter()
        .map(String::as_str)
        .filter(|r| !params.contains(*r) && !assigned.iter().any(|a| a == r))
        .filter(|r| !listed.contains(r))
        .collect();
    if !missing.is_empty() {
        out.push(Diagnostic::warning(
            SENSITIVITY_INCOMPLETE,
            format!(
                "combinational sensitivity list is missing {}; use @(*)",
                missing.join(", ")
            ),
            comb.span,
        ));
    }
}

fn semicolon_warnings(ast: &FsmAst, comb: &CombBlock, out: &mut Vec<Diagnostic>) {
    let mut visit = |s: &Stmt| {
        if let Stmt::Block {
            stray_semicolon: true,
            span,
            ..
        } = s
        {
            out.push(Diagnostic::warning(
                SEMICOLON_AFTER_END,
                "semicolon after end",
                *span,
            ));
        }
    };
    ast.seq().body.walk(&mut visit);
    for s in comb
        .prelude
        .iter()
        .chain(comb.case.arms.iter().map(|a| &a.body))
        .chain(&comb.postlude)
    {
        s.walk(&mut visit);
    }
    if comb.stray_semicolon {
        out.push(Diagnostic::warning(
            SEMICOLON_AFTER_END,
            "semicolon after end",
            comb.span,
        ));
    }
}

/// Style and synthesis warnings for a parsed design, in source order.
pub fn lint(ast: &FsmAst) -> Vec<Diagnostic> {
    let comb = ast.comb();
    let mut out = Vec::new();
    latch_warnings(comb, &mut out);
    sensitivity_warnings(ast, comb, &mut out);
    semicolon_warnings(ast, comb, &mut out);
    out.sort_by_key(|d| (d.span.line_start, d.code.clone()));
    out
}
