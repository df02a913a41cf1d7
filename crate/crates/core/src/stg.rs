//! State-transition graph and the graph/bit primitives shared by the rules.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::LineRange;
use crate::encoding::Encoding;
use crate::frontend::ast::{ArmLabel, Expr, FsmAst, Stmt};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StgError {
    #[error("protected state {0} is not declared")]
    UndeclaredProtected(String),
    #[error("case arm on undeclared label {0}")]
    UndeclaredArm(String),
    #[error("next-state value `{0}` does not name a declared state")]
    UnknownTarget(String),
    #[error("encoding widths differ ({0} vs {1})")]
    WidthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub name: String,
    pub encoding: Encoding,
    pub protected: bool,
    pub declared_span: LineRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardKind {
    /// Taken on every evaluation of the arm.
    Always,
    Conditional,
    /// No assignment to the next-state register on this path: the register holds.
    ImplicitHold,
    /// Folds to a literal false; kept for the record but never traversed.
    Never,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Guard {
    pub kind: GuardKind,
    pub text: String,
    /// Signals read by the guard, in first-use order.
    pub inputs: Vec<String>,
}

impl Guard {
    pub fn always() -> Self {
        Guard {
            kind: GuardKind::Always,
            text: "1".to_string(),
            inputs: Vec::new(),
        }
    }

    pub fn is_live(&self) -> bool {
        self.kind != GuardKind::Never
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub guard: Guard,
    pub span: LineRange,
}

impl Transition {
    pub fn is_self(&self) -> bool {
        self.from == self.to
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stg {
    pub states: Vec<State>,
    pub transitions: Vec<Transition>,
    pub reset_state: String,
    pub default_arm_target: Option<String>,
    pub width: usize,
}

impl Stg {
    pub fn state(&self, name: &str) -> Option<&State> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn is_protected(&self, name: &str) -> bool {
        self.state(name).is_some_and(|s| s.protected)
    }

    pub fn protected_states(&self) -> Vec<&State> {
        self.states.iter().filter(|s| s.protected).collect()
    }

    pub fn live_transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.guard.is_live())
    }

    /// Successor lists by state index over live edges, deduplicated.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.states.len()];
        for t in self.live_transitions() {
            if let (Some(a), Some(b)) = (self.index_of(&t.from), self.index_of(&t.to)) {
                if !succ[a].contains(&b) {
                    succ[a].push(b);
                }
            }
        }
        succ
    }

    /// Plain-text dump, one `FROM -> TO [guard]` line per edge.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# reset {}", self.reset_state);
        for s in &self.states {
            let mark = if s.protected { " protected" } else { "" };
            let _ = writeln!(out, "# state {} {}{}", s.name, s.encoding, mark);
        }
        if let Some(d) = &self.default_arm_target {
            let _ = writeln!(out, "# default {d}");
        }
        for t in &self.transitions {
            let tag = match t.guard.kind {
                GuardKind::Always | GuardKind::Conditional => "",
                GuardKind::ImplicitHold => " hold",
                GuardKind::Never => " never",
            };
            let _ = writeln!(out, "{} -> {} [{}]{}", t.from, t.to, t.guard.text, tag);
        }
        out
    }
}

#[derive(Clone)]
struct Path {
    conds: Vec<(Expr, bool)>,
    target: Option<(String, LineRange)>,
    dead: bool,
}

struct Extractor<'a> {
    next_reg: &'a str,
    state_reg: &'a str,
    names: &'a BTreeSet<String>,
    by_code: &'a BTreeMap<u64, String>,
}

impl Extractor<'_> {
    fn run(&self, stmt: &Stmt, from: &str, paths: Vec<Path>) -> Result<Vec<Path>, StgError> {
        match stmt {
            Stmt::Comment(_) => Ok(paths),
            Stmt::Block { stmts, .. } => {
                let mut cur = paths;
                for s in stmts {
                    cur = self.run(s, from, cur)?;
                }
                Ok(cur)
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let truth = cond.constant_truth();
                let mut out = Vec::new();
                for p in paths {
                    let mut t = p.clone();
                    t.conds.push((cond.clone(), true));
                    t.dead |= truth == Some(false);
                    out.extend(self.run(then_branch, from, vec![t])?);
                    let mut e = p;
                    e.conds.push((cond.clone(), false));
                    e.dead |= truth == Some(true);
                    match else_branch {
                        Some(b) => out.extend(self.run(b, from, vec![e])?),
                        None => out.push(e),
                    }
                }
                Ok(out)
            }
            Stmt::Assign {
                target,
                value,
                span,
                ..
            } => {
                if target != self.next_reg {
                    return Ok(paths);
                }
                let mut out = Vec::new();
                for p in paths {
                    for (extra, name) in self.targets(value, from)? {
                        let mut q = p.clone();
                        for (c, pol) in &extra {
                            q.dead |= c.constant_truth() == Some(!pol);
                            q.conds.push((c.clone(), *pol));
                        }
                        q.target = Some((name, span.lines()));
                        out.push(q);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Resolves a next-state expression to states, splitting ternaries.
    #[allow(clippy::type_complexity)]
    fn targets(&self, value: &Expr, from: &str) -> Result<Vec<(Vec<(Expr, bool)>, String)>, StgError> {
        match value {
            Expr::Ident(n) if self.names.contains(n) => Ok(vec![(Vec::new(), n.clone())]),
            Expr::Ident(n) if n == self.state_reg => Ok(vec![(Vec::new(), from.to_string())]),
            Expr::Paren(e) => self.targets(e, from),
            Expr::Literal(l) => crate::frontend::ast::literal_value(l)
                .and_then(|v| self.by_code.get(&v))
                .map(|n| vec![(Vec::new(), n.clone())])
                .ok_or_else(|| StgError::UnknownTarget(l.clone())),
            Expr::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                let mut out = Vec::new();
                for (mut c, n) in self.targets(then_expr, from)? {
                    c.insert(0, ((**cond).clone(), true));
                    out.push((c, n));
                }
                for (mut c, n) in self.targets(else_expr, from)? {
                    c.insert(0, ((**cond).clone(), false));
                    out.push((c, n));
                }
                Ok(out)
            }
            other => Err(StgError::UnknownTarget(other.to_string())),
        }
    }
}

fn literal_text(cond: &Expr, positive: bool) -> String {
    if positive {
        return cond.to_string();
    }
    match cond {
        Expr::Unary { op, operand } if op == "!" => operand.to_string(),
        Expr::Ident(_) | Expr::Select { .. } | Expr::Paren(_) | Expr::Literal(_) => {
            format!("!{cond}")
        }
        _ => format!("!({cond})"),
    }
}

fn conjunction(conds: &[(Expr, bool)]) -> String {
    if conds.is_empty() {
        return "1".to_string();
    }
    conds
        .iter()
        .map(|(c, p)| literal_text(c, *p))
        .collect::<Vec<_>>()
        .join(" && ")
}

fn paths_to_edges(from: &str, paths: Vec<Path>, arm_span: LineRange, out: &mut Vec<Transition>) {
    let mut groups: Vec<(String, Vec<Path>)> = Vec::new();
    for p in paths {
        let to = p
            .target
            .as_ref()
            .map_or_else(|| from.to_string(), |(n, _)| n.clone());
        match groups.iter_mut().find(|(t, _)| *t == to) {
            Some((_, g)) => g.push(p),
            None => groups.push((to, vec![p])),
        }
    }
    let single = groups.len() == 1;
    for (to, group) in groups {
        let live: Vec<&Path> = group.iter().filter(|p| !p.dead).collect();
        let span = group
            .iter()
            .filter_map(|p| p.target.as_ref().map(|(_, s)| *s))
            .reduce(LineRange::union)
            .unwrap_or(arm_span);
        let hold = group.iter().all(|p| p.target.is_none());
        let mut inputs = Vec::new();
        for p in &group {
            for (c, _) in &p.conds {
                c.identifiers(&mut inputs);
            }
        }
        let guard = if live.is_empty() {
            let text = group
                .iter()
                .map(|p| conjunction(&p.conds))
                .collect::<Vec<_>>()
                .join(" || ");
            Guard {
                kind: GuardKind::Never,
                text,
                inputs,
            }
        } else if single || live.iter().any(|p| p.conds.is_empty()) {
            Guard {
                kind: if hold {
                    GuardKind::ImplicitHold
                } else {
                    GuardKind::Always
                },
                text: "1".to_string(),
                inputs: Vec::new(),
            }
        } else {
            let text = if live.len() == 1 {
                conjunction(&live[0].conds)
            } else {
                live.iter()
                    .map(|p| {
                        let c = conjunction(&p.conds);
                        if p.conds.len() > 1 {
                            format!("({c})")
                        } else {
                            c
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" || ")
            };
            let mut inputs = Vec::new();
            for p in &live {
                for (c, _) in &p.conds {
                    c.identifiers(&mut inputs);
                }
            }
            Guard {
                kind: if hold {
                    GuardKind::ImplicitHold
                } else {
                    GuardKind::Conditional
                },
                text,
                inputs,
            }
        };
        out.push(Transition {
            from: from.to_string(),
            to,
            guard,
            span,
        });
    }
}

/// Builds the transition graph of `ast`. Protected names from the argument
/// and from `@protected` annotations are merged.
pub fn extract_stg(ast: &FsmAst, protected: &BTreeSet<String>) -> Result<Stg, StgError> {
    let names: BTreeSet<String> = ast.state_names().into_iter().collect();
    let mut all_protected = protected.clone();
    all_protected.extend(ast.protected_annotations.iter().cloned());
    if let Some(bad) = all_protected.iter().find(|p| !names.contains(*p)) {
        return Err(StgError::UndeclaredProtected(bad.clone()));
    }
    let width = ast.width();
    let states: Vec<State> = ast
        .parameters()
        .map(|p| State {
            name: p.name.clone(),
            encoding: p.value.clone(),
            protected: all_protected.contains(&p.name),
            declared_span: p.span.lines(),
        })
        .collect();
    if let Some(s) = states.iter().find(|s| s.encoding.width() != width) {
        return Err(StgError::WidthMismatch(s.encoding.width(), width));
    }
    let mut by_code = BTreeMap::new();
    for s in &states {
        by_code.entry(s.encoding.value()).or_insert_with(|| s.name.clone());
    }
    let regs = ast.state_regs();
    let ex = Extractor {
        next_reg: &regs.next,
        state_reg: &regs.current,
        names: &names,
        by_code: &by_code,
    };
    let comb = ast.comb();
    for arm in &comb.case.arms {
        if let ArmLabel::State(s) = &arm.label {
            if !names.contains(s) {
                return Err(StgError::UndeclaredArm(s.clone()));
            }
        }
    }
    let default_arm = comb.case.default_arm();
    let mut transitions = Vec::new();
    // Each state's own arm, or the default arm for states without one.
    let mut order: Vec<(&str, &Stmt, LineRange)> = Vec::new();
    for arm in &comb.case.arms {
        if let ArmLabel::State(s) = &arm.label {
            order.push((s, &arm.body, arm.span.lines()));
        }
    }
    let empty = Stmt::block(Vec::new());
    for s in &states {
        if comb.case.arm(&s.name).is_none() {
            match default_arm {
                Some(d) => order.push((&s.name, &d.body, d.span.lines())),
                None => order.push((&s.name, &empty, s.declared_span)),
            }
        }
    }
    for (from, body, span) in order {
        let mut paths = vec![Path {
            conds: Vec::new(),
            target: None,
            dead: false,
        }];
        for p in &comb.prelude {
            paths = ex.run(p, from, paths)?;
        }
        // prelude assignments count as the arm's fallback, not as holds
        for p in &mut paths {
            if let Some((_, _)) = &p.target {
                p.conds.clear();
            }
        }
        paths = ex.run(body, from, paths)?;
        for p in &comb.postlude {
            paths = ex.run(p, from, paths)?;
        }
        paths_to_edges(from, paths, span, &mut transitions);
    }

    let default_arm_target = default_arm.and_then(|d| {
        let mut target = None;
        d.body.walk(&mut |s| {
            if let Stmt::Assign {
                target: t,
                value: Expr::Ident(v),
                ..
            } = s
            {
                if *t == regs.next && names.contains(v) && target.is_none() {
                    target = Some(v.clone());
                }
            }
        });
        target
    });

    Ok(Stg {
        states,
        transitions,
        reset_state: ast.reset_state().to_string(),
        default_arm_target,
        width,
    })
}

pub fn hamming_distance(a: &Encoding, b: &Encoding) -> Result<u32, StgError> {
    if a.width() != b.width() {
        return Err(StgError::WidthMismatch(a.width(), b.width()));
    }
    Ok(a.bits()
        .iter()
        .zip(b.bits())
        .filter(|(x, y)| x != y)
        .count() as u32)
}

/// States reachable from reset over live edges, in declaration order.
pub fn reachable_states(stg: &Stg) -> BTreeSet<String> {
    let succ = stg.successors();
    let mut seen = vec![false; stg.states.len()];
    let mut queue = VecDeque::new();
    if let Some(r) = stg.index_of(&stg.reset_state) {
        seen[r] = true;
        queue.push_back(r);
    }
    while let Some(i) = queue.pop_front() {
        for &j in &succ[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    stg.states
        .iter()
        .zip(seen)
        .filter(|(_, s)| *s)
        .map(|(st, _)| st.name.clone())
        .collect()
}

/// Live transitions with neither endpoint protected, in source order.
pub fn unprotected_transitions(stg: &Stg) -> Vec<&Transition> {
    stg.live_transitions()
        .filter(|t| !stg.is_protected(&t.from) && !stg.is_protected(&t.to))
        .collect()
}

type EdgeKey = (String, String, String, GuardKind);

fn edge_multiset(stg: &Stg) -> BTreeMap<EdgeKey, usize> {
    let mut m = BTreeMap::new();
    for t in &stg.transitions {
        *m.entry((t.from.clone(), t.to.clone(), t.guard.text.clone(), t.guard.kind))
            .or_insert(0) += 1;
    }
    m
}

/// Same state names, reset state and guarded edges; encodings and the
/// default arm are ignored.
pub fn stg_isomorphic_modulo_encoding(a: &Stg, b: &Stg) -> bool {
    let names = |s: &Stg| s.states.iter().map(|x| x.name.clone()).collect::<BTreeSet<_>>();
    names(a) == names(b) && a.reset_state == b.reset_state && edge_multiset(a) == edge_multiset(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_str;

    #[test]
    fn implicit_hold_for_arm_without_assignment() {
        let ast = parse_str(
            "module m(input clk, input rst, output reg o);
parameter A = 1'b0, B = 1'b1;
reg s, n;
always @(posedge clk) if (rst) s <= A; else s <= n;
always @(*) begin
case (s)
A: n = B;
B: o = 1;
endcase
end
endmodule",
        );
        let stg = extract_stg(&ast, &BTreeSet::new()).unwrap();
        let hold = stg.transitions.iter().find(|t| t.from == "B").unwrap();
        assert_eq!(hold.to, "B");
        assert_eq!(hold.guard.kind, GuardKind::ImplicitHold);
    }

    #[test]
    fn constant_false_branch_is_not_traversed() {
        let ast = parse_str(
            "module m(input clk, input rst);
parameter A = 2'b00, B = 2'b01, C = 2'b10;
reg [1:0] s, n;
always @(posedge clk) if (rst) s <= A; else s <= n;
always @(*) begin
n = s;
case (s)
A: if (1'b0) n = C; else n = B;
B: n = A;
C: n = A;
endcase
end
endmodule",
        );
        let stg = extract_stg(&ast, &BTreeSet::new()).unwrap();
        let never = stg.transitions.iter().find(|t| t.to == "C").unwrap();
        assert_eq!(never.guard.kind, GuardKind::Never);
        let r = reachable_states(&stg);
        assert!(!r.contains("C"));
    }

    #[test]
    fn ternary_next_state_splits() {
        let ast = parse_str(
            "module m(input clk, input rst, input go);
parameter A = 1'b0, B = 1'b1;
reg s, n;
always @(posedge clk) if (rst) s <= A; else s <= n;
always @(*) case (s)
A: n = go ? B : A;
B: n = A;
endcase
endmodule",
        );
        let stg = extract_stg(&ast, &BTreeSet::new()).unwrap();
        let ab = stg.transitions.iter().find(|t| t.from == "A" && t.to == "B").unwrap();
        assert_eq!(ab.guard.text, "go");
        let aa = stg.transitions.iter().find(|t| t.from == "A" && t.to == "A").unwrap();
        assert_eq!(aa.guard.text, "!go");
    }

    #[test]
    fn undeclared_protected_is_an_error() {
        let ast = parse_str(
            "module m(input clk, input rst);
parameter A = 1'b0, B = 1'b1;
reg s, n;
always @(posedge clk) if (rst) s <= A; else s <= n;
always @(*) case (s)
A: n = B;
B: n = A;
endcase
endmodule",
        );
        let p: BTreeSet<String> = ["NOPE".to_string()].into();
        assert_eq!(
            extract_stg(&ast, &p).unwrap_err(),
            StgError::UndeclaredProtected("NOPE".into())
        );
    }
}
