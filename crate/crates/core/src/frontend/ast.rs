use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::diag::Span;
use crate::encoding::Encoding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Wire,
    Reg,
}

/// Packed range `[msb:lsb]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitRange {
    pub msb: u32,
    pub lsb: u32,
}

impl BitRange {
    pub fn width(&self) -> u32 {
        self.msb.abs_diff(self.lsb) + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub text: String,
    pub span: Span,
}

/// A direction declaration, either inside an ANSI header or as a module item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortDecl {
    pub direction: Direction,
    pub kind: Option<NetKind>,
    pub range: Option<BitRange>,
    pub names: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PortHeader {
    /// `module m;`
    None,
    /// `module m(input a, output reg b);`
    Ansi(Vec<PortDecl>),
    /// `module m(a, b);` with directions declared as items.
    NonAnsi(Vec<String>),
}

/// Flattened view of one port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub kind: NetKind,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameter {
    pub name: String,
    pub value: Encoding,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDecl {
    pub range: Option<BitRange>,
    pub entries: Vec<Parameter>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetDecl {
    pub kind: NetKind,
    pub range: Option<BitRange>,
    pub names: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Posedge,
    Negedge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensEntry {
    pub edge: Option<EdgeKind>,
    pub signal: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensSeparator {
    Or,
    Comma,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sensitivity {
    /// `@(*)` or `@*`
    Star,
    List {
        entries: Vec<SensEntry>,
        separator: SensSeparator,
    },
}

impl Sensitivity {
    pub fn has_edge(&self) -> bool {
        match self {
            Sensitivity::Star => false,
            Sensitivity::List { entries, .. } => entries.iter().any(|e| e.edge.is_some()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Ident(String),
    /// Bit or part select, e.g. `data[3]` or `data[3:0]`; kept as text after the name.
    Select { name: String, select: String },
    /// Literal exactly as written (`1`, `1'b0`, `2'b01`).
    Literal(String),
    Unary { op: String, operand: Box<Expr> },
    Binary { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Ternary { cond: Box<Expr>, then_expr: Box<Expr>, else_expr: Box<Expr> },
    Paren(Box<Expr>),
}

impl Expr {
    pub fn ident(name: &str) -> Expr {
        Expr::Ident(name.to_string())
    }

    /// Every identifier read by the expression, in first-use order.
    pub fn identifiers(&self, out: &mut Vec<String>) {
        match self {
            Expr::Ident(n) | Expr::Select { name: n, .. } => {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
            Expr::Literal(_) => {}
            Expr::Unary { operand, .. } => operand.identifiers(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.identifiers(out);
                rhs.identifiers(out);
            }
            Expr::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                cond.identifiers(out);
                then_expr.identifiers(out);
                else_expr.identifiers(out);
            }
            Expr::Paren(e) => e.identifiers(out),
        }
    }

    /// Folds literal-only expressions to a truth value.
    pub fn constant_truth(&self) -> Option<bool> {
        match self {
            Expr::Literal(text) => literal_value(text).map(|v| v != 0),
            Expr::Paren(e) => e.constant_truth(),
            Expr::Unary { op, operand } if op == "!" => operand.constant_truth().map(|b| !b),
            _ => None,
        }
    }
}

/// Numeric value of a decimal or based literal without x/z digits.
pub fn literal_value(text: &str) -> Option<u64> {
    let clean: String = text.chars().filter(|&c| c != '_').collect();
    match clean.find('\'') {
        None => clean.parse().ok(),
        Some(q) => {
            let rest = clean[q + 1..].trim_start_matches(['s', 'S']);
            let mut chars = rest.chars();
            let radix = match chars.next()?.to_ascii_lowercase() {
                'b' => 2,
                'o' => 8,
                'd' => 10,
                'h' => 16,
                _ => return None,
            };
            u64::from_str_radix(chars.as_str(), radix).ok()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Block {
        stmts: Vec<Stmt>,
        /// `end;` in the source.
        stray_semicolon: bool,
        span: Span,
    },
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
        span: Span,
    },
    Assign {
        /// Target as written, including any select (`out[1]`).
        target: String,
        value: Expr,
        nonblocking: bool,
        span: Span,
    },
    Comment(Comment),
}

impl Stmt {
    pub fn assign(target: &str, value: Expr) -> Stmt {
        Stmt::Assign {
            target: target.to_string(),
            value,
            nonblocking: false,
            span: Span::default(),
        }
    }

    pub fn block(stmts: Vec<Stmt>) -> Stmt {
        Stmt::Block {
            stmts,
            stray_semicolon: false,
            span: Span::default(),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Stmt::Block { span, .. } | Stmt::If { span, .. } | Stmt::Assign { span, .. } => *span,
            Stmt::Comment(c) => c.span,
        }
    }

    /// Visits every statement in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::Block { stmts, .. } => stmts.iter().for_each(|s| s.walk(f)),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.walk(f);
                if let Some(e) = else_branch {
                    e.walk(f);
                }
            }
            _ => {}
        }
    }

    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Stmt)) {
        f(self);
        match self {
            Stmt::Block { stmts, .. } => stmts.iter_mut().for_each(|s| s.walk_mut(f)),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.walk_mut(f);
                if let Some(e) = else_branch {
                    e.walk_mut(f);
                }
            }
            _ => {}
        }
    }
}

/// Base name of an assignment target (`out[1]` -> `out`).
pub fn target_base(target: &str) -> &str {
    target.split('[').next().unwrap_or(target).trim()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArmLabel {
    State(String),
    Default,
}

impl ArmLabel {
    pub fn state(&self) -> Option<&str> {
        match self {
            ArmLabel::State(s) => Some(s),
            ArmLabel::Default => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseArm {
    pub label: ArmLabel,
    pub body: Stmt,
    pub leading_comments: Vec<Comment>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseStmt {
    pub selector: String,
    pub arms: Vec<CaseArm>,
    pub trailing_comments: Vec<Comment>,
    pub span: Span,
}

impl CaseStmt {
    pub fn arm(&self, state: &str) -> Option<&CaseArm> {
        self.arms
            .iter()
            .find(|a| a.label.state() == Some(state))
    }

    pub fn arm_mut(&mut self, state: &str) -> Option<&mut CaseArm> {
        self.arms
            .iter_mut()
            .find(|a| a.label.state() == Some(state))
    }

    pub fn default_arm(&self) -> Option<&CaseArm> {
        self.arms.iter().find(|a| a.label == ArmLabel::Default)
    }
}

/// Clocked block holding the state register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqBlock {
    pub sensitivity: Sensitivity,
    pub body: Stmt,
    pub reset: ResetInfo,
    pub span: Span,
}

/// Facts recovered from the sequential block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResetInfo {
    pub clock: String,
    pub reset_signal: String,
    pub asynchronous: bool,
    pub reset_target: String,
    pub state_reg: String,
    pub next_reg: String,
}

/// Combinational next-state block: optional leading statements, the state
/// case, optional trailing statements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombBlock {
    pub sensitivity: Sensitivity,
    pub wrapped: bool,
    pub stray_semicolon: bool,
    pub prelude: Vec<Stmt>,
    pub case: CaseStmt,
    pub postlude: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Port(PortDecl),
    Params(ParamDecl),
    Net(NetDecl),
    ContinuousAssign {
        target: String,
        value: Expr,
        span: Span,
    },
    Sequential(SeqBlock),
    Combinational(CombBlock),
    Comment(Comment),
}

/// Parsed single-module FSM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsmAst {
    pub module_name: String,
    pub header: PortHeader,
    pub items: Vec<Item>,
    pub leading_comments: Vec<Comment>,
    pub trailing_comments: Vec<Comment>,
    /// Names collected from `// @protected NAME` comments.
    pub protected_annotations: Vec<String>,
    /// Normalizations applied while parsing (e.g. `localparam` -> `parameter`).
    pub notes: Vec<String>,
    pub span: Span,
}

/// Register names and width of the state machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRegs {
    pub current: String,
    pub next: String,
    pub width: u32,
}

impl FsmAst {
    pub fn seq(&self) -> &SeqBlock {
        self.items
            .iter()
            .find_map(|i| match i {
                Item::Sequential(s) => Some(s),
                _ => None,
            })
            .expect("FsmAst invariant: one sequential block")
    }

    pub fn comb(&self) -> &CombBlock {
        self.items
            .iter()
            .find_map(|i| match i {
                Item::Combinational(c) => Some(c),
                _ => None,
            })
            .expect("FsmAst invariant: one combinational block")
    }

    pub fn comb_mut(&mut self) -> &mut CombBlock {
        self.items
            .iter_mut()
            .find_map(|i| match i {
                Item::Combinational(c) => Some(c),
                _ => None,
            })
            .expect("FsmAst invariant: one combinational block")
    }

    pub fn case(&self) -> &CaseStmt {
        &self.comb().case
    }

    pub fn case_mut(&mut self) -> &mut CaseStmt {
        &mut self.comb_mut().case
    }

    pub fn reset_state(&self) -> &str {
        &self.seq().reset.reset_target
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Parameter> {
        self.items.iter().flat_map(|i| match i {
            Item::Params(p) => p.entries.iter(),
            _ => [].iter(),
        })
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters().find(|p| p.name == name)
    }

    pub fn parameter_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.items.iter_mut().find_map(|i| match i {
            Item::Params(p) => p.entries.iter_mut().find(|e| e.name == name),
            _ => None,
        })
    }

    pub fn state_names(&self) -> Vec<String> {
        self.parameters().map(|p| p.name.clone()).collect()
    }

    pub fn state_regs(&self) -> StateRegs {
        let reset = &self.seq().reset;
        let width = self
            .parameters()
            .next()
            .map_or(0, |p| p.value.width() as u32);
        StateRegs {
            current: reset.state_reg.clone(),
            next: reset.next_reg.clone(),
            width,
        }
    }

    /// Width of the state parameters.
    pub fn width(&self) -> usize {
        self.parameters().next().map_or(0, |p| p.value.width())
    }

    /// Flattened port list in header order.
    pub fn ports(&self) -> Vec<Port> {
        let mut reg_names = BTreeSet::new();
        for item in &self.items {
            if let Item::Net(n) = item {
                if n.kind == NetKind::Reg {
                    reg_names.extend(n.names.iter().cloned());
                }
            }
        }
        let flatten = |d: &PortDecl, name: &str| Port {
            name: name.to_string(),
            direction: d.direction,
            kind: match d.kind {
                Some(k) => k,
                None if reg_names.contains(name) => NetKind::Reg,
                None => NetKind::Wire,
            },
            width: d.range.map_or(1, |r| r.width()),
        };
        match &self.header {
            PortHeader::None => Vec::new(),
            PortHeader::Ansi(decls) => decls
                .iter()
                .flat_map(|d| d.names.iter().map(move |n| (d, n)))
                .map(|(d, n)| flatten(d, n))
                .collect(),
            PortHeader::NonAnsi(order) => order
                .iter()
                .filter_map(|name| {
                    self.items.iter().find_map(|i| match i {
                        Item::Port(d) if d.names.contains(name) => Some(flatten(d, name)),
                        _ => None,
                    })
                })
                .collect(),
        }
    }

    /// Input port names other than the clock and reset.
    pub fn data_inputs(&self) -> Vec<String> {
        let reset = &self.seq().reset;
        self.ports()
            .into_iter()
            .filter(|p| p.direction == Direction::Input)
            .map(|p| p.name)
            .filter(|n| *n != reset.clock && *n != reset.reset_signal)
            .collect()
    }

    /// Every identifier declared or referenced in the module.
    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        out.insert(self.module_name.clone());
        for p in self.ports() {
            out.insert(p.name);
        }
        for item in &self.items {
            match item {
                Item::Port(d) => out.extend(d.names.iter().cloned()),
                Item::Params(p) => out.extend(p.entries.iter().map(|e| e.name.clone())),
                Item::Net(n) => out.extend(n.names.iter().cloned()),
                Item::ContinuousAssign { target, value, .. } => {
                    out.insert(target_base(target).to_string());
                    let mut ids = Vec::new();
                    value.identifiers(&mut ids);
                    out.extend(ids);
                }
                Item::Sequential(s) => collect_stmt_idents(&s.body, &mut out),
                Item::Combinational(c) => {
                    out.insert(c.case.selector.clone());
                    for s in c.prelude.iter().chain(&c.postlude) {
                        collect_stmt_idents(s, &mut out);
                    }
                    for arm in &c.case.arms {
                        collect_stmt_idents(&arm.body, &mut out);
                    }
                }
                Item::Comment(_) => {}
            }
        }
        out
    }

    /// Copy with all spans zeroed and parse notes dropped, for structural
    /// comparison.
    pub fn without_spans(&self) -> FsmAst {
        let mut ast = self.clone();
        ast.clear_spans();
        ast
    }

    fn clear_spans(&mut self) {
        let z = Span::default();
        self.span = z;
        self.notes.clear();
        for c in self
            .leading_comments
            .iter_mut()
            .chain(self.trailing_comments.iter_mut())
        {
            c.span = z;
        }
        if let PortHeader::Ansi(decls) = &mut self.header {
            decls.iter_mut().for_each(|d| d.span = z);
        }
        for item in &mut self.items {
            match item {
                Item::Port(d) => d.span = z,
                Item::Params(p) => {
                    p.span = z;
                    p.entries.iter_mut().for_each(|e| e.span = z);
                }
                Item::Net(n) => n.span = z,
                Item::ContinuousAssign { span, .. } => *span = z,
                Item::Comment(c) => c.span = z,
                Item::Sequential(s) => {
                    s.span = z;
                    clear_stmt_spans(&mut s.body);
                }
                Item::Combinational(c) => {
                    c.span = z;
                    c.case.span = z;
                    c.prelude.iter_mut().for_each(clear_stmt_spans);
                    c.postlude.iter_mut().for_each(clear_stmt_spans);
                    c.case.trailing_comments.iter_mut().for_each(|c| c.span = z);
                    for arm in &mut c.case.arms {
                        arm.span = z;
                        arm.leading_comments.iter_mut().for_each(|c| c.span = z);
                        clear_stmt_spans(&mut arm.body);
                    }
                }
            }
        }
    }

    pub fn structurally_eq(&self, other: &FsmAst) -> bool {
        self.without_spans() == other.without_spans()
    }
}

fn clear_stmt_spans(stmt: &mut Stmt) {
    stmt.walk_mut(&mut |s| match s {
        Stmt::Block { span, .. } | Stmt::If { span, .. } | Stmt::Assign { span, .. } => {
            *span = Span::default()
        }
        Stmt::Comment(c) => c.span = Span::default(),
    });
}

fn collect_stmt_idents(stmt: &Stmt, out: &mut BTreeSet<String>) {
    stmt.walk(&mut |s| match s {
        Stmt::If { cond, .. } => {
            let mut ids = Vec::new();
            cond.identifiers(&mut ids);
            out.extend(ids);
        }
        Stmt::Assign { target, value, .. } => {
            out.insert(target_base(target).to_string());
            let mut ids = Vec::new();
            value.identifiers(&mut ids);
            out.extend(ids);
        }
        _ => {}
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_values() {
        assert_eq!(literal_value("1'b0"), Some(0));
        assert_eq!(literal_value("3'b101"), Some(5));
        assert_eq!(literal_value("4'hF"), Some(15));
        assert_eq!(literal_value("12"), Some(12));
        assert_eq!(literal_value("1'bx"), None);
    }

    #[test]
    fn constant_folding() {
        assert_eq!(Expr::Literal("1'b0".into()).constant_truth(), Some(false));
        let not_zero = Expr::Unary {
            op: "!".into(),
            operand: Box::new(Expr::Literal("0".into())),
        };
        assert_eq!(not_zero.constant_truth(), Some(true));
        assert_eq!(Expr::ident("go").constant_truth(), None);
    }
}
