//! Canonical Verilog printer. Four-space indentation, one statement per line.

use std::fmt::{self, Write as _};

use super::ast::*;
use super::SourceText;

const INDENT: &str = "    ";

fn precedence(op: &str) -> u8 {
    match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" | "~^" | "^~" => 4,
        "&" => 5,
        "==" | "!=" | "===" | "!==" => 6,
        "<" | "<=" | ">" | ">=" => 7,
        "<<" | ">>" | "<<<" | ">>>" => 8,
        "+" | "-" => 9,
        _ => 10,
    }
}

impl Expr {
    fn binding(&self) -> u8 {
        match self {
            Expr::Ternary { .. } => 0,
            Expr::Binary { op, .. } => precedence(op),
            _ => 11,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if e.binding() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Ident(n) => f.write_str(n),
            Expr::Select { name, select } => write!(f, "{name}{select}"),
            Expr::Literal(l) => f.write_str(l),
            Expr::Unary { op, operand } => {
                f.write_str(op)?;
                write_operand(f, operand, 11)
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = precedence(op);
                write_operand(f, lhs, p)?;
                write!(f, " {op} ")?;
                write_operand(f, rhs, p + 1)
            }
            Expr::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                write_operand(f, cond, 1)?;
                write!(f, " ? {then_expr} : {else_expr}")
            }
            Expr::Paren(e) => write!(f, "({e})"),
        }
    }
}

impl fmt::Display for Sensitivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sensitivity::Star => f.write_str("@(*)"),
            Sensitivity::List { entries, separator } => {
                let sep = match separator {
                    SensSeparator::Or => " or ",
                    SensSeparator::Comma => ", ",
                };
                let parts: Vec<String> = entries
                    .iter()
                    .map(|e| match e.edge {
                        Some(EdgeKind::Posedge) => format!("posedge {}", e.signal),
                        Some(EdgeKind::Negedge) => format!("negedge {}", e.signal),
                        None => e.signal.clone(),
                    })
                    .collect();
                write!(f, "@({})", parts.join(sep))
            }
        }
    }
}

struct Printer {
    out: String,
}

impl Printer {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn comment(&mut self, depth: usize, c: &Comment) {
        self.line(depth, &c.text);
    }

    /// Prints `prefix` followed by `body`: `prefix begin ... end` for blocks,
    /// otherwise the statement on the next line one level deeper.
    fn body(&mut self, depth: usize, prefix: &str, body: &Stmt) {
        match body {
            Stmt::Block {
                stmts,
                stray_semicolon,
                ..
            } => {
                self.line(depth, &join_prefix(prefix, "begin"));
                for s in stmts {
                    self.stmt(depth + 1, s);
                }
                self.line(depth, if *stray_semicolon { "end;" } else { "end" });
            }
            Stmt::Assign { .. } if !prefix.is_empty() && prefix.ends_with(':') => {
                let mut text = String::new();
                assign_text(&mut text, body);
                self.line(depth, &join_prefix(prefix, &text));
            }
            _ => {
                if prefix.is_empty() {
                    self.stmt(depth, body);
                } else {
                    self.line(depth, prefix);
                    self.stmt(depth + 1, body);
                }
            }
        }
    }

    fn stmt(&mut self, depth: usize, s: &Stmt) {
        match s {
            Stmt::Comment(c) => self.comment(depth, c),
            Stmt::Block { .. } => self.body(depth, "", s),
            Stmt::Assign { .. } => {
                let mut text = String::new();
                assign_text(&mut text, s);
                self.line(depth, &text);
            }
            Stmt::If { .. } => self.if_chain(depth, "", s),
        }
    }

    fn if_chain(&mut self, depth: usize, lead: &str, s: &Stmt) {
        let Stmt::If {
            cond,
            then_branch,
            else_branch,
            ..
        } = s
        else {
            unreachable!()
        };
        let head = format!("{lead}if ({cond})");
        // an else after a bare inner `if` would bind to the inner one
        let then_needs_block = else_branch.is_some()
            && matches!(then_branch.as_ref(), Stmt::If { else_branch: None, .. });
        if then_needs_block {
            let wrapped = Stmt::block(vec![then_branch.as_ref().clone()]);
            self.body(depth, &head, &wrapped);
        } else {
            self.body(depth, &head, then_branch);
        }
        match else_branch.as_deref() {
            None => {}
            Some(inner @ Stmt::If { .. }) => self.if_chain(depth, "else ", inner),
            Some(other) => self.body(depth, "else", other),
        }
    }

    fn port_decl(&self, d: &PortDecl) -> String {
        let mut text = d.direction.keyword().to_string();
        match d.kind {
            Some(NetKind::Wire) => text.push_str(" wire"),
            Some(NetKind::Reg) => text.push_str(" reg"),
            None => {}
        }
        if let Some(r) = d.range {
            let _ = write!(text, " [{}:{}]", r.msb, r.lsb);
        }
        let _ = write!(text, " {}", d.names.join(", "));
        text
    }

    fn item(&mut self, item: &Item) {
        match item {
            Item::Comment(c) => self.comment(0, c),
            Item::Port(d) => {
                let text = format!("{};", self.port_decl(d));
                self.line(0, &text);
            }
            Item::Params(p) => {
                let range = p
                    .range
                    .map(|r| format!(" [{}:{}]", r.msb, r.lsb))
                    .unwrap_or_default();
                let entries: Vec<String> = p
                    .entries
                    .iter()
                    .map(|e| format!("{} = {}", e.name, e.value.to_verilog()))
                    .collect();
                if entries.len() == 1 {
                    self.line(0, &format!("parameter{range} {};", entries[0]));
                } else {
                    self.line(0, &format!("parameter{range}"));
                    let last = entries.len() - 1;
                    for (i, e) in entries.iter().enumerate() {
                        let end = if i == last { ";" } else { "," };
                        self.line(1, &format!("{e}{end}"));
                    }
                }
            }
            Item::Net(n) => {
                let kind = match n.kind {
                    NetKind::Wire => "wire",
                    NetKind::Reg => "reg",
                };
                let range = n
                    .range
                    .map(|r| format!(" [{}:{}]", r.msb, r.lsb))
                    .unwrap_or_default();
                self.line(0, &format!("{kind}{range} {};", n.names.join(", ")));
            }
            Item::ContinuousAssign { target, value, .. } => {
                self.line(0, &format!("assign {target} = {value};"));
            }
            Item::Sequential(s) => {
                self.out.push('\n');
                self.body(0, &format!("always {}", s.sensitivity), &s.body);
            }
            Item::Combinational(c) => {
                self.out.push('\n');
                let head = format!("always {}", c.sensitivity);
                if c.wrapped {
                    self.line(0, &format!("{head} begin"));
                    for s in &c.prelude {
                        self.stmt(1, s);
                    }
                    self.case(1, &c.case);
                    for s in &c.postlude {
                        self.stmt(1, s);
                    }
                    self.line(0, if c.stray_semicolon { "end;" } else { "end" });
                } else {
                    self.line(0, &head);
                    self.case(1, &c.case);
                }
            }
        }
    }

    fn case(&mut self, depth: usize, case: &CaseStmt) {
        self.line(depth, &format!("case ({})", case.selector));
        for arm in &case.arms {
            for c in &arm.leading_comments {
                self.comment(depth + 1, c);
            }
            let label = match &arm.label {
                ArmLabel::State(s) => format!("{s}:"),
                ArmLabel::Default => "default:".to_string(),
            };
            self.body(depth + 1, &label, &arm.body);
        }
        for c in &case.trailing_comments {
            self.comment(depth + 1, c);
        }
        self.line(depth, "endcase");
    }
}

fn join_prefix(prefix: &str, rest: &str) -> String {
    if prefix.is_empty() {
        rest.to_string()
    } else {
        format!("{prefix} {rest}")
    }
}

fn assign_text(out: &mut String, s: &Stmt) {
    if let Stmt::Assign {
        target,
        value,
        nonblocking,
        ..
    } = s
    {
        let op = if *nonblocking { "<=" } else { "=" };
        let _ = write!(out, "{target} {op} {value};");
    }
}

/// Prints the AST as canonical Verilog. The result parses back to a
/// structurally equal tree.
pub fn emit_verilog(ast: &FsmAst) -> SourceText {
    let mut p = Printer { out: String::new() };
    for c in &ast.leading_comments {
        p.comment(0, c);
    }
    match &ast.header {
        PortHeader::None => p.line(0, &format!("module {};", ast.module_name)),
        PortHeader::NonAnsi(names) => {
            p.line(0, &format!("module {}({});", ast.module_name, names.join(", ")))
        }
        PortHeader::Ansi(decls) => {
            p.line(0, &format!("module {} (", ast.module_name));
            let last = decls.len().saturating_sub(1);
            for (i, d) in decls.iter().enumerate() {
                let sep = if i == last { "" } else { "," };
                let text = format!("{}{sep}", p.port_decl(d));
                p.line(1, &text);
            }
            p.line(0, ");");
        }
    }
    let mut prev_params = false;
    for item in &ast.items {
        let is_params = matches!(item, Item::Params(_));
        if is_params && !prev_params {
            p.out.push('\n');
        }
        prev_params = is_params;
        p.item(item);
    }
    p.line(0, "endmodule");
    for c in &ast.trailing_comments {
        p.comment(0, c);
    }
    SourceText::new(p.out, format!("{}.v", ast.module_name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_children_get_parentheses_when_needed() {
        let e = Expr::Binary {
            op: "&&".into(),
            lhs: Box::new(Expr::Binary {
                op: "||".into(),
                lhs: Box::new(Expr::ident("a")),
                rhs: Box::new(Expr::ident("b")),
            }),
            rhs: Box::new(Expr::ident("c")),
        };
        assert_eq!(e.to_string(), "(a || b) && c");
    }

    #[test]
    fn unary_and_literals() {
        let e = Expr::Unary {
            op: "!".into(),
            operand: Box::new(Expr::ident("go")),
        };
        assert_eq!(e.to_string(), "!go");
        assert_eq!(Expr::Literal("1'b0".into()).to_string(), "1'b0");
    }
}
