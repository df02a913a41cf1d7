//! Recursive-descent parser for single-module FSM descriptions.
//!
//! Comments are trivia to the grammar but are kept in the tree: whenever the
//! parser reaches a list position (module items, block statements, case
//! arms) it drains the comments seen since the previous element into that
//! list, so re-emitted code keeps them close to where they were written.

use std::collections::BTreeSet;

use crate::diag::{Diagnostic, Span};
use crate::encoding::{Encoding, MAX_WIDTH};

use super::ast::*;
use super::lexer::{Token, TokenKind, SYSTEMVERILOG_KEYWORDS};

type PResult<T> = Result<T, Diagnostic>;

struct Parser<'t> {
    toks: Vec<&'t Token>,
    pos: usize,
    pending: Vec<Comment>,
    notes: Vec<String>,
    eof: Span,
}

const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["|"],
    &["^", "~^", "^~"],
    &["&"],
    &["==", "!=", "===", "!=="],
    &["<", "<=", ">", ">="],
    &["<<", ">>", "<<<", ">>>"],
    &["+", "-"],
    &["*", "/", "%"],
];

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        let toks: Vec<&Token> = tokens
            .iter()
            .filter(|t| !matches!(t.kind, TokenKind::Whitespace | TokenKind::Directive))
            .collect();
        let eof = tokens.last().map_or(Span::default(), |t| {
            Span::new(t.span.end, t.span.end, t.span.line_end, t.span.line_end)
        });
        Parser {
            toks,
            pos: 0,
            pending: Vec::new(),
            notes: Vec::new(),
            eof,
        }
    }

    fn skip_comments(&mut self) {
        while let Some(t) = self.toks.get(self.pos) {
            if t.kind != TokenKind::Comment {
                break;
            }
            self.pending.push(Comment {
                text: t.text.trim_end().to_string(),
                span: t.span,
            });
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<&'t Token> {
        self.skip_comments();
        self.toks.get(self.pos).copied()
    }

    fn here(&mut self) -> Span {
        self.peek().map_or(self.eof, |t| t.span)
    }

    fn bump(&mut self) -> PResult<&'t Token> {
        match self.peek() {
            Some(t) => {
                self.pos += 1;
                Ok(t)
            }
            None => Err(Diagnostic::error(
                "E_PARSE",
                "unexpected end of input",
                self.eof,
            )),
        }
    }

    fn take_pending(&mut self) -> Vec<Comment> {
        std::mem::take(&mut self.pending)
    }

    fn at_op(&mut self, op: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(op))
    }

    fn at_kw(&mut self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_kw(kw))
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&mut self, expected: &str) -> Diagnostic {
        match self.peek() {
            Some(t) => Diagnostic::error(
                "E_PARSE",
                format!("expected {expected}, found `{}`", t.text),
                t.span,
            ),
            None => Diagnostic::error(
                "E_PARSE",
                format!("expected {expected}, found end of input"),
                self.eof,
            ),
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Span> {
        if self.at_op(op) {
            Ok(self.bump()?.span)
        } else {
            Err(self.unexpected(&format!("`{op}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.at_kw(kw) {
            Ok(self.bump()?.span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Span)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                self.pos += 1;
                Ok((t.text.clone(), t.span))
            }
            Some(t) if t.kind == TokenKind::Keyword => {
                if let Some(d) = sv_keyword_error(t) {
                    return Err(d);
                }
                Err(self.unexpected("identifier"))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn check_systemverilog(&mut self) -> PResult<()> {
        if let Some(t) = self.peek() {
            if let Some(d) = sv_keyword_error(t) {
                return Err(d);
            }
        }
        Ok(())
    }

    // ---- module level -------------------------------------------------

    fn module(&mut self) -> PResult<FsmAst> {
        self.check_systemverilog()?;
        let start = self.here();
        if !self.at_kw("module") {
            return Err(self.unexpected("`module`"));
        }
        let leading_comments = self.take_pending();
        self.bump()?;
        let (module_name, _) = self.expect_ident()?;
        if self.at_op("#") {
            return Err(Diagnostic::error(
                "E_UNSUPPORTED",
                "parameter port lists (#(...)) are not supported",
                self.here(),
            ));
        }
        let header = if self.eat_op("(") {
            self.port_header()?
        } else {
            PortHeader::None
        };
        self.expect_op(";")?;

        let mut items = Vec::new();
        loop {
            self.skip_comments();
            for c in self.take_pending() {
                items.push(Item::Comment(c));
            }
            match self.peek() {
                None => return Err(self.unexpected("`endmodule`")),
                Some(t) if t.is_kw("endmodule") => break,
                Some(_) => items.push(self.item()?),
            }
        }
        let end = self.expect_kw("endmodule")?;
        self.skip_comments();
        if let Some(t) = self.peek() {
            return Err(Diagnostic::error(
                "E_UNSUPPORTED",
                format!("only one module per file is supported (found `{}`)", t.text),
                t.span,
            ));
        }
        let trailing_comments = self.take_pending();
        Ok(FsmAst {
            module_name,
            header,
            items,
            leading_comments,
            trailing_comments,
            protected_annotations: Vec::new(),
            notes: std::mem::take(&mut self.notes),
            span: start.to(end),
        })
    }

    fn port_header(&mut self) -> PResult<PortHeader> {
        if self.eat_op(")") {
            return Ok(PortHeader::NonAnsi(Vec::new()));
        }
        let first = self.peek().ok_or_else(|| self.unexpected("port list"))?;
        if direction_of(first).is_some() {
            let mut decls: Vec<PortDecl> = Vec::new();
            loop {
                let is_dir = self.peek().and_then(direction_of).is_some();
                if is_dir {
                    decls.push(self.port_decl_head()?);
                } else {
                    let (name, span) = self.expect_ident()?;
                    let last = decls
                        .last_mut()
                        .ok_or_else(|| self.unexpected("port direction"))?;
                    last.names.push(name);
                    last.span = last.span.to(span);
                }
                if self.eat_op(",") {
                    continue;
                }
                self.expect_op(")")?;
                break;
            }
            Ok(PortHeader::Ansi(decls))
        } else {
            let mut names = Vec::new();
            loop {
                let (name, _) = self.expect_ident()?;
                names.push(name);
                if self.eat_op(",") {
                    continue;
                }
                self.expect_op(")")?;
                break;
            }
            Ok(PortHeader::NonAnsi(names))
        }
    }

    /// `input [wire|reg] [range] name`
    fn port_decl_head(&mut self) -> PResult<PortDecl> {
        let dir_tok = self.bump()?;
        let direction = direction_of(dir_tok).expect("caller checked direction");
        let mut kind = None;
        let mut kind_span = dir_tok.span;
        while let Some(t) = self.peek() {
            let k = if t.is_kw("wire") {
                NetKind::Wire
            } else if t.is_kw("reg") {
                NetKind::Reg
            } else {
                break;
            };
            self.pos += 1;
            if let Some(prev) = kind {
                if prev != k {
                    let name = self.peek().map_or(String::new(), |t| t.text.clone());
                    return Err(Diagnostic::error(
                        "E_NET_KIND_CONFLICT",
                        format!("conflicting net kinds for {name}"),
                        kind_span.to(t.span),
                    ));
                }
            }
            kind = Some(k);
            kind_span = t.span;
        }
        self.check_systemverilog()?;
        let range = self.opt_range()?;
        let (name, span) = self.expect_ident()?;
        Ok(PortDecl {
            direction,
            kind,
            range,
            names: vec![name],
            span: dir_tok.span.to(span),
        })
    }

    fn opt_range(&mut self) -> PResult<Option<BitRange>> {
        if !self.eat_op("[") {
            return Ok(None);
        }
        let msb = self.range_bound()?;
        self.expect_op(":")?;
        let lsb = self.range_bound()?;
        self.expect_op("]")?;
        Ok(Some(BitRange { msb, lsb }))
    }

    fn range_bound(&mut self) -> PResult<u32> {
        let t = self.bump()?;
        if t.kind == TokenKind::Number {
            if let Some(v) = literal_value(&t.text) {
                return Ok(v as u32);
            }
        }
        Err(Diagnostic::error(
            "E_UNSUPPORTED",
            format!("range bounds must be integer constants, found `{}`", t.text),
            t.span,
        ))
    }

    fn item(&mut self) -> PResult<Item> {
        self.check_systemverilog()?;
        let t = self.peek().expect("caller checked");
        if direction_of(t).is_some() {
            let mut decl = self.port_decl_head()?;
            while self.eat_op(",") {
                let (name, span) = self.expect_ident()?;
                decl.names.push(name);
                decl.span = decl.span.to(span);
            }
            let end = self.expect_op(";")?;
            decl.span = decl.span.to(end);
            return Ok(Item::Port(decl));
        }
        if t.is_kw("parameter") || t.is_kw("localparam") {
            return self.param_decl().map(Item::Params);
        }
        if t.is_kw("reg") || t.is_kw("wire") {
            return self.net_decl().map(Item::Net);
        }
        if t.is_kw("assign") {
            let start = self.bump()?.span;
            let target = self.lvalue()?;
            self.expect_op("=")?;
            let value = self.expr()?;
            let end = self.expect_op(";")?;
            return Ok(Item::ContinuousAssign {
                target,
                value,
                span: start.to(end),
            });
        }
        if t.is_kw("always") {
            return self.always();
        }
        if t.kind == TokenKind::Keyword {
            return Err(Diagnostic::error(
                "E_UNSUPPORTED",
                format!("`{}` is outside the supported FSM subset", t.text),
                t.span,
            ));
        }
        Err(self.unexpected("module item"))
    }

    fn param_decl(&mut self) -> PResult<ParamDecl> {
        let kw = self.bump()?;
        if kw.text == "localparam" {
            self.notes.push(format!(
                "line {}: localparam normalized to parameter",
                kw.span.line_start
            ));
        }
        let range = self.opt_range()?;
        let mut entries = Vec::new();
        loop {
            let (name, name_span) = self.expect_ident()?;
            self.expect_op("=")?;
            let lit = self.bump()?;
            let value = state_literal(&name, lit)?;
            entries.push(Parameter {
                name,
                value,
                span: name_span.to(lit.span),
            });
            if self.eat_op(",") {
                continue;
            }
            break;
        }
        let end = self.expect_op(";")?;
        Ok(ParamDecl {
            range,
            entries,
            span: kw.span.to(end),
        })
    }

    fn net_decl(&mut self) -> PResult<NetDecl> {
        let kw = self.bump()?;
        let kind = if kw.text == "reg" {
            NetKind::Reg
        } else {
            NetKind::Wire
        };
        if self.at_kw("reg") || self.at_kw("wire") {
            let other = self.peek().unwrap();
            return Err(Diagnostic::error(
                "E_NET_KIND_CONFLICT",
                format!("conflicting net kinds `{}` and `{}`", kw.text, other.text),
                kw.span.to(other.span),
            ));
        }
        let range = self.opt_range()?;
        let mut names = Vec::new();
        loop {
            let (name, _) = self.expect_ident()?;
            if self.at_op("=") {
                return Err(Diagnostic::error(
                    "E_UNSUPPORTED",
                    format!("declaration initializer on {name} is not supported"),
                    self.here(),
                ));
            }
            names.push(name);
            if !self.eat_op(",") {
                break;
            }
        }
        let end = self.expect_op(";")?;
        Ok(NetDecl {
            kind,
            range,
            names,
            span: kw.span.to(end),
        })
    }

    fn always(&mut self) -> PResult<Item> {
        let start = self.bump()?.span;
        self.expect_op("@")?;
        let sensitivity = self.sensitivity()?;
        if sensitivity.has_edge() {
            let body = self.stmt()?;
            let span = start.to(body.span());
            let reset = analyze_sequential(&sensitivity, &body, span)?;
            return Ok(Item::Sequential(SeqBlock {
                sensitivity,
                body,
                reset,
                span,
            }));
        }
        self.comb_block(sensitivity, start).map(Item::Combinational)
    }

    fn sensitivity(&mut self) -> PResult<Sensitivity> {
        if self.eat_op("*") {
            return Ok(Sensitivity::Star);
        }
        self.expect_op("(")?;
        if self.eat_op("*") {
            self.expect_op(")")?;
            return Ok(Sensitivity::Star);
        }
        let mut entries = Vec::new();
        let mut separator = None;
        loop {
            let edge = if self.eat_kw("posedge") {
                Some(EdgeKind::Posedge)
            } else if self.eat_kw("negedge") {
                Some(EdgeKind::Negedge)
            } else {
                None
            };
            let (signal, _) = self.expect_ident()?;
            entries.push(SensEntry { edge, signal });
            let sep = if self.eat_kw("or") {
                SensSeparator::Or
            } else if self.eat_op(",") {
                SensSeparator::Comma
            } else {
                break;
            };
            match separator {
                None => separator = Some(sep),
                Some(s) if s != sep => {
                    let line = self.here().line_start;
                    self.notes
                        .push(format!("line {line}: mixed event separators normalized"));
                }
                _ => {}
            }
        }
        self.expect_op(")")?;
        Ok(Sensitivity::List {
            entries,
            separator: separator.unwrap_or(SensSeparator::Comma),
        })
    }

    fn comb_block(&mut self, sensitivity: Sensitivity, start: Span) -> PResult<CombBlock> {
        self.check_systemverilog()?;
        let missing_case = |span: Span| {
            Diagnostic::error(
                "E_NO_CASE",
                "combinational block has no case statement over the state register",
                span,
            )
        };
        if self.at_kw("case") || self.at_kw("casex") || self.at_kw("casez") {
            let case = self.case_stmt()?;
            let span = start.to(case.span);
            return Ok(CombBlock {
                sensitivity,
                wrapped: false,
                stray_semicolon: false,
                prelude: Vec::new(),
                case,
                postlude: Vec::new(),
                span,
            });
        }
        if !self.at_kw("begin") {
            let here = self.here();
            return Err(missing_case(start.to(here)));
        }
        self.bump()?;
        let mut prelude = Vec::new();
        let mut postlude = Vec::new();
        let mut case = None;
        loop {
            self.skip_comments();
            let target = if case.is_none() {
                &mut prelude
            } else {
                &mut postlude
            };
            for c in self.pending.drain(..) {
                target.push(Stmt::Comment(c));
            }
            let t = self.peek().ok_or_else(|| self.unexpected("`end`"))?;
            if t.is_kw("end") {
                break;
            }
            if t.is_kw("case") || t.is_kw("casex") || t.is_kw("casez") {
                if case.is_some() {
                    return Err(Diagnostic::error(
                        "E_UNSUPPORTED",
                        "only one case statement per combinational block is supported",
                        t.span,
                    ));
                }
                case = Some(self.case_stmt()?);
                continue;
            }
            let s = self.stmt()?;
            if case.is_none() {
                prelude.push(s);
            } else {
                postlude.push(s);
            }
        }
        let end = self.expect_kw("end")?;
        let stray_semicolon = self.eat_op(";");
        let span = start.to(end);
        let case = case.ok_or_else(|| missing_case(span))?;
        Ok(CombBlock {
            sensitivity,
            wrapped: true,
            stray_semicolon,
            prelude,
            case,
            postlude,
            span,
        })
    }

    fn case_stmt(&mut self) -> PResult<CaseStmt> {
        let kw = self.bump()?;
        if kw.text != "case" {
            return Err(Diagnostic::error(
                "E_UNSUPPORTED",
                format!("`{}` is not supported; use `case`", kw.text),
                kw.span,
            ));
        }
        self.expect_op("(")?;
        let (selector, _) = self.expect_ident()?;
        self.expect_op(")")?;
        let mut arms = Vec::new();
        loop {
            self.skip_comments();
            if self.at_kw("endcase") {
                break;
            }
            let leading_comments = self.take_pending();
            let t = self.peek().ok_or_else(|| self.unexpected("`endcase`"))?;
            let label = if t.is_kw("default") {
                self.pos += 1;
                self.eat_op(":");
                ArmLabel::Default
            } else if t.kind == TokenKind::Ident {
                self.pos += 1;
                if self.at_op(",") {
                    return Err(Diagnostic::error(
                        "E_UNSUPPORTED",
                        "case arms with several labels are not supported",
                        t.span,
                    ));
                }
                self.expect_op(":")?;
                ArmLabel::State(t.text.clone())
            } else {
                return Err(self.unexpected("case label"));
            };
            let body = self.stmt()?;
            arms.push(CaseArm {
                label,
                span: t.span.to(body.span()),
                body,
                leading_comments,
            });
        }
        let trailing_comments = self.take_pending();
        let end = self.expect_kw("endcase")?;
        Ok(CaseStmt {
            selector,
            arms,
            trailing_comments,
            span: kw.span.to(end),
        })
    }

    // ---- statements ---------------------------------------------------

    fn stmt(&mut self) -> PResult<Stmt> {
        self.check_systemverilog()?;
        let t = self.peek().ok_or_else(|| self.unexpected("statement"))?;
        if t.is_kw("begin") {
            self.pos += 1;
            if self.at_op(":") {
                return Err(Diagnostic::error(
                    "E_UNSUPPORTED",
                    "named blocks are not supported",
                    self.here(),
                ));
            }
            let mut stmts = Vec::new();
            loop {
                self.skip_comments();
                for c in self.pending.drain(..) {
                    stmts.push(Stmt::Comment(c));
                }
                if self.at_kw("end") {
                    break;
                }
                if self.eat_op(";") {
                    continue;
                }
                stmts.push(self.stmt()?);
            }
            let end = self.expect_kw("end")?;
            let stray_semicolon = self.eat_op(";");
            return Ok(Stmt::Block {
                stmts,
                stray_semicolon,
                span: t.span.to(end),
            });
        }
        if t.is_kw("if") {
            self.pos += 1;
            self.expect_op("(")?;
            let cond = self.expr()?;
            self.expect_op(")")?;
            let then_branch = Box::new(self.stmt()?);
            let mut span = t.span.to(then_branch.span());
            let else_branch = if self.eat_kw("else") {
                let e = self.stmt()?;
                span = span.to(e.span());
                Some(Box::new(e))
            } else {
                None
            };
            return Ok(Stmt::If {
                cond,
                then_branch,
                else_branch,
                span,
            });
        }
        if t.is_kw("case") || t.is_kw("casex") || t.is_kw("casez") {
            return Err(Diagnostic::error(
                "E_UNSUPPORTED",
                "nested case statements are not supported",
                t.span,
            ));
        }
        if t.kind == TokenKind::Ident {
            let target = self.lvalue()?;
            let nonblocking = if self.eat_op("<=") {
                true
            } else if self.eat_op("=") {
                false
            } else {
                return Err(self.unexpected("`=` or `<=`"));
            };
            if self.at_op("#") {
                return Err(Diagnostic::error(
                    "E_UNSUPPORTED",
                    "delay controls are not supported",
                    self.here(),
                ));
            }
            let value = self.expr()?;
            let end = self.expect_op(";")?;
            return Ok(Stmt::Assign {
                target,
                value,
                nonblocking,
                span: t.span.to(end),
            });
        }
        Err(self.unexpected("statement"))
    }

    fn lvalue(&mut self) -> PResult<String> {
        let (name, _) = self.expect_ident()?;
        if self.at_op("[") {
            let sel = self.bracket_text()?;
            return Ok(format!("{name}{sel}"));
        }
        Ok(name)
    }

    /// Consumes `[ ... ]` and returns it with tokens joined without spaces.
    fn bracket_text(&mut self) -> PResult<String> {
        self.expect_op("[")?;
        let mut text = String::from("[");
        loop {
            let t = self.bump()?;
            if t.is_op("]") {
                break;
            }
            if t.is_op("[") {
                return Err(Diagnostic::error(
                    "E_UNSUPPORTED",
                    "nested selects are not supported",
                    t.span,
                ));
            }
            text.push_str(&t.text);
        }
        text.push(']');
        Ok(text)
    }

    // ---- expressions --------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat_op("?") {
            let then_expr = self.expr()?;
            self.expect_op(":")?;
            let else_expr = self.expr()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then_expr: Box::new(then_expr),
                else_expr: Box::new(else_expr),
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        if level == BINARY_LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = match self.peek() {
                Some(t) if t.kind == TokenKind::Op && BINARY_LEVELS[level].contains(&t.text.as_str()) => {
                    t.text.clone()
                }
                _ => break,
            };
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let t = self.peek().ok_or_else(|| self.unexpected("expression"))?;
        if t.kind == TokenKind::Op && ["!", "~", "-", "+", "&", "|", "^"].contains(&t.text.as_str())
        {
            self.pos += 1;
            let operand = self.unary()?;
            return Ok(Expr::Unary {
                op: t.text.clone(),
                operand: Box::new(operand),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek().ok_or_else(|| self.unexpected("expression"))?;
        match t.kind {
            TokenKind::Ident => {
                self.pos += 1;
                if self.at_op("[") {
                    let select = self.bracket_text()?;
                    return Ok(Expr::Select {
                        name: t.text.clone(),
                        select,
                    });
                }
                Ok(Expr::Ident(t.text.clone()))
            }
            TokenKind::Number | TokenKind::BasedLiteral => {
                self.pos += 1;
                Ok(Expr::Literal(t.text.clone()))
            }
            TokenKind::Op if t.text == "(" => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_op(")")?;
                Ok(Expr::Paren(Box::new(inner)))
            }
            TokenKind::Op if t.text == "{" => Err(Diagnostic::error(
                "E_UNSUPPORTED",
                "concatenations are not supported",
                t.span,
            )),
            _ => {
                self.check_systemverilog()?;
                Err(self.unexpected("expression"))
            }
        }
    }
}

fn direction_of(t: &Token) -> Option<Direction> {
    if t.kind != TokenKind::Keyword {
        return None;
    }
    match t.text.as_str() {
        "input" => Some(Direction::Input),
        "output" => Some(Direction::Output),
        "inout" => Some(Direction::Inout),
        _ => None,
    }
}

fn sv_keyword_error(t: &Token) -> Option<Diagnostic> {
    (t.kind == TokenKind::Keyword && SYSTEMVERILOG_KEYWORDS.contains(&t.text.as_str())).then(|| {
        Diagnostic::error(
            "E_SYSTEMVERILOG",
            format!(
                "SystemVerilog keyword `{}` is not accepted in a Verilog design",
                t.text
            ),
            t.span,
        )
    })
}

fn state_literal(name: &str, lit: &Token) -> PResult<Encoding> {
    if lit.kind == TokenKind::Number {
        return Err(Diagnostic::error(
            "E_UNSIZED_STATE",
            format!("unsized state literal `{}` for {name}", lit.text),
            lit.span,
        ));
    }
    if lit.kind != TokenKind::BasedLiteral {
        return Err(Diagnostic::error(
            "E_PARSE",
            format!("expected a sized binary literal for {name}, found `{}`", lit.text),
            lit.span,
        ));
    }
    let text: String = lit.text.chars().filter(|&c| c != '_').collect();
    let q = text.find('\'').expect("based literal has a quote");
    if q == 0 {
        return Err(Diagnostic::error(
            "E_UNSIZED_STATE",
            format!("unsized state literal `{}` for {name}", lit.text),
            lit.span,
        ));
    }
    let width: usize = text[..q].parse().map_err(|_| {
        Diagnostic::error("E_PARSE", format!("bad literal width in `{}`", lit.text), lit.span)
    })?;
    let rest = &text[q + 1..];
    if !rest.starts_with(['b', 'B']) {
        return Err(Diagnostic::error(
            "E_STATE_LITERAL",
            format!("state encoding for {name} must be a binary literal (`{}`)", lit.text),
            lit.span,
        ));
    }
    let digits = &rest[1..];
    if width == 0 || width > MAX_WIDTH || digits.len() > width || digits.is_empty() {
        return Err(Diagnostic::error(
            "E_STATE_LITERAL",
            format!("state literal `{}` does not fit its declared width", lit.text),
            lit.span,
        ));
    }
    let padded = format!("{digits:0>width$}");
    padded.parse().map_err(|_| {
        Diagnostic::error(
            "E_STATE_LITERAL",
            format!("state literal `{}` has non-binary digits", lit.text),
            lit.span,
        )
    })
}

/// Recovers clock, reset and register names from the clocked block, which
/// must have the shape `if (<reset>) state <= RESET_STATE; else state <= next;`.
fn analyze_sequential(sens: &Sensitivity, body: &Stmt, span: Span) -> PResult<ResetInfo> {
    let shape_err = |msg: &str, at: Span| Diagnostic::error("E_SEQ_SHAPE", msg.to_string(), at);
    let inner = unwrap_single(body);
    let Stmt::If {
        cond,
        then_branch,
        else_branch,
        span: if_span,
    } = inner
    else {
        return Err(shape_err(
            "sequential block must be `if (reset) ... else ...`",
            span,
        ));
    };
    let Some(else_branch) = else_branch else {
        return Err(shape_err(
            "sequential block has no else branch updating the state register",
            *if_span,
        ));
    };
    let (state_reg, next_reg) = match unwrap_single(else_branch) {
        Stmt::Assign {
            target,
            value: Expr::Ident(next),
            ..
        } => (target.clone(), next.clone()),
        other => {
            return Err(shape_err(
                "else branch must assign the next-state register to the state register",
                other.span(),
            ))
        }
    };
    let mut reset_target = None;
    then_branch.walk(&mut |s| {
        if let Stmt::Assign {
            target,
            value: Expr::Ident(v),
            ..
        } = s
        {
            if *target == state_reg && reset_target.is_none() {
                reset_target = Some(v.clone());
            }
        }
    });
    let reset_target = reset_target.ok_or_else(|| {
        shape_err(
            "reset branch does not assign a state to the state register",
            then_branch.span(),
        )
    })?;
    let mut ids = Vec::new();
    cond.identifiers(&mut ids);
    let reset_signal = ids
        .first()
        .cloned()
        .ok_or_else(|| shape_err("reset condition names no signal", *if_span))?;
    let Sensitivity::List { entries, .. } = sens else {
        unreachable!("sequential blocks have edge events")
    };
    let clock = entries
        .iter()
        .find(|e| e.edge.is_some() && e.signal != reset_signal)
        .map(|e| e.signal.clone())
        .ok_or_else(|| shape_err("no clock edge in sensitivity list", span))?;
    let asynchronous = entries.iter().any(|e| e.signal == reset_signal);
    Ok(ResetInfo {
        clock,
        reset_signal,
        asynchronous,
        reset_target,
        state_reg,
        next_reg,
    })
}

fn unwrap_single(stmt: &Stmt) -> &Stmt {
    match stmt {
        Stmt::Block { stmts, .. } => {
            let mut real = stmts.iter().filter(|s| !matches!(s, Stmt::Comment(_)));
            match (real.next(), real.next()) {
                (Some(only), None) => unwrap_single(only),
                _ => stmt,
            }
        }
        _ => stmt,
    }
}

/// Checks the invariants the rest of the crate relies on.
fn validate(ast: &FsmAst) -> Vec<Diagnostic> {
    let mut errs = Vec::new();
    let seqs: Vec<&SeqBlock> = ast
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Sequential(s) => Some(s),
            _ => None,
        })
        .collect();
    let combs: Vec<&CombBlock> = ast
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Combinational(c) => Some(c),
            _ => None,
        })
        .collect();
    if combs.is_empty() {
        errs.push(Diagnostic::error(
            "E_NO_FSM",
            "no state machine found",
            ast.span,
        ));
        return errs;
    }
    if seqs.is_empty() {
        errs.push(Diagnostic::error(
            "E_NO_FSM",
            "no state machine found: missing sequential block for the state register",
            ast.span,
        ));
        return errs;
    }
    if seqs.len() > 1 {
        errs.push(Diagnostic::error(
            "E_MULTIPLE_SEQ",
            "two sequential blocks found; exactly one is supported",
            seqs[1].span,
        ));
    }
    if combs.len() > 1 {
        errs.push(Diagnostic::error(
            "E_MULTIPLE_COMB",
            "two combinational blocks found; exactly one is supported",
            combs[1].span,
        ));
    }
    let seq = seqs[0];
    let comb = combs[0];
    let params: Vec<&Parameter> = ast.parameters().collect();
    if params.is_empty() {
        errs.push(Diagnostic::error(
            "E_NO_STATES",
            "no state parameters declared",
            ast.span,
        ));
        return errs;
    }
    let width = params[0].value.width();
    let mut names = BTreeSet::new();
    for p in &params {
        if p.value.width() != width {
            errs.push(Diagnostic::error(
                "E_WIDTH",
                format!(
                    "state {} is {} bits wide but {} is {} bits",
                    p.name,
                    p.value.width(),
                    params[0].name,
                    width
                ),
                p.span,
            ));
        }
        if !names.insert(p.name.as_str()) {
            errs.push(Diagnostic::error(
                "E_DUPLICATE_NAME",
                format!("parameter {} declared twice", p.name),
                p.span,
            ));
        }
    }
    let reset = &seq.reset;
    let reg_width = ast.items.iter().find_map(|i| match i {
        Item::Net(n) if n.kind == NetKind::Reg && n.names.contains(&reset.state_reg) => {
            Some(n.range.map_or(1, |r| r.width()) as usize)
        }
        _ => None,
    });
    match reg_width {
        None => errs.push(Diagnostic::error(
            "E_UNDECLARED",
            format!("state register {} is not declared as reg", reset.state_reg),
            seq.span,
        )),
        Some(w) if w != width => errs.push(Diagnostic::error(
            "E_WIDTH",
            format!(
                "state register {} is {w} bits wide but encodings are {width} bits",
                reset.state_reg
            ),
            seq.span,
        )),
        _ => {}
    }
    if !names.contains(reset.reset_target.as_str()) {
        errs.push(Diagnostic::error(
            "E_UNDECLARED",
            format!("reset target {} is not a declared state", reset.reset_target),
            seq.span,
        ));
    }
    if comb.case.selector != reset.state_reg {
        errs.push(Diagnostic::error(
            "E_NO_CASE",
            format!(
                "case selector {} is not the state register {}",
                comb.case.selector, reset.state_reg
            ),
            comb.case.span,
        ));
    }
    let mut seen = BTreeSet::new();
    for arm in &comb.case.arms {
        if !seen.insert(arm.label.clone()) {
            errs.push(Diagnostic::error(
                "E_DUPLICATE_ARM",
                format!("duplicate case arm {:?}", arm.label),
                arm.span,
            ));
        }
        if let ArmLabel::State(s) = &arm.label {
            if !names.contains(s.as_str()) {
                errs.push(Diagnostic::error(
                    "E_UNDECLARED",
                    format!("case arm on undeclared label {s}"),
                    arm.span,
                ));
            }
        }
    }
    errs
}

fn collect_annotations(tokens: &[Token]) -> Vec<String> {
    let mut out = Vec::new();
    for t in tokens.iter().filter(|t| t.kind == TokenKind::Comment) {
        let mut rest = t.text.as_str();
        while let Some(i) = rest.find("@protected") {
            rest = &rest[i + "@protected".len()..];
            let names = rest
                .split(|c: char| c == '\n' || c == '*')
                .next()
                .unwrap_or("");
            for n in names.split([' ', ',', '\t']).filter(|n| !n.is_empty()) {
                if !out.contains(&n.to_string()) {
                    out.push(n.to_string());
                }
            }
        }
    }
    out
}

/// Parses a token stream produced by the lexer into an [`FsmAst`].
pub fn parse_module(tokens: &[Token]) -> Result<FsmAst, Vec<Diagnostic>> {
    let mut parser = Parser::new(tokens);
    let mut ast = parser.module().map_err(|d| vec![d])?;
    let errs = validate(&ast);
    if !errs.is_empty() {
        return Err(errs);
    }
    ast.protected_annotations = collect_annotations(tokens);
    Ok(ast)
}
