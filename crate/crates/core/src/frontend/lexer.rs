//! Lossless tokenizer for the supported Verilog subset.
//!
//! Every byte of the input ends up in exactly one token, including whitespace
//! and comments, so concatenating token texts reproduces the source.

use crate::diag::{Diagnostic, Span};

use super::SourceText;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Whitespace,
    Comment,
    /// Compiler directive such as `` `timescale ``; runs to end of line.
    Directive,
    Ident,
    Keyword,
    /// Sized or based literal: `3'b010`, `'b1`, `4'hF`.
    BasedLiteral,
    Number,
    Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn is_trivia(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::Whitespace | TokenKind::Comment | TokenKind::Directive
        )
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text == op
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == kw
    }
}

pub const KEYWORDS: &[&str] = &[
    "module",
    "endmodule",
    "input",
    "output",
    "inout",
    "wire",
    "reg",
    "parameter",
    "localparam",
    "always",
    "posedge",
    "negedge",
    "or",
    "begin",
    "end",
    "if",
    "else",
    "case",
    "casex",
    "casez",
    "endcase",
    "default",
    "assign",
    "integer",
    "initial",
    "function",
    "task",
    "generate",
    "defparam",
];

/// SystemVerilog-only keywords. They lex as keywords so the parser can reject
/// them with a precise message instead of a generic syntax error.
pub const SYSTEMVERILOG_KEYWORDS: &[&str] = &[
    "logic",
    "bit",
    "byte",
    "int",
    "always_comb",
    "always_ff",
    "always_latch",
    "typedef",
    "enum",
    "struct",
    "union",
    "unique",
    "unique0",
    "priority",
    "interface",
    "endinterface",
    "package",
    "endpackage",
    "import",
    "modport",
];

const OPERATORS: &[&str] = &[
    "===", "!==", "<<<", ">>>", "<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "~&", "~|",
    "~^", "^~", "**", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~", "&", "|", "^", "?",
    ":", ";", ",", ".", "(", ")", "[", "]", "{", "}", "@", "#",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word) || SYSTEMVERILOG_KEYWORDS.contains(&word)
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    tokens: Vec<Token>,
    errors: Vec<Diagnostic>,
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn push(&mut self, kind: TokenKind, len: usize) {
        let text = &self.src[self.pos..self.pos + len];
        let newlines = text.bytes().filter(|&b| b == b'\n').count() as u32;
        let span = Span::new(self.pos, self.pos + len, self.line, self.line + newlines);
        self.tokens.push(Token {
            kind,
            text: text.to_string(),
            span,
        });
        self.pos += len;
        self.line += newlines;
    }

    fn run(mut self) -> (Vec<Token>, Vec<Diagnostic>) {
        while self.pos < self.src.len() {
            let rest = self.rest();
            let c = rest.chars().next().unwrap();
            if c.is_whitespace() {
                let len = rest
                    .char_indices()
                    .find(|&(_, ch)| !ch.is_whitespace())
                    .map_or(rest.len(), |(i, _)| i);
                self.push(TokenKind::Whitespace, len);
            } else if rest.starts_with("//") {
                let len = rest.find('\n').unwrap_or(rest.len());
                self.push(TokenKind::Comment, len);
            } else if rest.starts_with("/*") {
                match rest[2..].find("*/") {
                    Some(i) => self.push(TokenKind::Comment, i + 4),
                    None => {
                        let span = Span::new(self.pos, self.src.len(), self.line, self.line);
                        self.errors.push(Diagnostic::error(
                            "E_LEX",
                            "unterminated block comment",
                            span,
                        ));
                        let len = rest.len();
                        self.push(TokenKind::Comment, len);
                    }
                }
            } else if c == '`' {
                let len = rest.find('\n').unwrap_or(rest.len());
                self.push(TokenKind::Directive, len);
            } else if c.is_ascii_alphabetic() || c == '_' || c == '\\' {
                let len = if c == '\\' {
                    // escaped identifier runs to the next whitespace
                    rest.find(char::is_whitespace).unwrap_or(rest.len())
                } else {
                    rest.find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_' || ch == '$'))
                        .unwrap_or(rest.len())
                };
                let kind = if is_keyword(&rest[..len]) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Ident
                };
                self.push(kind, len);
            } else if c.is_ascii_digit() || c == '\'' {
                self.number(rest);
            } else if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
                self.push(TokenKind::Op, op.len());
            } else {
                let len = c.len_utf8();
                let span = Span::new(self.pos, self.pos + len, self.line, self.line);
                self.errors.push(Diagnostic::error(
                    "E_LEX",
                    format!("illegal character {c:?}"),
                    span,
                ));
                self.push(TokenKind::Op, len);
            }
        }
        (self.tokens, self.errors)
    }

    fn number(&mut self, rest: &str) {
        let bytes = rest.as_bytes();
        let mut i = 0;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'\'' {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b's' || bytes[j] == b'S') {
                j += 1;
            }
            if j < bytes.len() && b"bBoOdDhH".contains(&bytes[j]) {
                j += 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                self.push(TokenKind::BasedLiteral, j);
                return;
            }
            // a lone quote is not part of the subset
            if i == 0 {
                let span = Span::new(self.pos, self.pos + 1, self.line, self.line);
                self.errors
                    .push(Diagnostic::error("E_LEX", "illegal character '\\''", span));
                self.push(TokenKind::Op, 1);
                return;
            }
        }
        self.push(TokenKind::Number, i);
    }
}

/// Splits `src` into tokens. Illegal characters are reported as error
/// diagnostics; the returned token stream is still lossless.
pub fn tokenize_lossless(src: &SourceText) -> (Vec<Token>, Vec<Diagnostic>) {
    Lexer {
        src: &src.content,
        pos: 0,
        line: 1,
        tokens: Vec::new(),
        errors: Vec::new(),
    }
    .run()
}

/// Tokenizes `src`, failing if any byte is outside the lexical grammar.
pub fn tokenize(src: &SourceText) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let (tokens, errors) = tokenize_lossless(src);
    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors)
    }
}
