//! Verilog FSM frontend: lexer, parser, lint and emitter.

pub mod ast;
pub mod emit;
pub mod lexer;
pub mod lint;
pub mod parser;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diag::{Diagnostic, Span};

pub use ast::*;
pub use emit::emit_verilog;
pub use lexer::{tokenize, tokenize_lossless, Token, TokenKind};
pub use lint::lint;
pub use parser::parse_module;

/// Design text plus a label saying where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceText {
    pub content: String,
    pub origin: String,
}

impl SourceText {
    pub fn new(content: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceText {
            content: content.into(),
            origin: origin.into(),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let content = std::fs::read_to_string(path)?;
        Ok(SourceText::new(content, path.display().to_string()))
    }

    /// Byte offset of the first character of a 1-based line.
    pub fn line_offset(&self, line: u32) -> Option<usize> {
        if line == 0 {
            return None;
        }
        if line == 1 {
            return Some(0);
        }
        self.content
            .match_indices('\n')
            .nth(line as usize - 2)
            .map(|(i, _)| i + 1)
    }

    pub fn line_count(&self) -> usize {
        self.content.lines().count()
    }
}

/// Tokenizes and parses in one step.
pub fn parse(src: &SourceText) -> Result<FsmAst, Vec<Diagnostic>> {
    if src.content.trim().is_empty() {
        return Err(vec![Diagnostic::error(
            "E_EMPTY",
            "no state machine found: empty source",
            Span::default(),
        )]);
    }
    let tokens = tokenize(src)?;
    parse_module(&tokens)
}

/// Parses a source string, panicking with the diagnostics on failure. Meant for
/// tests and embedded fixtures.
pub fn parse_str(text: &str) -> FsmAst {
    match parse(&SourceText::new(text, "<inline>")) {
        Ok(ast) => ast,
        Err(diags) => panic!(
            "parse failed: {}",
            diags
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        ),
    }
}
