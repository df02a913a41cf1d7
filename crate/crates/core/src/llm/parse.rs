use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::frontend::SourceText;

fn opener_for(close: &str) -> Option<&'static str> {
    match close {
        "]" => Some("["),
        ")" => Some("("),
        "}" => Some("{"),
        ">" => Some("<"),
        _ => None,
    }
}

/// Content between `open` and its matching `close`.
///
/// Matching counts nested `open` markers and, when `close` is a single
/// bracket, bare opening brackets of the same kind, so `reg [2:0]` inside
/// a `[code: ...]` block does not end it early. With nested markers the
/// innermost marked region wins.
pub fn extract_delimited(response: &str, open: &str, close: &str) -> Result<String, LlmError> {
    if open.is_empty() || close.is_empty() {
        return Err(LlmError::Delimiters("empty marker".into()));
    }
    let start = response
        .find(open)
        .ok_or_else(|| LlmError::Delimiters(format!("`{open}` not found")))?;
    let bare = opener_for(close).filter(|b| *b != open);
    // (is_marker, content start)
    let mut stack: Vec<(bool, usize)> = Vec::new();
    let mut best: Option<(usize, usize, usize)> = None;
    let mut i = start;
    while i < response.len() {
        let rest = &response[i..];
        if rest.starts_with(open) {
            stack.push((true, i + open.len()));
            i += open.len();
        } else if rest.starts_with(close) {
            let Some((marker, from)) = stack.pop() else { break };
            if marker {
                let depth = stack.iter().filter(|f| f.0).count();
                if best.map_or(true, |(d, _, _)| depth > d) {
                    best = Some((depth, from, i));
                }
            }
            i += close.len();
            if stack.is_empty() {
                break;
            }
        } else if bare.is_some_and(|b| rest.starts_with(b)) {
            stack.push((false, i + 1));
            i += 1;
        } else {
            i += rest.chars().next().map_or(1, char::len_utf8);
        }
    }
    if !stack.is_empty() {
        return Err(LlmError::Delimiters(format!("unbalanced `{open}` .. `{close}`")));
    }
    let (_, from, to) = best.ok_or_else(|| LlmError::Delimiters(format!("`{close}` not found")))?;
    Ok(response[from..to].trim().to_string())
}

/// Code between the markers, with one surrounding `<` `>` pair removed.
pub fn parse_delimited_code(response: &str, open: &str, close: &str) -> Result<SourceText, LlmError> {
    let inner = extract_delimited(response, open, close)?;
    let code = match inner.strip_prefix('<').and_then(|s| s.strip_suffix('>')) {
        Some(s) => s.trim().to_string(),
        None => inner,
    };
    Ok(SourceText::new(code, "response.v"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyVerdict {
    pub policy: u32,
    pub violated: bool,
    pub explanation: String,
    pub line: Option<u32>,
}

fn verdict_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?mi)^[\s*\-]*policy\s*#?\s*(\d+)\s*[:.]\s*(not\s+violated|violated)\b[\s,.]*(?:explanation\s*:\s*(.*?))?\s*(?:,\s*line\s*(?:no|number)\.?\s*:\s*(\d+)[^\n]*)?\s*$",
        )
        .unwrap()
    })
}

pub fn parse_policy_verdicts(response: &str, policy_count: usize) -> Result<Vec<PolicyVerdict>, LlmError> {
    let mut out: Vec<PolicyVerdict> = Vec::new();
    for c in verdict_re().captures_iter(response) {
        let policy: u32 = c[1].parse().map_err(|_| LlmError::Verdicts(format!("bad policy number {}", &c[1])))?;
        if out.iter().any(|v| v.policy == policy) {
            return Err(LlmError::Verdicts(format!("policy {policy} reported twice")));
        }
        out.push(PolicyVerdict {
            policy,
            violated: !c[2].to_ascii_lowercase().starts_with("not"),
            explanation: c.get(3).map_or("", |m| m.as_str()).trim().trim_end_matches(',').trim().to_string(),
            line: c.get(4).and_then(|m| m.as_str().parse().ok()),
        });
    }
    if out.is_empty() {
        return Err(LlmError::Verdicts("no policy verdict lines".into()));
    }
    if out.len() != policy_count {
        return Err(LlmError::Verdicts(format!(
            "expected {policy_count} verdicts, found {}",
            out.len()
        )));
    }
    Ok(out)
}

/// One transition's FIF as reported in a response table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FifCapture {
    pub from: String,
    pub from_encoding: Option<String>,
    pub to: String,
    pub to_encoding: Option<String>,
    pub per_bit: Vec<u8>,
    pub overall: u8,
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?mi)^[\s*\-]*state transition\s*\d+\s*:\s*(\w+)\s*(?:\(\s*(?:encoding\s*=\s*)?([01]+)?\s*\))?\s*(?:->|→|\\rightarrow)\s*(\w+)\s*(?:\(\s*(?:encoding\s*=\s*)?([01]+)?\s*\))?",
        )
        .unwrap()
    })
}

/// Transitions with their per-bit and overall FIF, in response order.
pub fn parse_fif_response(response: &str) -> Result<Vec<FifCapture>, LlmError> {
    let heads: Vec<_> = header_re().captures_iter(response).collect();
    if heads.is_empty() {
        return Err(LlmError::Table("no state transition blocks".into()));
    }
    let mut out = Vec::new();
    for (k, h) in heads.iter().enumerate() {
        let start = h.get(0).unwrap().end();
        let end = heads.get(k + 1).map_or(response.len(), |n| n.get(0).unwrap().start());
        let block = &response[start..end];
        let label = format!("{} -> {}", &h[1], &h[3]);
        let per_bit: Vec<u8> = block
            .lines()
            .find_map(|l| {
                let l = l.trim();
                let rest = l.strip_prefix("Calculated FIF_i").or_else(|| l.strip_prefix("Calculated FIF"))?;
                Some(rest.split_whitespace().filter_map(|t| t.parse().ok()).collect())
            })
            .ok_or_else(|| LlmError::Table(format!("{label}: no calculated FIF row")))?;
        let overall_at = block
            .find("Overall FIF")
            .ok_or_else(|| LlmError::Table(format!("{label}: no overall FIF")))?;
        let tail = &block[overall_at..];
        let overall = tail
            .rsplit('=')
            .next()
            .and_then(|s| s.split_whitespace().next())
            .and_then(|s| s.trim_end_matches(['.', ',']).parse::<u8>().ok())
            .filter(|v| *v <= 1)
            .ok_or_else(|| LlmError::Table(format!("{label}: unreadable overall FIF")))?;
        if per_bit.iter().any(|b| *b > 1) {
            return Err(LlmError::Table(format!("{label}: non-binary FIF_i")));
        }
        out.push(FifCapture {
            from: h[1].to_string(),
            from_encoding: h.get(2).map(|m| m.as_str().to_string()),
            to: h[3].to_string(),
            to_encoding: h.get(4).map(|m| m.as_str().to_string()),
            per_bit,
            overall,
        });
    }
    Ok(out)
}
