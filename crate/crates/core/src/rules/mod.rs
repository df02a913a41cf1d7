//! Security rules over the state-transition graph and the aggregate report.

pub mod encoding;
pub mod fif;
pub mod graph;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::{Diagnostic, LineRange, Span};
use crate::encoding::Encoding;
use crate::frontend::{self, FsmAst, SourceText};
use crate::stg::{extract_stg, Stg};

pub use encoding::{check_default_handling, check_hd_rule, detect_duplicate_encodings, unused_encodings};
pub use fif::{check_fif_rule, fif_metric, fif_table, BitFif, BitTriple, FifResult};
pub use graph::{detect_static_deadlock, detect_trap_loops, detect_unreachable_states, tarjan_scc};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("FIF rule requires a protected state")]
    NoProtectedState,
    #[error("encoding widths differ (bx {bx}, by {by}, bp {bp})")]
    WidthMismatch { bx: usize, by: usize, bp: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "FIF_NONZERO")]
    FifNonzero,
    #[serde(rename = "HD_NOT_ONE")]
    HdNotOne,
    #[serde(rename = "STATIC_DEADLOCK")]
    StaticDeadlock,
    #[serde(rename = "TRAP_LOOP_CWE835")]
    TrapLoopCwe835,
    #[serde(rename = "UNREACHABLE_STATE")]
    UnreachableState,
    #[serde(rename = "DUPLICATE_ENCODING")]
    DuplicateEncoding,
    #[serde(rename = "MISSING_DEFAULT")]
    MissingDefault,
}

impl RuleId {
    pub const ALL: [RuleId; 7] = [
        RuleId::FifNonzero,
        RuleId::HdNotOne,
        RuleId::StaticDeadlock,
        RuleId::TrapLoopCwe835,
        RuleId::UnreachableState,
        RuleId::DuplicateEncoding,
        RuleId::MissingDefault,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::FifNonzero => "FIF_NONZERO",
            RuleId::HdNotOne => "HD_NOT_ONE",
            RuleId::StaticDeadlock => "STATIC_DEADLOCK",
            RuleId::TrapLoopCwe835 => "TRAP_LOOP_CWE835",
            RuleId::UnreachableState => "UNREACHABLE_STATE",
            RuleId::DuplicateEncoding => "DUPLICATE_ENCODING",
            RuleId::MissingDefault => "MISSING_DEFAULT",
        }
    }

    /// 1-based number used in the human-readable policy listing.
    pub fn policy_number(self) -> usize {
        RuleId::ALL.iter().position(|r| *r == self).unwrap() + 1
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown rule id {s}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    pub states: Vec<String>,
    pub transition: Option<(String, String)>,
    pub lines: Option<LineRange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Fif(FifResult),
    HammingDistance {
        value: u32,
    },
    Deadlock {
        entered_from: Vec<String>,
    },
    Trap {
        states: Vec<String>,
        entered_from: Vec<String>,
    },
    Unreachable {
        has_outgoing: bool,
        exits: Vec<String>,
    },
    DuplicateEncoding {
        encoding: Encoding,
        states: (String, String),
    },
    MissingDefault {
        unused: Vec<Encoding>,
        unused_count: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule: RuleId,
    pub locus: Locus,
    pub message: String,
    pub evidence: Evidence,
}

/// Identity of a violation independent of line numbers and encodings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ViolationKey {
    pub rule: RuleId,
    pub states: Vec<String>,
}

impl RuleViolation {
    pub fn key(&self) -> ViolationKey {
        let mut states = self.locus.states.clone();
        states.sort();
        ViolationKey {
            rule: self.rule,
            states,
        }
    }
}

/// Rule toggles. FIF is opt-in; everything else runs by default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub fif: bool,
    pub hamming_distance: bool,
    pub static_deadlock: bool,
    pub trap_loop: bool,
    pub unreachable_state: bool,
    pub duplicate_encoding: bool,
    pub missing_default: bool,
    /// Whether FIF and HD also look at self-edges.
    pub include_self_edges: bool,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            fif: false,
            hamming_distance: true,
            static_deadlock: true,
            trap_loop: true,
            unreachable_state: true,
            duplicate_encoding: true,
            missing_default: true,
            include_self_edges: false,
        }
    }
}

impl RuleConfig {
    pub fn all() -> Self {
        RuleConfig {
            fif: true,
            ..Default::default()
        }
    }

    pub fn enabled(&self, rule: RuleId) -> bool {
        match rule {
            RuleId::FifNonzero => self.fif,
            RuleId::HdNotOne => self.hamming_distance,
            RuleId::StaticDeadlock => self.static_deadlock,
            RuleId::TrapLoopCwe835 => self.trap_loop,
            RuleId::UnreachableState => self.unreachable_state,
            RuleId::DuplicateEncoding => self.duplicate_encoding,
            RuleId::MissingDefault => self.missing_default,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRule {
    pub rule: RuleId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub design: String,
    pub parsed: bool,
    pub protected: Vec<String>,
    pub violations: Vec<RuleViolation>,
    pub lint: Vec<Diagnostic>,
    /// Enabled rules that could not be evaluated on this design.
    pub skipped: Vec<SkippedRule>,
    pub config: RuleConfig,
}

impl CheckReport {
    pub fn rule_ids(&self) -> BTreeSet<RuleId> {
        self.violations.iter().map(|v| v.rule).collect()
    }

    pub fn count(&self, rule: RuleId) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    pub fn of(&self, rule: RuleId) -> impl Iterator<Item = &RuleViolation> {
        self.violations.iter().filter(move |v| v.rule == rule)
    }

    pub fn keys(&self) -> BTreeSet<ViolationKey> {
        self.violations.iter().map(|v| v.key()).collect()
    }

    pub fn has_errors(&self) -> bool {
        self.lint.iter().any(|d| d.is_error())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable listing, one policy per rule.
    pub fn to_text(&self) -> String {
        let mut out = format!("design: {}\n", self.design);
        if !self.protected.is_empty() {
            out.push_str(&format!("protected: {}\n", self.protected.join(", ")));
        }
        for d in &self.lint {
            out.push_str(&format!("{d}\n"));
        }
        if !self.parsed {
            return out;
        }
        for rule in RuleId::ALL {
            let n = rule.policy_number();
            if let Some(s) = self.skipped.iter().find(|s| s.rule == rule) {
                out.push_str(&format!("Policy {n} ({rule}): not evaluated, {}\n", s.reason));
                continue;
            }
            if !self.config.enabled(rule) {
                out.push_str(&format!("Policy {n} ({rule}): disabled\n"));
                continue;
            }
            let hits: Vec<&RuleViolation> = self.of(rule).collect();
            if hits.is_empty() {
                out.push_str(&format!("Policy {n} ({rule}): Not violated\n"));
            }
            for v in hits {
                let line = v
                    .locus
                    .lines
                    .map(|l| format!(", line no: {l}"))
                    .unwrap_or_default();
                out.push_str(&format!(
                    "Policy {n} ({rule}): Violated, explanation: {}{line}\n",
                    v.message
                ));
            }
        }
        out
    }
}

fn sort_violations(v: &mut [RuleViolation]) {
    v.sort_by(|a, b| {
        let la = a.locus.lines.map(|l| (l.start, l.end));
        let lb = b.locus.lines.map(|l| (l.start, l.end));
        (a.rule, la, &a.locus.states).cmp(&(b.rule, lb, &b.locus.states))
    });
}

/// Runs every enabled rule on an already-parsed design.
pub fn check_ast(
    ast: &FsmAst,
    protected: &BTreeSet<String>,
    config: &RuleConfig,
    design: &str,
) -> CheckReport {
    let mut report = CheckReport {
        schema_version: crate::SCHEMA_VERSION,
        design: design.to_string(),
        parsed: true,
        protected: Vec::new(),
        violations: Vec::new(),
        lint: frontend::lint(ast),
        skipped: Vec::new(),
        config: config.clone(),
    };
    let stg = match extract_stg(ast, protected) {
        Ok(stg) => stg,
        Err(e) => {
            report.lint.push(Diagnostic::error("E_STG", e.to_string(), Span::default()));
            report.parsed = false;
            return report;
        }
    };
    report.protected = stg.protected_states().iter().map(|s| s.name.clone()).collect();
    report.violations = check_stg(ast, &stg, config, &mut report.skipped);
    report
}

fn check_stg(
    ast: &FsmAst,
    stg: &Stg,
    config: &RuleConfig,
    skipped: &mut Vec<SkippedRule>,
) -> Vec<RuleViolation> {
    let mut v = Vec::new();
    let no_protected = stg.protected_states().is_empty();
    for rule in [RuleId::FifNonzero, RuleId::HdNotOne] {
        if config.enabled(rule) && no_protected {
            skipped.push(SkippedRule {
                rule,
                reason: "no protected state designated".to_string(),
            });
        }
    }
    if config.fif && !no_protected {
        v.extend(check_fif_rule(stg, config.include_self_edges).expect("protected set checked"));
    }
    if config.hamming_distance && !no_protected {
        v.extend(check_hd_rule(stg, config.include_self_edges));
    }
    if config.static_deadlock {
        v.extend(detect_static_deadlock(stg));
    }
    if config.trap_loop {
        v.extend(detect_trap_loops(stg));
    }
    if config.unreachable_state {
        v.extend(detect_unreachable_states(stg));
    }
    if config.duplicate_encoding {
        v.extend(detect_duplicate_encodings(stg));
    }
    if config.missing_default {
        v.extend(check_default_handling(ast, stg));
    }
    sort_violations(&mut v);
    v
}

/// Parses, lints, builds the graph and runs every enabled rule. A design
/// that fails to parse yields a report carrying only its error diagnostics.
pub fn run_all_checks(
    src: &SourceText,
    protected: &BTreeSet<String>,
    config: &RuleConfig,
) -> CheckReport {
    match frontend::parse(src) {
        Ok(ast) => check_ast(&ast, protected, config, &src.origin),
        Err(diags) => CheckReport {
            schema_version: crate::SCHEMA_VERSION,
            design: src.origin.clone(),
            parsed: false,
            protected: protected.iter().cloned().collect(),
            violations: Vec::new(),
            lint: diags,
            skipped: Vec::new(),
            config: config.clone(),
        },
    }
}
