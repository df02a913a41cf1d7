//! Seeded vulnerability injection.
//!
//! Every class enumerates its candidate edits in an order fixed by the seed
//! and keeps the first one whose checker report gains violations of the
//! target rule only. The returned AST is the re-parse of the emitted text, so
//! its spans refer to that text.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::LineRange;
use crate::encoding::Encoding;
use crate::frontend::{self, emit_verilog, ArmLabel, CaseArm, Expr, FsmAst, Item, ParamDecl, Parameter, Stmt};
use crate::rules::{check_ast, CheckReport, RuleConfig, RuleId};
use crate::stg::{extract_stg, reachable_states, StgError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VulnClass {
    #[serde(rename = "CWE835_TRAP")]
    Cwe835Trap,
    #[serde(rename = "MISSING_DEFAULT")]
    MissingDefault,
    #[serde(rename = "DUPLICATE_ENCODING")]
    DuplicateEncoding,
    #[serde(rename = "UNREACHABLE_STATE")]
    UnreachableState,
    #[serde(rename = "STATIC_DEADLOCK")]
    StaticDeadlock,
}

impl VulnClass {
    pub const ALL: [VulnClass; 5] = [
        VulnClass::Cwe835Trap,
        VulnClass::MissingDefault,
        VulnClass::DuplicateEncoding,
        VulnClass::UnreachableState,
        VulnClass::StaticDeadlock,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VulnClass::Cwe835Trap => "CWE835_TRAP",
            VulnClass::MissingDefault => "MISSING_DEFAULT",
            VulnClass::DuplicateEncoding => "DUPLICATE_ENCODING",
            VulnClass::UnreachableState => "UNREACHABLE_STATE",
            VulnClass::StaticDeadlock => "STATIC_DEADLOCK",
        }
    }

    /// The checker rule that detects this class.
    pub fn rule(self) -> RuleId {
        match self {
            VulnClass::Cwe835Trap => RuleId::TrapLoopCwe835,
            VulnClass::MissingDefault => RuleId::MissingDefault,
            VulnClass::DuplicateEncoding => RuleId::DuplicateEncoding,
            VulnClass::UnreachableState => RuleId::UnreachableState,
            VulnClass::StaticDeadlock => RuleId::StaticDeadlock,
        }
    }
}

impl fmt::Display for VulnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VulnClass {
    type Err = InjectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().replace('-', "_").to_ascii_uppercase();
        let found = VulnClass::ALL.into_iter().find(|c| {
            c.as_str() == norm
                || (norm == "TRAP_LOOP" || norm == "TRAP_LOOP_CWE835") && *c == VulnClass::Cwe835Trap
        });
        found.ok_or_else(|| InjectError::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InjectError {
    #[error("unknown vulnerability class `{0}`")]
    UnknownClass(String),
    #[error("no unused encoding left to mint a new state")]
    NoUnusedEncoding,
    #[error("need at least {0} unused encodings")]
    NotEnoughUnused(usize),
    #[error("need at least two states")]
    TooFewStates,
    #[error("design has no default arm")]
    NoDefaultArm,
    #[error("every encoding is used, so removing the default arm creates no weakness")]
    NoUnusedToExpose,
    #[error("design already violates {0}")]
    AlreadyPresent(RuleId),
    #[error("no candidate edit for {0} yields a design flagged for that class only")]
    NoCandidate(VulnClass),
    #[error("state {0} is not a valid injection site")]
    BadSite(String),
    #[error("base design does not analyze cleanly: {0}")]
    Base(String),
    #[error(transparent)]
    Stg(#[from] StgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Added,
    Modified,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub kind: EditKind,
    /// Short description of the edited node, e.g. `parameter DEADLOCK_STATE`.
    pub node: String,
    /// Lines in the canonical emission of the base design.
    pub base_lines: Option<LineRange>,
    /// Lines in the injected design text.
    pub injected_lines: Option<LineRange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub vuln: VulnClass,
    pub seed: u64,
    pub target_state: Option<String>,
    pub added_states: Vec<String>,
    pub edits: Vec<Edit>,
    pub notes: Vec<String>,
}

impl InjectionPlan {
    /// Edited line ranges in the injected text.
    pub fn modified_spans(&self) -> Vec<LineRange> {
        self.edits.iter().filter_map(|e| e.injected_lines).collect()
    }
}

/// Where a node lives, so its lines can be looked up after re-parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
enum NodeRef {
    Param(String),
    Arm(ArmLabel),
    Stmt(String, Vec<usize>),
}

impl NodeRef {
    fn describe(&self) -> String {
        match self {
            NodeRef::Param(p) => format!("parameter {p}"),
            NodeRef::Arm(ArmLabel::State(s)) => format!("case arm {s}"),
            NodeRef::Arm(ArmLabel::Default) => "default arm".to_string(),
            NodeRef::Stmt(arm, _) => format!("statement in arm {arm}"),
        }
    }

    fn lines(&self, ast: &FsmAst) -> Option<LineRange> {
        match self {
            NodeRef::Param(p) => ast.parameter(p).map(|p| p.span.lines()),
            NodeRef::Arm(label) => ast
                .case()
                .arms
                .iter()
                .find(|a| a.label == *label)
                .map(|a| a.span.lines()),
            NodeRef::Stmt(arm, path) => {
                let arm = ast.case().arm(arm)?;
                stmt_at(&arm.body, path).map(|s| s.span().lines())
            }
        }
    }
}

struct PendingEdit {
    kind: EditKind,
    node: NodeRef,
}

fn stmt_at<'a>(s: &'a Stmt, path: &[usize]) -> Option<&'a Stmt> {
    let Some((&first, rest)) = path.split_first() else {
        return Some(s);
    };
    match s {
        Stmt::Block { stmts, .. } => stmt_at(stmts.get(first)?, rest),
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => match first {
            0 => stmt_at(then_branch, rest),
            1 => stmt_at(else_branch.as_deref()?, rest),
            _ => None,
        },
        _ => None,
    }
}

fn stmt_at_mut<'a>(s: &'a mut Stmt, path: &[usize]) -> Option<&'a mut Stmt> {
    let Some((&first, rest)) = path.split_first() else {
        return Some(s);
    };
    match s {
        Stmt::Block { stmts, .. } => stmt_at_mut(stmts.get_mut(first)?, rest),
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => match first {
            0 => stmt_at_mut(then_branch, rest),
            1 => stmt_at_mut(else_branch.as_deref_mut()?, rest),
            _ => None,
        },
        _ => None,
    }
}

/// A place in an arm where the next state can be redirected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BranchSite {
    /// An existing `next = X` assignment.
    Redirect(Vec<usize>),
    /// An `if` without `else`; the new branch becomes its else.
    AddElse(Vec<usize>),
}

fn branch_sites(body: &Stmt, next_reg: &str) -> Vec<BranchSite> {
    fn go(s: &Stmt, next_reg: &str, path: &mut Vec<usize>, out: &mut Vec<BranchSite>) {
        match s {
            Stmt::Assign {
                target,
                value: Expr::Ident(_),
                ..
            } if target == next_reg => out.push(BranchSite::Redirect(path.clone())),
            Stmt::Block { stmts, .. } => {
                for (i, c) in stmts.iter().enumerate() {
                    path.push(i);
                    go(c, next_reg, path, out);
                    path.pop();
                }
            }
            Stmt::If {
                then_branch,
                else_branch,
                cond,
                ..
            } => {
                if cond.constant_truth().is_some() {
                    return;
                }
                path.push(0);
                go(then_branch, next_reg, path, out);
                path.pop();
                match else_branch {
                    Some(e) => {
                        path.push(1);
                        go(e, next_reg, path, out);
                        path.pop();
                    }
                    None => out.push(BranchSite::AddElse(path.clone())),
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    go(body, next_reg, &mut Vec::new(), &mut out);
    out
}

fn assignment_style(ast: &FsmAst) -> bool {
    let next = ast.state_regs().next;
    let mut nonblocking = false;
    for arm in &ast.case().arms {
        arm.body.walk(&mut |s| {
            if let Stmt::Assign {
                target,
                nonblocking: nb,
                ..
            } = s
            {
                if *target == next {
                    nonblocking = *nb;
                }
            }
        });
    }
    nonblocking
}

fn next_assign(ast: &FsmAst, target: &str) -> Stmt {
    let mut s = Stmt::assign(&ast.state_regs().next, Expr::ident(target));
    if let Stmt::Assign { nonblocking, .. } = &mut s {
        *nonblocking = assignment_style(ast);
    }
    s
}

/// Applies a branch site, returning the node whose lines changed.
fn apply_site(ast: &mut FsmAst, state: &str, site: &BranchSite, target: &str) -> Option<NodeRef> {
    let assign = next_assign(ast, target);
    let arm = ast.case_mut().arm_mut(state)?;
    match site {
        BranchSite::Redirect(path) => {
            let s = stmt_at_mut(&mut arm.body, path)?;
            if let Stmt::Assign { value, .. } = s {
                *value = Expr::ident(target);
            }
            Some(NodeRef::Stmt(state.to_string(), path.clone()))
        }
        BranchSite::AddElse(path) => {
            let s = stmt_at_mut(&mut arm.body, path)?;
            if let Stmt::If {
                then_branch,
                else_branch,
                ..
            } = s
            {
                if matches!(then_branch.as_ref(), Stmt::If { else_branch: None, .. }) {
                    let inner = std::mem::replace(then_branch.as_mut(), Stmt::block(Vec::new()));
                    **then_branch = Stmt::block(vec![inner]);
                }
                *else_branch = Some(Box::new(assign));
            }
            Some(NodeRef::Stmt(state.to_string(), path.clone()))
        }
    }
}

fn uppercase_style(ast: &FsmAst) -> bool {
    ast.parameters()
        .all(|p| !p.name.chars().any(|c| c.is_ascii_lowercase()))
}

/// `stem` in the design's naming style, suffixed until it is fresh.
fn fresh_name(ast: &FsmAst, stem: &str, taken: &BTreeSet<String>) -> String {
    let base = if uppercase_style(ast) {
        stem.to_ascii_uppercase()
    } else {
        stem.to_ascii_lowercase()
    };
    let ids = ast.identifiers();
    let mut name = base.clone();
    let mut k = 1;
    while ids.contains(&name) || taken.contains(&name) {
        name = format!("{base}_{k}");
        k += 1;
    }
    name
}

fn unused_codes(ast: &FsmAst, count: usize) -> Result<Vec<Encoding>, InjectError> {
    let w = ast.width();
    let used: BTreeSet<u64> = ast.parameters().map(|p| p.value.value()).collect();
    let total = 1u64 << w;
    let codes: Vec<Encoding> = (0..total)
        .filter(|v| !used.contains(v))
        .take(count)
        .map(|v| Encoding::from_value(v, w).expect("fits"))
        .collect();
    if codes.len() < count {
        return Err(if count == 1 {
            InjectError::NoUnusedEncoding
        } else {
            InjectError::NotEnoughUnused(count)
        });
    }
    Ok(codes)
}

fn add_state(ast: &mut FsmAst, name: &str, code: Encoding, body: Stmt) {
    let decl = Item::Params(ParamDecl {
        range: None,
        entries: vec![Parameter {
            name: name.to_string(),
            value: code,
            span: Default::default(),
        }],
        span: Default::default(),
    });
    let at = ast
        .items
        .iter()
        .rposition(|i| matches!(i, Item::Params(_)))
        .map_or(0, |i| i + 1);
    ast.items.insert(at, decl);
    let arm = CaseArm {
        label: ArmLabel::State(name.to_string()),
        body,
        leading_comments: Vec::new(),
        span: Default::default(),
    };
    let case = ast.case_mut();
    let pos = case
        .arms
        .iter()
        .position(|a| a.label == ArmLabel::Default)
        .unwrap_or(case.arms.len());
    case.arms.insert(pos, arm);
}

fn reparse(ast: &FsmAst) -> Result<FsmAst, InjectError> {
    frontend::parse(&emit_verilog(ast)).map_err(|d| {
        InjectError::Base(
            d.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        )
    })
}

/// Options shared by every injection.
#[derive(Debug, Clone, Default)]
pub struct Injector {
    /// Extra protected states, merged with the design's annotations.
    pub protected: BTreeSet<String>,
    pub config: RuleConfig,
}

struct Candidate {
    ast: FsmAst,
    edits: Vec<PendingEdit>,
    target_state: Option<String>,
    added_states: Vec<String>,
    notes: Vec<String>,
}

impl Injector {
    fn report(&self, ast: &FsmAst) -> CheckReport {
        check_ast(ast, &self.protected, &self.config, &ast.module_name)
    }

    fn base(&self, ast: &FsmAst) -> Result<(FsmAst, CheckReport), InjectError> {
        let canon = reparse(ast)?;
        let report = self.report(&canon);
        if !report.parsed {
            return Err(InjectError::Base(
                report
                    .lint
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            ));
        }
        Ok((canon, report))
    }

    /// True when `after` adds violations of `rule` and changes nothing else.
    fn isolated(&self, before: &CheckReport, after: &CheckReport, rule: RuleId) -> bool {
        if !after.parsed {
            return false;
        }
        let b = before.keys();
        let a = after.keys();
        let added: Vec<_> = a.difference(&b).collect();
        !added.is_empty() && added.iter().all(|k| k.rule == rule) && b.is_subset(&a)
    }

    fn finish(
        &self,
        vuln: VulnClass,
        seed: u64,
        base: &FsmAst,
        base_report: &CheckReport,
        candidates: impl IntoIterator<Item = Candidate>,
    ) -> Result<(FsmAst, InjectionPlan), InjectError> {
        for cand in candidates {
            let Ok(out) = reparse(&cand.ast) else {
                continue;
            };
            let report = self.report(&out);
            if !self.isolated(base_report, &report, vuln.rule()) {
                continue;
            }
            let edits = cand
                .edits
                .iter()
                .map(|e| Edit {
                    kind: e.kind,
                    node: e.node.describe(),
                    base_lines: (e.kind != EditKind::Added)
                        .then(|| e.node.lines(base))
                        .flatten(),
                    injected_lines: (e.kind != EditKind::Removed)
                        .then(|| e.node.lines(&out))
                        .flatten(),
                })
                .collect();
            let plan = InjectionPlan {
                vuln,
                seed,
                target_state: cand.target_state,
                added_states: cand.added_states,
                edits,
                notes: cand.notes,
            };
            return Ok((out, plan));
        }
        Err(InjectError::NoCandidate(vuln))
    }

    /// States eligible for redirection with their branch sites, in seeded order.
    fn redirect_sites(&self, ast: &FsmAst, rng: &mut ChaCha8Rng) -> Result<Vec<(String, BranchSite)>, InjectError> {
        let stg = extract_stg(ast, &self.protected)?;
        let reach = reachable_states(&stg);
        let next = ast.state_regs().next;
        let mut states: Vec<String> = stg
            .states
            .iter()
            .filter(|s| !s.protected && reach.contains(&s.name))
            .map(|s| s.name.clone())
            .filter(|s| ast.case().arm(s).is_some())
            .collect();
        states.shuffle(rng);
        let mut out = Vec::new();
        for s in states {
            let mut sites = branch_sites(&ast.case().arm(&s).expect("filtered").body, &next);
            sites.shuffle(rng);
            out.extend(sites.into_iter().map(|site| (s.clone(), site)));
        }
        Ok(out)
    }

    pub fn inject_static_deadlock(&self, ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
        let (base, report) = self.base(ast)?;
        if report.count(RuleId::StaticDeadlock) > 0 {
            return Err(InjectError::AlreadyPresent(RuleId::StaticDeadlock));
        }
        let code = unused_codes(&base, 1)?.remove(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sites = self.redirect_sites(&base, &mut rng)?;
        let name = fresh_name(&base, "deadlock_state", &BTreeSet::new());
        let candidates = sites.into_iter().filter_map(|(state, site)| {
            self.deadlock_candidate(&base, &state, &site, &name, &code)
        });
        self.finish(VulnClass::StaticDeadlock, seed, &base, &report, candidates)
    }

    /// Deadlock injection at an explicit site, for reproducing a known shape.
    pub fn inject_static_deadlock_at(
        &self,
        ast: &FsmAst,
        state: &str,
        site_index: usize,
    ) -> Result<(FsmAst, InjectionPlan), InjectError> {
        let (base, report) = self.base(ast)?;
        let code = unused_codes(&base, 1)?.remove(0);
        let arm = base
            .case()
            .arm(state)
            .ok_or_else(|| InjectError::BadSite(state.to_string()))?;
        let sites = branch_sites(&arm.body, &base.state_regs().next);
        let site = sites
            .get(site_index)
            .ok_or_else(|| InjectError::BadSite(state.to_string()))?;
        let name = fresh_name(&base, "deadlock_state", &BTreeSet::new());
        let cand = self.deadlock_candidate(&base, state, site, &name, &code);
        self.finish(VulnClass::StaticDeadlock, 0, &base, &report, cand)
    }

    fn deadlock_candidate(
        &self,
        base: &FsmAst,
        state: &str,
        site: &BranchSite,
        name: &str,
        code: &Encoding,
    ) -> Option<Candidate> {
        let mut ast = base.clone();
        let node = apply_site(&mut ast, state, site, name)?;
        let body = Stmt::block(vec![next_assign(base, name)]);
        add_state(&mut ast, name, code.clone(), body);
        Some(Candidate {
            ast,
            edits: vec![
                PendingEdit {
                    kind: EditKind::Added,
                    node: NodeRef::Param(name.to_string()),
                },
                PendingEdit {
                    kind: EditKind::Modified,
                    node,
                },
                PendingEdit {
                    kind: EditKind::Added,
                    node: NodeRef::Arm(ArmLabel::State(name.to_string())),
                },
            ],
            target_state: Some(state.to_string()),
            added_states: vec![name.to_string()],
            notes: vec![format!("{state} redirected into self-looping {name} ({code})")],
        })
    }

    pub fn inject_duplicate_encoding(&self, ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
        let (base, report) = self.base(ast)?;
        let names = base.state_names();
        if names.len() < 2 {
            return Err(InjectError::TooFewStates);
        }
        let mut pairs: Vec<(String, String)> = Vec::new();
        for a in &names {
            for b in &names {
                if a != b {
                    pairs.push((a.clone(), b.clone()));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pairs.shuffle(&mut rng);
        let candidates = pairs
            .iter()
            .filter_map(|(a, b)| Self::duplicate_candidate(&base, a, b));
        self.finish(VulnClass::DuplicateEncoding, seed, &base, &report, candidates)
    }

    /// Overwrites `second`'s encoding with `first`'s.
    pub fn inject_duplicate_encoding_pair(
        &self,
        ast: &FsmAst,
        first: &str,
        second: &str,
    ) -> Result<(FsmAst, InjectionPlan), InjectError> {
        let (base, report) = self.base(ast)?;
        if base.state_names().len() < 2 {
            return Err(InjectError::TooFewStates);
        }
        let cand = Self::duplicate_candidate(&base, first, second)
            .ok_or_else(|| InjectError::BadSite(format!("{first}/{second}")))?;
        self.finish(VulnClass::DuplicateEncoding, 0, &base, &report, Some(cand))
    }

    fn duplicate_candidate(base: &FsmAst, first: &str, second: &str) -> Option<Candidate> {
        let code = base.parameter(first)?.value.clone();
        if base.parameter(second)?.value == code || first == second {
            return None;
        }
        let mut ast = base.clone();
        ast.parameter_mut(second)?.value = code.clone();
        Some(Candidate {
            ast,
            edits: vec![PendingEdit {
                kind: EditKind::Modified,
                node: NodeRef::Param(second.to_string()),
            }],
            target_state: Some(second.to_string()),
            added_states: Vec::new(),
            notes: vec![format!("{second} re-encoded to {code}, the encoding of {first}")],
        })
    }

    pub fn inject_unreachable_state(&self, ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
        let (base, report) = self.base(ast)?;
        let code = unused_codes(&base, 1)?.remove(0);
        let name = fresh_name(&base, "orphan_state", &BTreeSet::new());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = base.data_inputs();
        inputs.shuffle(&mut rng);
        let reset = base.reset_state().to_string();
        let mut exits: Vec<String> = base.state_names().into_iter().filter(|s| *s != reset).collect();
        exits.shuffle(&mut rng);
        exits.insert(0, reset);
        let mut shapes: Vec<(Option<String>, String)> = Vec::new();
        for exit in &exits {
            for i in &inputs {
                shapes.push((Some(i.clone()), exit.clone()));
            }
            shapes.push((None, exit.clone()));
        }
        let candidates = shapes.into_iter().map(|(input, exit)| {
            let mut ast = base.clone();
            let body = match &input {
                Some(i) => Stmt::block(vec![Stmt::If {
                    cond: Expr::ident(i),
                    then_branch: Box::new(next_assign(&base, &exit)),
                    else_branch: Some(Box::new(next_assign(&base, &name))),
                    span: Default::default(),
                }]),
                None => Stmt::block(vec![next_assign(&base, &exit)]),
            };
            add_state(&mut ast, &name, code.clone(), body);
            let how = input.map_or_else(|| "unconditionally".to_string(), |i| format!("when {i}"));
            Candidate {
                ast,
                edits: vec![
                    PendingEdit {
                        kind: EditKind::Added,
                        node: NodeRef::Param(name.clone()),
                    },
                    PendingEdit {
                        kind: EditKind::Added,
                        node: NodeRef::Arm(ArmLabel::State(name.clone())),
                    },
                ],
                target_state: Some(name.clone()),
                added_states: vec![name.clone()],
                notes: vec![format!("{name} ({code}) has no incoming edge and exits to {exit} {how}")],
            }
        });
        self.finish(VulnClass::UnreachableState, seed, &base, &report, candidates)
    }

    pub fn remove_default_arm(&self, ast: &FsmAst) -> Result<(FsmAst, InjectionPlan), InjectError> {
        let (base, report) = self.base(ast)?;
        if base.case().default_arm().is_none() {
            return Err(InjectError::NoDefaultArm);
        }
        let stg = extract_stg(&base, &self.protected)?;
        let (unused, count) = crate::rules::unused_encodings(&stg, crate::rules::encoding::MAX_LISTED_UNUSED);
        if count == 0 {
            return Err(InjectError::NoUnusedToExpose);
        }
        let mut out = base.clone();
        out.case_mut().arms.retain(|a| a.label != ArmLabel::Default);
        let listed: Vec<String> = unused.iter().map(|e| e.to_string()).collect();
        let cand = Candidate {
            ast: out,
            edits: vec![PendingEdit {
                kind: EditKind::Removed,
                node: NodeRef::Arm(ArmLabel::Default),
            }],
            target_state: None,
            added_states: Vec::new(),
            notes: vec![format!("unused encodings now unhandled: {}", listed.join(", "))],
        };
        self.finish(VulnClass::MissingDefault, 0, &base, &report, Some(cand))
    }

    pub fn inject_trap_loop(&self, ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
        let (base, report) = self.base(ast)?;
        let codes = unused_codes(&base, 2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sites = self.redirect_sites(&base, &mut rng)?;
        let a = fresh_name(&base, "trap_a", &BTreeSet::new());
        let b = fresh_name(&base, "trap_b", &[a.clone()].into());
        let candidates = sites.into_iter().filter_map(|(state, site)| {
            let mut ast = base.clone();
            let node = apply_site(&mut ast, &state, &site, &a)?;
            add_state(&mut ast, &a, codes[0].clone(), Stmt::block(vec![next_assign(&base, &b)]));
            add_state(&mut ast, &b, codes[1].clone(), Stmt::block(vec![next_assign(&base, &a)]));
            Some(Candidate {
                ast,
                edits: vec![
                    PendingEdit {
                        kind: EditKind::Added,
                        node: NodeRef::Param(a.clone()),
                    },
                    PendingEdit {
                        kind: EditKind::Added,
                        node: NodeRef::Param(b.clone()),
                    },
                    PendingEdit {
                        kind: EditKind::Modified,
                        node,
                    },
                    PendingEdit {
                        kind: EditKind::Added,
                        node: NodeRef::Arm(ArmLabel::State(a.clone())),
                    },
                    PendingEdit {
                        kind: EditKind::Added,
                        node: NodeRef::Arm(ArmLabel::State(b.clone())),
                    },
                ],
                target_state: Some(state.clone()),
                added_states: vec![a.clone(), b.clone()],
                notes: vec![format!("{state} redirected into the cycle {a} <-> {b}")],
            })
        });
        self.finish(VulnClass::Cwe835Trap, seed, &base, &report, candidates)
    }

    pub fn plan_injection(&self, vuln: VulnClass, ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
        let (out, mut plan) = match vuln {
            VulnClass::Cwe835Trap => self.inject_trap_loop(ast, seed),
            VulnClass::MissingDefault => self.remove_default_arm(ast),
            VulnClass::DuplicateEncoding => self.inject_duplicate_encoding(ast, seed),
            VulnClass::UnreachableState => self.inject_unreachable_state(ast, seed),
            VulnClass::StaticDeadlock => self.inject_static_deadlock(ast, seed),
        }?;
        plan.seed = seed;
        Ok((out, plan))
    }
}

pub fn inject_static_deadlock(ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
    Injector::default().inject_static_deadlock(ast, seed)
}

pub fn inject_duplicate_encoding(ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
    Injector::default().inject_duplicate_encoding(ast, seed)
}

pub fn inject_unreachable_state(ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
    Injector::default().inject_unreachable_state(ast, seed)
}

pub fn remove_default_arm(ast: &FsmAst) -> Result<(FsmAst, InjectionPlan), InjectError> {
    Injector::default().remove_default_arm(ast)
}

pub fn inject_trap_loop(ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
    Injector::default().inject_trap_loop(ast, seed)
}

pub fn plan_injection(vuln: VulnClass, ast: &FsmAst, seed: u64) -> Result<(FsmAst, InjectionPlan), InjectError> {
    Injector::default().plan_injection(vuln, ast, seed)
}
