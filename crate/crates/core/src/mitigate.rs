//! Deterministic repair of rule violations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::Encoding;
use crate::frontend::{self, emit_verilog, ArmLabel, CaseArm, Expr, FsmAst, Item, SourceText, Stmt};
use crate::rules::{check_ast, CheckReport, RuleConfig, RuleId, RuleViolation};
use crate::stg::{extract_stg, hamming_distance, reachable_states, stg_isomorphic_modulo_encoding, unprotected_transitions, Stg, StgError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MitigateError {
    #[error("design already has a default arm")]
    DefaultPresent,
    #[error("state {0} is not declared")]
    Undeclared(String),
    #[error("{0} states do not fit in {1} bits")]
    TooManyStates(usize, usize),
    #[error("state {0} is not a static deadlock")]
    NotDeadlocked(String),
    #[error("exit target must differ from the deadlocked state {0}")]
    SelfExit(String),
    #[error("state {0} is reachable")]
    Reachable(String),
    #[error("state {0} is the reset state")]
    ResetState(String),
    #[error("state {0} is still referenced by arm {1}")]
    StillReferenced(String, String),
    #[error("design has no duplicate encodings")]
    NoDuplicates,
    #[error("not enough unused encodings to separate duplicates")]
    InsufficientCodes,
    #[error(transparent)]
    Stg(#[from] StgError),
}

pub fn add_default_arm(ast: &FsmAst, target: &str) -> Result<FsmAst, MitigateError> {
    if ast.case().default_arm().is_some() {
        return Err(MitigateError::DefaultPresent);
    }
    if ast.parameter(target).is_none() {
        return Err(MitigateError::Undeclared(target.to_string()));
    }
    let mut out = ast.clone();
    let next = out.state_regs().next;
    out.case_mut().arms.push(CaseArm {
        label: ArmLabel::Default,
        body: Stmt::assign(&next, Expr::ident(target)),
        leading_comments: Vec::new(),
        span: Default::default(),
    });
    Ok(out)
}

/// Exit appended to `state`'s arm, guarded by `input` when given.
fn add_exit(ast: &FsmAst, state: &str, target: &str, input: Option<&str>) -> FsmAst {
    let mut out = ast.clone();
    let next = out.state_regs().next;
    let assign = Stmt::assign(&next, Expr::ident(target));
    let stmt = match input {
        Some(i) => Stmt::If {
            cond: Expr::ident(i),
            then_branch: Box::new(assign),
            else_branch: None,
            span: Default::default(),
        },
        None => assign,
    };
    let case = out.case_mut();
    match case.arm_mut(state) {
        Some(arm) => match &mut arm.body {
            Stmt::Block { stmts, .. } => stmts.push(stmt),
            other => {
                let prev = std::mem::replace(other, Stmt::block(Vec::new()));
                *other = Stmt::block(vec![prev, stmt]);
            }
        },
        None => {
            let pos = case
                .arms
                .iter()
                .position(|a| a.label == ArmLabel::Default)
                .unwrap_or(case.arms.len());
            case.arms.insert(
                pos,
                CaseArm {
                    label: ArmLabel::State(state.to_string()),
                    body: Stmt::block(vec![stmt]),
                    leading_comments: Vec::new(),
                    span: Default::default(),
                },
            );
        }
    }
    out
}

pub fn remove_static_deadlock(
    ast: &FsmAst,
    state: &str,
    exit_target: &str,
    input: Option<&str>,
) -> Result<FsmAst, MitigateError> {
    if ast.parameter(exit_target).is_none() {
        return Err(MitigateError::Undeclared(exit_target.to_string()));
    }
    if state == exit_target {
        return Err(MitigateError::SelfExit(state.to_string()));
    }
    let stg = extract_stg(ast, &BTreeSet::new())?;
    let flagged = crate::rules::detect_static_deadlock(&stg)
        .iter()
        .any(|v| v.locus.states == [state]);
    if !flagged {
        return Err(MitigateError::NotDeadlocked(state.to_string()));
    }
    Ok(add_exit(ast, state, exit_target, input))
}

pub fn remove_unreachable_state(ast: &FsmAst, state: &str) -> Result<FsmAst, MitigateError> {
    if ast.parameter(state).is_none() {
        return Err(MitigateError::Undeclared(state.to_string()));
    }
    if ast.reset_state() == state {
        return Err(MitigateError::ResetState(state.to_string()));
    }
    let stg = extract_stg(ast, &BTreeSet::new())?;
    if reachable_states(&stg).contains(state) {
        return Err(MitigateError::Reachable(state.to_string()));
    }
    let mut out = ast.clone();
    out.case_mut().arms.retain(|a| a.label.state() != Some(state));
    for arm in &out.case().arms {
        let mut ids = BTreeSet::new();
        arm.body.walk(&mut |s| match s {
            Stmt::Assign { value, .. } => {
                let mut v = Vec::new();
                value.identifiers(&mut v);
                ids.extend(v);
            }
            Stmt::If { cond, .. } => {
                let mut v = Vec::new();
                cond.identifiers(&mut v);
                ids.extend(v);
            }
            _ => {}
        });
        if ids.contains(state) {
            let label = arm.label.state().unwrap_or("default").to_string();
            return Err(MitigateError::StillReferenced(state.to_string(), label));
        }
    }
    for item in &mut out.items {
        if let Item::Params(p) = item {
            p.entries.retain(|e| e.name != state);
        }
    }
    out.items
        .retain(|i| !matches!(i, Item::Params(p) if p.entries.is_empty()));
    Ok(out)
}

pub fn uniquify_encodings(ast: &FsmAst) -> Result<FsmAst, MitigateError> {
    let w = ast.width();
    let codes: Vec<(String, u64)> = ast.parameters().map(|p| (p.name.clone(), p.value.value())).collect();
    let mut seen = BTreeSet::new();
    let mut colliders = Vec::new();
    for (name, code) in &codes {
        if !seen.insert(*code) {
            colliders.push(name.clone());
        }
    }
    if colliders.is_empty() {
        return Err(MitigateError::NoDuplicates);
    }
    let mut free = (0..1u64 << w).filter(|v| !seen.contains(v));
    let mut out = ast.clone();
    for name in colliders {
        let v = free.next().ok_or(MitigateError::InsufficientCodes)?;
        out.parameter_mut(&name).expect("declared").value = Encoding::from_value(v, w).expect("fits");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingAssignment {
    /// State name to encoding, in declaration order.
    pub map: Vec<(String, Encoding)>,
    /// Unprotected edges whose Hamming distance is still not 1.
    pub residual_violations: Vec<(String, String)>,
    /// Whether the search finished; false means the best assignment found
    /// within the node budget or by the greedy fallback.
    pub exact: bool,
}

impl EncodingAssignment {
    pub fn get(&self, state: &str) -> Option<&Encoding> {
        self.map.iter().find(|(n, _)| n == state).map(|(_, e)| e)
    }
}

/// Above this many states the search falls back to greedy BFS labeling.
pub const EXACT_STATE_LIMIT: usize = 8;
/// Search nodes explored before settling for the best assignment so far.
pub const NODE_BUDGET: u64 = 2_000_000;

/// Edges the Hamming-distance rule looks at, as state-index pairs.
fn hd_edges(stg: &Stg, include_self_edges: bool) -> Vec<(usize, usize)> {
    unprotected_transitions(stg)
        .into_iter()
        .filter(|t| include_self_edges || !t.is_self())
        .map(|t| (stg.index_of(&t.from).unwrap(), stg.index_of(&t.to).unwrap()))
        .collect()
}

/// Number of HD-rule edges not at distance 1 under `codes`.
pub fn assignment_cost(stg: &Stg, codes: &[u64], include_self_edges: bool) -> usize {
    hd_edges(stg, include_self_edges)
        .iter()
        .filter(|(a, b)| (codes[*a] ^ codes[*b]).count_ones() != 1)
        .count()
}

struct Search<'a> {
    n: usize,
    total: u64,
    /// Edges grouped by the later endpoint in declaration order.
    edges_at: Vec<Vec<usize>>,
    edges: &'a [(usize, usize)],
    codes: Vec<u64>,
    used: Vec<bool>,
    best: Option<(usize, Vec<u64>)>,
    nodes: u64,
    exhausted: bool,
}

impl Search<'_> {
    fn go(&mut self, i: usize, cost: usize) {
        if let Some((b, _)) = &self.best {
            if cost >= *b {
                return;
            }
        }
        if i == self.n {
            self.best = Some((cost, self.codes.clone()));
            return;
        }
        for c in 0..self.total {
            if self.used[c as usize] {
                continue;
            }
            self.nodes += 1;
            if self.nodes > NODE_BUDGET {
                self.exhausted = true;
                return;
            }
            self.codes[i] = c;
            let added = self.edges_at[i]
                .iter()
                .filter(|&&e| {
                    let (a, b) = self.edges[e];
                    (self.codes[a] ^ self.codes[b]).count_ones() != 1
                })
                .count();
            self.used[c as usize] = true;
            self.go(i + 1, cost + added);
            self.used[c as usize] = false;
            if self.exhausted || matches!(self.best, Some((0, _))) {
                return;
            }
        }
    }
}

fn greedy(stg: &Stg, edges: &[(usize, usize)]) -> Vec<u64> {
    let n = stg.states.len();
    let total = 1u64 << stg.width;
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut codes: Vec<Option<u64>> = vec![None; n];
    let mut used = BTreeSet::new();
    let mut order: Vec<usize> = Vec::new();
    let start = stg.index_of(&stg.reset_state).unwrap_or(0);
    let mut roots: Vec<usize> = vec![start];
    roots.extend((0..n).filter(|&i| i != start));
    for root in roots {
        if order.contains(&root) {
            continue;
        }
        let mut q = VecDeque::from([root]);
        let mut seen = vec![false; n];
        seen[root] = true;
        while let Some(v) = q.pop_front() {
            if !order.contains(&v) {
                order.push(v);
            }
            for &w in &adj[v] {
                if !seen[w] && !order.contains(&w) {
                    seen[w] = true;
                    q.push_back(w);
                }
            }
        }
    }
    for v in order {
        let neighbours: Vec<u64> = adj[v].iter().filter_map(|&w| codes[w]).collect();
        let pick = (0..total)
            .filter(|c| !used.contains(c))
            .max_by_key(|c| {
                let good = neighbours.iter().filter(|&&x| (x ^ c).count_ones() == 1).count();
                (good, std::cmp::Reverse(*c))
            })
            .expect("enough codes checked by caller");
        codes[v] = Some(pick);
        used.insert(pick);
    }
    codes.into_iter().map(|c| c.unwrap()).collect()
}

/// Injective re-encoding minimizing HD-rule violations. Ties go to the
/// lexicographically smallest code vector in declaration order.
pub fn reencode_states(stg: &Stg, include_self_edges: bool) -> Result<EncodingAssignment, MitigateError> {
    let n = stg.states.len();
    let total = 1u64 << stg.width;
    if n as u64 > total {
        return Err(MitigateError::TooManyStates(n, stg.width));
    }
    let edges = hd_edges(stg, include_self_edges);
    let (codes, exact) = if n <= EXACT_STATE_LIMIT {
        let mut edges_at = vec![Vec::new(); n];
        for (k, &(a, b)) in edges.iter().enumerate() {
            edges_at[a.max(b)].push(k);
        }
        let mut s = Search {
            n,
            total,
            edges_at,
            edges: &edges,
            codes: vec![0; n],
            used: vec![false; total as usize],
            best: None,
            nodes: 0,
            exhausted: false,
        };
        s.go(0, 0);
        let exact = !s.exhausted;
        match s.best {
            Some((_, codes)) => (codes, exact),
            None => (greedy(stg, &edges), false),
        }
    } else {
        (greedy(stg, &edges), false)
    };
    let residual_violations = edges
        .iter()
        .filter(|(a, b)| (codes[*a] ^ codes[*b]).count_ones() != 1)
        .map(|&(a, b)| (stg.states[a].name.clone(), stg.states[b].name.clone()))
        .collect();
    let map = stg
        .states
        .iter()
        .zip(&codes)
        .map(|(s, &c)| (s.name.clone(), Encoding::from_value(c, stg.width).expect("fits")))
        .collect();
    Ok(EncodingAssignment {
        map,
        residual_violations,
        exact,
    })
}

/// Rewrites parameter literals per `assignment`.
pub fn apply_encoding(ast: &FsmAst, assignment: &EncodingAssignment) -> FsmAst {
    let mut out = ast.clone();
    for (name, code) in &assignment.map {
        if let Some(p) = out.parameter_mut(name) {
            p.value = code.clone();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationConfig {
    pub max_rounds: usize,
    /// Default-arm and deadlock-exit target; the reset state when unset.
    pub default_target: Option<String>,
    /// Input guarding deadlock exits; exits are unconditional when unset.
    pub exit_input: Option<String>,
    pub reencode: bool,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        MitigationConfig {
            max_rounds: 5,
            default_target: None,
            exit_input: None,
            reencode: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationOutcome {
    pub schema_version: u32,
    pub design: SourceText,
    pub fixed: Vec<RuleId>,
    pub residual: Vec<RuleViolation>,
    pub stg_preserved: bool,
    /// Fix steps applied, in order.
    pub actions: Vec<String>,
}

struct Ctx<'a> {
    protected: BTreeSet<String>,
    rules: &'a RuleConfig,
    config: &'a MitigationConfig,
    design: String,
}

impl Ctx<'_> {
    fn check(&self, ast: &FsmAst) -> CheckReport {
        check_ast(ast, &self.protected, self.rules, &self.design)
    }

    /// Accepts `after` if it lowers the count of `rule` and adds nothing
    /// besides a missing default, which a later step repairs.
    fn improves(&self, before: &CheckReport, after: &CheckReport, rule: RuleId) -> bool {
        if !after.parsed || after.count(rule) >= before.count(rule) {
            return false;
        }
        let b = before.keys();
        after
            .keys()
            .iter()
            .filter(|k| !b.contains(k))
            .all(|k| k.rule == RuleId::MissingDefault && self.rules.missing_default)
    }

    fn exit_target(&self, ast: &FsmAst) -> String {
        self.config
            .default_target
            .clone()
            .filter(|t| ast.parameter(t).is_some())
            .unwrap_or_else(|| ast.reset_state().to_string())
    }

    fn fix_duplicates(&self, ast: &FsmAst, report: &CheckReport, log: &mut Vec<String>) -> Option<FsmAst> {
        let out = uniquify_encodings(ast).ok()?;
        self.improves(report, &self.check(&out), RuleId::DuplicateEncoding).then(|| {
            log.push("uniquify duplicate encodings".to_string());
            out
        })
    }

    fn fix_unreachable(&self, ast: &FsmAst, report: &CheckReport, log: &mut Vec<String>) -> Option<FsmAst> {
        let mut cur = ast.clone();
        let mut changed = false;
        let mut pending: Vec<String> = report
            .of(RuleId::UnreachableState)
            .map(|v| v.locus.states[0].clone())
            .collect();
        // states referenced only by other unreachable states go once those are gone
        while !pending.is_empty() {
            let before = pending.len();
            pending.retain(|s| match remove_unreachable_state(&cur, s) {
                Ok(next) => {
                    cur = next;
                    log.push(format!("remove unreachable state {s}"));
                    changed = true;
                    false
                }
                Err(_) => true,
            });
            if pending.len() == before {
                break;
            }
        }
        (changed && self.improves(report, &self.check(&cur), RuleId::UnreachableState)).then_some(cur)
    }

    fn fix_deadlocks(&self, ast: &FsmAst, report: &CheckReport, log: &mut Vec<String>) -> Option<FsmAst> {
        let mut cur = ast.clone();
        let mut cur_report = report.clone();
        let mut changed = false;
        let target = self.exit_target(ast);
        let deadlocks: Vec<String> = report
            .of(RuleId::StaticDeadlock)
            .map(|v| v.locus.states[0].clone())
            .collect();
        for state in deadlocks {
            let mut targets = vec![target.clone()];
            targets.extend(cur.state_names().into_iter().filter(|s| *s != target));
            for t in targets.iter().filter(|t| **t != state) {
                let next = add_exit(&cur, &state, t, self.config.exit_input.as_deref());
                let r = self.check(&next);
                if self.improves(&cur_report, &r, RuleId::StaticDeadlock) {
                    log.push(format!("add exit {state} -> {t}"));
                    cur = next;
                    cur_report = r;
                    changed = true;
                    break;
                }
            }
        }
        let traps: Vec<Vec<String>> = cur_report
            .of(RuleId::TrapLoopCwe835)
            .map(|v| v.locus.states.clone())
            .collect();
        for members in traps {
            let inputs = cur.data_inputs();
            let mut options: Vec<(String, Option<String>)> = members.iter().map(|m| (m.clone(), None)).collect();
            if let Some(i) = self.config.exit_input.clone().or_else(|| inputs.first().cloned()) {
                options.extend(members.iter().map(|m| (m.clone(), Some(i.clone()))));
            }
            for (m, input) in options {
                let next = add_exit(&cur, &m, &target, input.as_deref());
                let r = self.check(&next);
                if self.improves(&cur_report, &r, RuleId::TrapLoopCwe835) {
                    log.push(format!("add exit {m} -> {target}"));
                    cur = next;
                    cur_report = r;
                    changed = true;
                    break;
                }
            }
        }
        changed.then_some(cur)
    }

    fn fix_default(&self, ast: &FsmAst, report: &CheckReport, log: &mut Vec<String>) -> Option<FsmAst> {
        let target = self.exit_target(ast);
        let out = add_default_arm(ast, &target).ok()?;
        self.improves(report, &self.check(&out), RuleId::MissingDefault).then(|| {
            log.push(format!("add default arm -> {target}"));
            out
        })
    }

    fn fix_encoding(&self, ast: &FsmAst, report: &CheckReport, log: &mut Vec<String>) -> Option<FsmAst> {
        if !self.config.reencode {
            return None;
        }
        let stg = extract_stg(ast, &self.protected).ok()?;
        let assignment = reencode_states(&stg, self.rules.include_self_edges).ok()?;
        let out = apply_encoding(ast, &assignment);
        let after_stg = extract_stg(&out, &self.protected).ok()?;
        if !stg_isomorphic_modulo_encoding(&stg, &after_stg) {
            return None;
        }
        self.improves(report, &self.check(&out), RuleId::HdNotOne).then(|| {
            let codes: Vec<String> = assignment.map.iter().map(|(n, e)| format!("{n}={e}")).collect();
            log.push(format!("re-encode states {}", codes.join(" ")));
            out
        })
    }
}

/// Repairs the violations in `report`, re-checking after every step.
pub fn mitigate(src: &SourceText, report: &CheckReport, config: &MitigationConfig) -> MitigationOutcome {
    let unchanged = |residual: Vec<RuleViolation>| MitigationOutcome {
        schema_version: crate::SCHEMA_VERSION,
        design: src.clone(),
        fixed: Vec::new(),
        residual,
        stg_preserved: true,
        actions: Vec::new(),
    };
    let Ok(original) = frontend::parse(src) else {
        return unchanged(report.violations.clone());
    };
    let ctx = Ctx {
        protected: report.protected.iter().cloned().collect(),
        rules: &report.config,
        config,
        design: report.design.clone(),
    };
    let start = ctx.check(&original);
    if start.violations.is_empty() {
        return unchanged(Vec::new());
    }
    let steps = [
        RuleId::DuplicateEncoding,
        RuleId::UnreachableState,
        RuleId::StaticDeadlock,
        RuleId::TrapLoopCwe835,
        RuleId::MissingDefault,
        RuleId::HdNotOne,
    ];
    let mut ast = original.clone();
    let mut current = start.clone();
    let mut actions = Vec::new();
    for _ in 0..config.max_rounds {
        let mut progressed = false;
        for rule in steps {
            if current.count(rule) == 0 {
                continue;
            }
            let step = match rule {
                RuleId::DuplicateEncoding => ctx.fix_duplicates(&ast, &current, &mut actions),
                RuleId::UnreachableState => ctx.fix_unreachable(&ast, &current, &mut actions),
                RuleId::StaticDeadlock | RuleId::TrapLoopCwe835 => ctx.fix_deadlocks(&ast, &current, &mut actions),
                RuleId::MissingDefault => ctx.fix_default(&ast, &current, &mut actions),
                _ => ctx.fix_encoding(&ast, &current, &mut actions),
            };
            if let Some(next) = step {
                ast = next;
                current = ctx.check(&ast);
                progressed = true;
            }
        }
        if !progressed || current.violations.is_empty() {
            break;
        }
    }
    if actions.is_empty() {
        return unchanged(current.violations);
    }
    let before_ids = start.rule_ids();
    let after_ids = current.rule_ids();
    let fixed = before_ids.difference(&after_ids).copied().collect();
    let stg_preserved = match (
        extract_stg(&original, &ctx.protected),
        extract_stg(&ast, &ctx.protected),
    ) {
        (Ok(a), Ok(b)) => stg_isomorphic_modulo_encoding(&a, &b),
        _ => false,
    };
    let mut design = emit_verilog(&ast);
    design.origin = src.origin.clone();
    MitigationOutcome {
        schema_version: crate::SCHEMA_VERSION,
        design,
        fixed,
        residual: current.violations,
        stg_preserved,
        actions,
    }
}

/// Count of HD-rule edges not at distance 1 under the design's own encodings.
pub fn current_hd_cost(stg: &Stg, include_self_edges: bool) -> usize {
    let codes: Vec<u64> = stg.states.iter().map(|s| s.encoding.value()).collect();
    assignment_cost(stg, &codes, include_self_edges)
}

/// Hamming distance lookup for two named states of `stg`.
pub fn state_distance(stg: &Stg, a: &str, b: &str) -> Option<u32> {
    let ea = &stg.state(a)?.encoding;
    let eb = &stg.state(b)?.encoding;
    hamming_distance(ea, eb).ok()
}

#[doc(hidden)]
pub fn encoding_map(stg: &Stg) -> BTreeMap<String, Encoding> {
    stg.states.iter().map(|s| (s.name.clone(), s.encoding.clone())).collect()
}
