//! Structural graph rules: static deadlock, trap loops, unreachable states.

use std::collections::BTreeSet;

use crate::stg::{reachable_states, Stg};

use super::{Evidence, Locus, RuleId, RuleViolation};

/// Strongly connected components in Tarjan's order (reverse topological).
pub fn tarjan_scc(succ: &[Vec<usize>], include: &[bool]) -> Vec<Vec<usize>> {
    struct T<'a> {
        succ: &'a [Vec<usize>],
        include: &'a [bool],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    impl T<'_> {
        fn visit(&mut self, v: usize) {
            self.index[v] = Some(self.next);
            self.low[v] = self.next;
            self.next += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            for &w in &self.succ[v] {
                if !self.include[w] {
                    continue;
                }
                match self.index[w] {
                    None => {
                        self.visit(w);
                        self.low[v] = self.low[v].min(self.low[w]);
                    }
                    Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                    _ => {}
                }
            }
            if Some(self.low[v]) == self.index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = self.stack.pop().expect("tarjan stack");
                    self.on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                self.out.push(comp);
            }
        }
    }
    let n = succ.len();
    let mut t = T {
        succ,
        include,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if include[v] && t.index[v].is_none() {
            t.visit(v);
        }
    }
    t.out
}

fn reachable_mask(stg: &Stg) -> Vec<bool> {
    let r = reachable_states(stg);
    stg.states.iter().map(|s| r.contains(&s.name)).collect()
}

fn predecessors(stg: &Stg, succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut pred = vec![Vec::new(); stg.states.len()];
    for (a, outs) in succ.iter().enumerate() {
        for &b in outs {
            pred[b].push(a);
        }
    }
    pred
}

fn state_lines(stg: &Stg, i: usize) -> crate::diag::LineRange {
    let name = &stg.states[i].name;
    stg.transitions
        .iter()
        .filter(|t| &t.from == name)
        .map(|t| t.span)
        .reduce(crate::diag::LineRange::union)
        .unwrap_or(stg.states[i].declared_span)
}

pub fn detect_static_deadlock(stg: &Stg) -> Vec<RuleViolation> {
    let succ = stg.successors();
    let pred = predecessors(stg, &succ);
    let reach = reachable_mask(stg);
    let mut out = Vec::new();
    for i in 0..stg.states.len() {
        if !reach[i] || succ[i].iter().any(|&j| j != i) {
            continue;
        }
        let entered_from: Vec<String> = pred[i]
            .iter()
            .filter(|&&j| j != i && reach[j])
            .map(|&j| stg.states[j].name.clone())
            .collect();
        if entered_from.is_empty() {
            continue;
        }
        let name = stg.states[i].name.clone();
        out.push(RuleViolation {
            rule: RuleId::StaticDeadlock,
            locus: Locus {
                states: vec![name.clone()],
                transition: None,
                lines: Some(state_lines(stg, i)),
            },
            message: format!(
                "{name} is entered from {} but never leaves",
                entered_from.join(", ")
            ),
            evidence: Evidence::Deadlock { entered_from },
        });
    }
    out
}

pub fn detect_trap_loops(stg: &Stg) -> Vec<RuleViolation> {
    let succ = stg.successors();
    let pred = predecessors(stg, &succ);
    let reach = reachable_mask(stg);
    let reach_count = reach.iter().filter(|&&r| r).count();
    let mut out = Vec::new();
    let mut comps = tarjan_scc(&succ, &reach);
    comps.sort();
    for comp in comps {
        // single-state traps are deadlocks
        if comp.len() < 2 || comp.len() == reach_count {
            continue;
        }
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        let exits = comp.iter().any(|&v| succ[v].iter().any(|w| !members.contains(w)));
        if exits {
            continue;
        }
        let states: Vec<String> = comp.iter().map(|&v| stg.states[v].name.clone()).collect();
        let mut entered_from: Vec<String> = Vec::new();
        for &v in &comp {
            for &p in &pred[v] {
                let name = &stg.states[p].name;
                if !members.contains(&p) && reach[p] && !entered_from.contains(name) {
                    entered_from.push(name.clone());
                }
            }
        }
        let lines = comp
            .iter()
            .map(|&v| state_lines(stg, v))
            .reduce(crate::diag::LineRange::union);
        out.push(RuleViolation {
            rule: RuleId::TrapLoopCwe835,
            locus: Locus {
                states: states.clone(),
                transition: None,
                lines,
            },
            message: format!("states {} form a loop with no exit", states.join(", ")),
            evidence: Evidence::Trap {
                states,
                entered_from,
            },
        });
    }
    out
}

pub fn detect_unreachable_states(stg: &Stg) -> Vec<RuleViolation> {
    let reach = reachable_mask(stg);
    let succ = stg.successors();
    let mut out = Vec::new();
    for (i, s) in stg.states.iter().enumerate() {
        if reach[i] || s.name == stg.reset_state {
            continue;
        }
        let exits: Vec<String> = succ[i]
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| stg.states[j].name.clone())
            .collect();
        let has_outgoing = !exits.is_empty();
        let message = if has_outgoing {
            format!(
                "{} has no transition into it from a reachable state but exits to {}",
                s.name,
                exits.join(", ")
            )
        } else {
            format!("{} is isolated: never entered and never left", s.name)
        };
        out.push(RuleViolation {
            rule: RuleId::UnreachableState,
            locus: Locus {
                states: vec![s.name.clone()],
                transition: None,
                lines: Some(s.declared_span),
            },
            message,
            evidence: Evidence::Unreachable {
                has_outgoing,
                exits,
            },
        });
    }
    out
}
