//! Encoding rules: Hamming distance, uniqueness, default handling.

use std::collections::BTreeSet;

use crate::encoding::Encoding;
use crate::frontend::FsmAst;
use crate::stg::{hamming_distance, unprotected_transitions, Stg};

use super::{Evidence, Locus, RuleId, RuleViolation};

/// Unused codes listed in evidence are capped; the count is always exact.
pub const MAX_LISTED_UNUSED: usize = 64;

pub fn check_hd_rule(stg: &Stg, include_self_edges: bool) -> Vec<RuleViolation> {
    let mut out = Vec::new();
    for t in unprotected_transitions(stg) {
        if t.is_self() && !include_self_edges {
            continue;
        }
        let a = &stg.state(&t.from).expect("edge endpoint").encoding;
        let b = &stg.state(&t.to).expect("edge endpoint").encoding;
        let Ok(hd) = hamming_distance(a, b) else {
            continue;
        };
        if hd == 1 {
            continue;
        }
        out.push(RuleViolation {
            rule: RuleId::HdNotOne,
            locus: Locus {
                states: vec![t.from.clone(), t.to.clone()],
                transition: Some((t.from.clone(), t.to.clone())),
                lines: Some(t.span),
            },
            message: format!(
                "{} ({a}) -> {} ({b}) has Hamming distance {hd}",
                t.from, t.to
            ),
            evidence: Evidence::HammingDistance { value: hd },
        });
    }
    out
}

pub fn detect_duplicate_encodings(stg: &Stg) -> Vec<RuleViolation> {
    let mut out = Vec::new();
    for (i, a) in stg.states.iter().enumerate() {
        for b in &stg.states[i + 1..] {
            if a.encoding != b.encoding {
                continue;
            }
            out.push(RuleViolation {
                rule: RuleId::DuplicateEncoding,
                locus: Locus {
                    states: vec![a.name.clone(), b.name.clone()],
                    transition: None,
                    lines: Some(b.declared_span),
                },
                message: format!("{} and {} are both encoded {}", a.name, b.name, a.encoding),
                evidence: Evidence::DuplicateEncoding {
                    encoding: a.encoding.clone(),
                    states: (a.name.clone(), b.name.clone()),
                },
            });
        }
    }
    out
}

/// Codes of `width` bits not used by any state, ascending, with the total count.
pub fn unused_encodings(stg: &Stg, limit: usize) -> (Vec<Encoding>, u64) {
    let used: BTreeSet<u64> = stg.states.iter().map(|s| s.encoding.value()).collect();
    let total = 1u64 << stg.width;
    let count = total - used.len() as u64;
    let listed = (0..total)
        .filter(|v| !used.contains(v))
        .take(limit)
        .map(|v| Encoding::from_value(v, stg.width).expect("fits width"))
        .collect();
    (listed, count)
}

pub fn check_default_handling(ast: &FsmAst, stg: &Stg) -> Vec<RuleViolation> {
    if ast.case().default_arm().is_some() {
        return Vec::new();
    }
    let (unused, unused_count) = unused_encodings(stg, MAX_LISTED_UNUSED);
    if unused_count == 0 {
        return Vec::new();
    }
    let listed: Vec<String> = unused.iter().map(|e| e.to_string()).collect();
    vec![RuleViolation {
        rule: RuleId::MissingDefault,
        locus: Locus {
            states: Vec::new(),
            transition: None,
            lines: Some(ast.case().span.lines()),
        },
        message: format!(
            "unused encodings {} are not handled by a default arm",
            listed.join(", ")
        ),
        evidence: Evidence::MissingDefault {
            unused,
            unused_count,
        },
    }]
}
