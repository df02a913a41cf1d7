//! Fault-injection feasibility: per bit `(bx ^ by) | (bx & bp)`, multiplied
//! over all bits. An overall 1 means a fault on the transition can land in
//! the protected state.

use serde::{Deserialize, Serialize};

use crate::encoding::Encoding;
use crate::stg::{unprotected_transitions, Stg};

use super::{Evidence, Locus, RuleError, RuleId, RuleViolation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitTriple {
    pub index: usize,
    pub bx: u8,
    pub by: u8,
    pub bp: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitFif {
    #[serde(flatten)]
    pub bits: BitTriple,
    pub fif: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FifResult {
    /// Index 0 is the most significant bit.
    pub per_bit: Vec<BitFif>,
    pub overall: u8,
    pub transition: Option<(String, String)>,
    pub protected_ref: Option<String>,
}

impl FifResult {
    pub fn per_bit_values(&self) -> Vec<u8> {
        self.per_bit.iter().map(|b| b.fif).collect()
    }
}

pub fn fif_metric(bx: &Encoding, by: &Encoding, bp: &Encoding) -> Result<FifResult, RuleError> {
    let w = bx.width();
    if by.width() != w || bp.width() != w {
        return Err(RuleError::WidthMismatch {
            bx: w,
            by: by.width(),
            bp: bp.width(),
        });
    }
    let per_bit: Vec<BitFif> = (0..w)
        .map(|i| {
            let (x, y, p) = (bx.bit(i), by.bit(i), bp.bit(i));
            BitFif {
                bits: BitTriple {
                    index: i,
                    bx: x as u8,
                    by: y as u8,
                    bp: p as u8,
                },
                fif: ((x ^ y) | (x & p)) as u8,
            }
        })
        .collect();
    let overall = per_bit.iter().map(|b| b.fif).product();
    Ok(FifResult {
        per_bit,
        overall,
        transition: None,
        protected_ref: None,
    })
}

/// One FIF result per (unprotected transition, protected state) pair.
pub fn fif_table(stg: &Stg, include_self_edges: bool) -> Result<Vec<FifResult>, RuleError> {
    let protected = stg.protected_states();
    if protected.is_empty() {
        return Err(RuleError::NoProtectedState);
    }
    let mut out = Vec::new();
    for t in unprotected_transitions(stg) {
        if t.is_self() && !include_self_edges {
            continue;
        }
        let bx = &stg.state(&t.from).expect("edge endpoint").encoding;
        let by = &stg.state(&t.to).expect("edge endpoint").encoding;
        for p in &protected {
            let mut r = fif_metric(bx, by, &p.encoding)?;
            r.transition = Some((t.from.clone(), t.to.clone()));
            r.protected_ref = Some(p.name.clone());
            out.push(r);
        }
    }
    Ok(out)
}

pub fn check_fif_rule(stg: &Stg, include_self_edges: bool) -> Result<Vec<RuleViolation>, RuleError> {
    let mut out = Vec::new();
    let spans: Vec<_> = unprotected_transitions(stg)
        .into_iter()
        .filter(|t| include_self_edges || !t.is_self())
        .map(|t| t.span)
        .collect();
    let protected_count = stg.protected_states().len();
    for (i, r) in fif_table(stg, include_self_edges)?.into_iter().enumerate() {
        if r.overall == 0 {
            continue;
        }
        let (from, to) = r.transition.clone().expect("set by fif_table");
        let p = r.protected_ref.clone().expect("set by fif_table");
        out.push(RuleViolation {
            rule: RuleId::FifNonzero,
            locus: Locus {
                states: vec![from.clone(), to.clone(), p.clone()],
                transition: Some((from.clone(), to.clone())),
                lines: Some(spans[i / protected_count]),
            },
            message: format!("{from} -> {to} has FIF 1 towards protected state {p}"),
            evidence: Evidence::Fif(r),
        });
    }
    Ok(out)
}
