//! Labeled corpora, fidelity verdicts and identifier sanitization.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frontend::{self, emit_verilog, tokenize_lossless, FsmAst, SourceText, TokenKind};
use crate::inject::{InjectionPlan, Injector, VulnClass};
use crate::rules::{check_ast, RuleConfig, RuleId, RuleViolation};
use crate::stg::{extract_stg, stg_isomorphic_modulo_encoding};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("no base design accepts a {0} injection")]
    Unsatisfiable(VulnClass),
    #[error("base {0} does not parse")]
    BaseParse(String),
    #[error("base {id} already violates {rules}")]
    BaseNotClean { id: String, rules: String },
    #[error("no base designs given")]
    NoBases,
    #[error("keyword list is empty")]
    NoKeywords,
    #[error("sanitized design no longer parses: {0}")]
    Sanitize(String),
    #[error("line {line}: {msg}")]
    Jsonl { line: usize, msg: String },
    #[error("schema version {0} is not supported")]
    Schema(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusBase {
    pub id: String,
    pub source: SourceText,
    #[serde(default)]
    pub protected: BTreeSet<String>,
}

impl CorpusBase {
    pub fn new(id: impl Into<String>, source: SourceText) -> Self {
        CorpusBase {
            id: id.into(),
            source,
            protected: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub schema_version: u32,
    pub id: String,
    pub base_id: String,
    pub source: String,
    pub vuln: Option<VulnClass>,
    pub plan: Option<InjectionPlan>,
    pub protected: Vec<String>,
    pub seed: u64,
    pub labels: Vec<RuleId>,
}

/// Clean records emitted per buggy record, as `clean:buggy`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusOptions {
    pub clean: u32,
    pub buggy: u32,
    pub rules: RuleConfig,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            clean: 1,
            buggy: 1,
            rules: RuleConfig::default(),
        }
    }
}

impl CorpusOptions {
    pub fn buggy_only() -> Self {
        CorpusOptions {
            clean: 0,
            ..Default::default()
        }
    }
}

/// Seed for item `index` of stream `tag`, independent of generation order.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

struct PreparedBase<'a> {
    base: &'a CorpusBase,
    ast: FsmAst,
    protected: BTreeSet<String>,
}

/// Buggy records only; see [`generate_corpus_with`].
pub fn generate_corpus(
    bases: &[CorpusBase],
    mix: &BTreeMap<VulnClass, usize>,
    master_seed: u64,
) -> Result<Vec<CorpusRecord>, CorpusError> {
    generate_corpus_with(bases, mix, master_seed, &CorpusOptions::buggy_only())
}

/// Injects `mix[c]` instances of each class, round-robin over `bases`, and
/// interleaves clean copies of the bases at the configured ratio. Every
/// buggy record passes [`verify_insertion`] before it is emitted.
pub fn generate_corpus_with(
    bases: &[CorpusBase],
    mix: &BTreeMap<VulnClass, usize>,
    master_seed: u64,
    options: &CorpusOptions,
) -> Result<Vec<CorpusRecord>, CorpusError> {
    if mix.values().all(|n| *n == 0) {
        return Ok(Vec::new());
    }
    if bases.is_empty() {
        return Err(CorpusError::NoBases);
    }
    let prepared = bases
        .iter()
        .map(|b| {
            let ast = frontend::parse(&b.source).map_err(|_| CorpusError::BaseParse(b.id.clone()))?;
            let mut protected = b.protected.clone();
            protected.extend(ast.protected_annotations.iter().cloned());
            let r = check_ast(&ast, &protected, &options.rules, &b.id);
            if !r.violations.is_empty() {
                let rules: Vec<&str> = r.rule_ids().iter().map(|r| r.as_str()).collect();
                return Err(CorpusError::BaseNotClean {
                    id: b.id.clone(),
                    rules: rules.join(", "),
                });
            }
            Ok(PreparedBase { base: b, ast, protected })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(VulnClass, usize)> = mix.iter().flat_map(|(c, n)| (0..*n).map(move |i| (*c, i))).collect();
    let buggy: Vec<CorpusRecord> = jobs
        .par_iter()
        .map(|&(class, i)| {
            let seed = derive_seed(master_seed, class.as_str(), i as u64);
            for k in 0..prepared.len() {
                let p = &prepared[(i + k) % prepared.len()];
                let injector = Injector {
                    protected: p.protected.clone(),
                    config: options.rules.clone(),
                };
                let Ok((ast, plan)) = injector.plan_injection(class, &p.ast, seed) else { continue };
                let text = emit_verilog(&ast);
                let verdict = verify_insertion(&p.base.source, &text, class, &p.protected, &options.rules);
                if !verdict.overall {
                    continue;
                }
                return Ok(CorpusRecord {
                    schema_version: crate::SCHEMA_VERSION,
                    id: format!("{}-{}-{i:05}", p.base.id, class.as_str().to_ascii_lowercase()),
                    base_id: p.base.id.clone(),
                    source: text.content,
                    vuln: Some(class),
                    plan: Some(plan),
                    protected: p.protected.iter().cloned().collect(),
                    seed,
                    labels: vec![class.rule()],
                });
            }
            Err(CorpusError::Unsatisfiable(class))
        })
        .collect::<Result<_, _>>()?;

    let mut out = Vec::new();
    let mut clean_emitted = 0usize;
    for (j, rec) in buggy.into_iter().enumerate() {
        out.push(rec);
        if options.buggy == 0 {
            continue;
        }
        let due = (j + 1) * options.clean as usize / options.buggy as usize;
        while clean_emitted < due {
            let p = &prepared[clean_emitted % prepared.len()];
            out.push(CorpusRecord {
                schema_version: crate::SCHEMA_VERSION,
                id: format!("{}-clean-{clean_emitted:05}", p.base.id),
                base_id: p.base.id.clone(),
                source: p.base.source.content.clone(),
                vuln: None,
                plan: None,
                protected: p.protected.iter().cloned().collect(),
                seed: derive_seed(master_seed, "clean", clean_emitted as u64),
                labels: Vec::new(),
            });
            clean_emitted += 1;
        }
    }
    Ok(out)
}

pub fn to_jsonl(records: &[CorpusRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

pub fn from_jsonl(text: &str) -> Result<Vec<CorpusRecord>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let r: CorpusRecord = serde_json::from_str(l).map_err(|e| CorpusError::Jsonl {
                line: n + 1,
                msg: e.to_string(),
            })?;
            if r.schema_version != crate::SCHEMA_VERSION {
                return Err(CorpusError::Schema(r.schema_version));
            }
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FidelityVerdict {
    pub syntax_ok: bool,
    /// Insertion: the intended vulnerability is newly present.
    /// Mitigation: every target rule is cleared.
    pub intended_present: bool,
    /// Violations absent from the original design.
    pub unintended: Vec<RuleViolation>,
    pub interface_ok: bool,
    pub stg_ok: Option<bool>,
    pub overall: bool,
    /// Violations carried over from the original design.
    pub residual: Vec<RuleViolation>,
}

impl FidelityVerdict {
    fn syntax_failure() -> Self {
        FidelityVerdict {
            syntax_ok: false,
            intended_present: false,
            unintended: Vec::new(),
            interface_ok: false,
            stg_ok: None,
            overall: false,
            residual: Vec::new(),
        }
    }
}

/// Module name, ports, clock and reset match.
pub fn same_interface(a: &FsmAst, b: &FsmAst) -> bool {
    let (ra, rb) = (&a.seq().reset, &b.seq().reset);
    a.module_name == b.module_name && a.ports() == b.ports() && ra.clock == rb.clock && ra.reset_signal == rb.reset_signal
}

struct Compared {
    ast_a: FsmAst,
    ast_b: FsmAst,
    new: Vec<RuleViolation>,
    old: Vec<RuleViolation>,
    before: crate::rules::CheckReport,
    after: crate::rules::CheckReport,
}

fn compare(
    original: &SourceText,
    modified: &SourceText,
    protected: &BTreeSet<String>,
    config: &RuleConfig,
) -> Option<Compared> {
    let ast_a = frontend::parse(original).ok()?;
    let ast_b = frontend::parse(modified).ok()?;
    let before = check_ast(&ast_a, protected, config, &original.origin);
    let after = check_ast(&ast_b, protected, config, &modified.origin);
    let keys = before.keys();
    let (old, new): (Vec<_>, Vec<_>) = after.violations.iter().cloned().partition(|v| keys.contains(&v.key()));
    Some(Compared {
        ast_a,
        ast_b,
        new,
        old,
        before,
        after,
    })
}

pub fn verify_insertion(
    original: &SourceText,
    modified: &SourceText,
    intended: VulnClass,
    protected: &BTreeSet<String>,
    config: &RuleConfig,
) -> FidelityVerdict {
    let Some(c) = compare(original, modified, protected, config) else {
        return FidelityVerdict::syntax_failure();
    };
    let rule = intended.rule();
    let intended_present = c.new.iter().any(|v| v.rule == rule);
    let unintended: Vec<RuleViolation> = c.new.into_iter().filter(|v| v.rule != rule).collect();
    let interface_ok = same_interface(&c.ast_a, &c.ast_b);
    let overall = intended_present && unintended.is_empty() && interface_ok;
    FidelityVerdict {
        syntax_ok: true,
        intended_present,
        unintended,
        interface_ok,
        stg_ok: None,
        overall,
        residual: c.old,
    }
}

pub fn verify_mitigation(
    original: &SourceText,
    mitigated: &SourceText,
    target_rules: &BTreeSet<RuleId>,
    protected: &BTreeSet<String>,
    config: &RuleConfig,
) -> FidelityVerdict {
    let Some(c) = compare(original, mitigated, protected, config) else {
        return FidelityVerdict::syntax_failure();
    };
    let intended_present = target_rules.iter().all(|r| c.after.count(*r) == 0);
    let interface_ok = same_interface(&c.ast_a, &c.ast_b);
    let stg_ok = match (
        extract_stg(&c.ast_a, &c.before.protected.iter().cloned().collect()),
        extract_stg(&c.ast_b, &c.after.protected.iter().cloned().collect()),
    ) {
        (Ok(a), Ok(b)) => Some(stg_isomorphic_modulo_encoding(&a, &b)),
        _ => None,
    };
    let overall = intended_present && c.new.is_empty() && interface_ok;
    FidelityVerdict {
        syntax_ok: true,
        intended_present,
        unintended: c.new,
        interface_ok,
        stg_ok,
        overall,
        residual: c.old,
    }
}

pub const DEFAULT_KEYWORDS: &[&str] = &["trojan", "trigger", "malicious", "backdoor"];

/// Old name to new name.
pub type RenameMap = BTreeMap<String, String>;

fn contains_keyword(word: &str, keywords: &[String]) -> bool {
    let w = word.to_ascii_lowercase();
    keywords.iter().any(|k| w.contains(k.as_str()))
}

fn scrub_comment(text: &str, keywords: &[String], map: &RenameMap) -> String {
    let (open, body, close) = if let Some(b) = text.strip_prefix("//") {
        ("//", b, "")
    } else if let Some(b) = text.strip_prefix("/*").and_then(|b| b.strip_suffix("*/")) {
        ("/*", b, "*/")
    } else {
        ("", text, "")
    };
    let words: Vec<String> = body
        .split_whitespace()
        .filter_map(|w| {
            let core = w.trim_matches(|c: char| !c.is_ascii_alphanumeric() && c != '_');
            if let Some(n) = map.get(core) {
                Some(w.replace(core, n))
            } else if contains_keyword(w, keywords) {
                None
            } else {
                Some(w.to_string())
            }
        })
        .collect();
    match (words.is_empty(), close.is_empty()) {
        (true, true) => open.to_string(),
        (true, false) => format!("{open} {close}"),
        (false, true) => format!("{open} {}", words.join(" ")),
        (false, false) => format!("{open} {} {close}", words.join(" ")),
    }
}

/// Renames identifiers containing any keyword (case-insensitive) to neutral
/// names and drops keyword-bearing words from comments. The module becomes
/// `u0`; other names become `sig1`, `sig2`, .. in a seeded order. A neutral
/// name that already exists gets a `_k` suffix.
pub fn sanitize_identifiers(ast: &FsmAst, keywords: &[&str], seed: u64) -> Result<(FsmAst, RenameMap), CorpusError> {
    if keywords.is_empty() {
        return Err(CorpusError::NoKeywords);
    }
    let keywords: Vec<String> = keywords.iter().map(|k| k.to_ascii_lowercase()).collect();
    let text = emit_verilog(ast);
    let (tokens, _) = tokenize_lossless(&text);
    let existing: BTreeSet<String> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .map(|t| t.text.clone())
        .collect();
    let mut hits: Vec<String> = existing
        .iter()
        .filter(|n| **n != ast.module_name && contains_keyword(n, &keywords))
        .cloned()
        .collect();
    hits.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut taken = existing.clone();
    let mut fresh = |base: String| {
        let mut name = base.clone();
        let mut k = 1;
        while taken.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        taken.insert(name.clone());
        name
    };
    let mut map = RenameMap::new();
    if contains_keyword(&ast.module_name, &keywords) {
        map.insert(ast.module_name.clone(), fresh("u0".to_string()));
    }
    for (i, h) in hits.into_iter().enumerate() {
        let n = fresh(format!("sig{}", i + 1));
        map.insert(h, n);
    }
    let has_keyword_comment = tokens
        .iter()
        .any(|t| t.kind == TokenKind::Comment && contains_keyword(&t.text, &keywords));
    if map.is_empty() && !has_keyword_comment {
        return Ok((ast.clone(), map));
    }
    let mut out = String::with_capacity(text.content.len());
    for t in &tokens {
        match t.kind {
            TokenKind::Ident => out.push_str(map.get(&t.text).unwrap_or(&t.text)),
            TokenKind::Comment => out.push_str(&scrub_comment(&t.text, &keywords, &map)),
            _ => out.push_str(&t.text),
        }
    }
    let src = SourceText::new(out, text.origin);
    let sanitized = frontend::parse(&src).map_err(|d| {
        CorpusError::Sanitize(d.first().map(|x| x.to_string()).unwrap_or_default())
    })?;
    Ok((sanitized, map))
}
