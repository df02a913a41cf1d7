//! Experiment metrics in the insertion/detection/mitigation table layout.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{verify_insertion, verify_mitigation, CorpusRecord};
use crate::frontend::SourceText;
use crate::inject::VulnClass;
use crate::llm::{Artifact, Transcript};
use crate::rules::{run_all_checks, RuleConfig, RuleId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("empty experiment")]
    EmptyExperiment,
    #[error("outcomes mix tasks {0} and {1}")]
    MixedTasks(Task, Task),
    #[error("transcript for {0} has no corpus record")]
    UnknownDesign(String),
    #[error("insertion scoring needs a vulnerability class")]
    MissingClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Insertion,
    Detection,
    Mitigation,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Insertion => "insertion",
            Task::Detection => "detection",
            Task::Mitigation => "mitigation",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "insertion" => Ok(Task::Insertion),
            "detection" => Ok(Task::Detection),
            "mitigation" => Ok(Task::Mitigation),
            _ => Err(format!("unknown task {s}")),
        }
    }
}

/// A percentage held in hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(from = "f64")]
pub struct Percent(pub u64);

impl From<f64> for Percent {
    fn from(v: f64) -> Self {
        Percent((v * 100.0).round() as u64)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0 as f64 / 100.0)
    }
}

impl std::fmt::Display for Percent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

/// `100 * successes / inputs`, rounded half-up to two decimals.
pub fn rate(successes: u64, inputs: u64) -> Result<Percent, ReportError> {
    if inputs == 0 {
        return Err(ReportError::EmptyExperiment);
    }
    Ok(Percent((successes * 20_000 + inputs) / (2 * inputs)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub task: Task,
    pub class: String,
    pub success: bool,
    #[serde(default)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub class: String,
    pub inputs: u64,
    pub successes: u64,
    pub rate: Percent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub temperature: f64,
    pub inputs: u64,
    pub successes: u64,
    pub rate: Percent,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub provider: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub task: Task,
    pub rows: Vec<Row>,
    pub total: Row,
    pub sweep: Option<Vec<SweepRow>>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let (col, verb) = match self.task {
            Task::Detection => ("# Accurate Detection", "Accuracy (%)"),
            Task::Insertion => ("# Successful Insertion", "Success Rate (%)"),
            Task::Mitigation => ("# Successful Mitigation", "Success Rate (%)"),
        };
        let mut s = format!("{:<24} {:>8} {:>24} {:>18}\n", "Class", "# Inputs", col, verb);
        for r in self.rows.iter().chain(std::iter::once(&self.total)) {
            s.push_str(&format!("{:<24} {:>8} {:>24} {:>18}\n", r.class, r.inputs, r.successes, r.rate.to_string()));
        }
        if let Some(sw) = &self.sweep {
            s.push_str("\nTemperature  Rate (%)\n");
            for p in sw {
                s.push_str(&format!("{:<12.1} {}\n", p.temperature, p.rate));
            }
        }
        s
    }
}

/// Hex SHA-256 of a configuration text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-class aggregation; a sweep series appears when any outcome carries
/// a temperature.
pub fn compute_metrics(records: &[Outcome]) -> Result<ExperimentReport, ReportError> {
    let first = records.first().ok_or(ReportError::EmptyExperiment)?;
    if let Some(o) = records.iter().find(|o| o.task != first.task) {
        return Err(ReportError::MixedTasks(first.task, o.task));
    }
    let mut by_class: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    // temperatures keyed in thousandths so equal grid points group exactly
    let mut by_temp: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    for o in records {
        let e = by_class.entry(&o.class).or_default();
        e.0 += 1;
        e.1 += o.success as u64;
        if let Some(t) = o.temperature {
            let e = by_temp.entry((t * 1000.0).round() as i64).or_default();
            e.0 += 1;
            e.1 += o.success as u64;
        }
    }
    let rows = by_class
        .into_iter()
        .map(|(c, (n, s))| {
            Ok(Row {
                class: c.to_string(),
                inputs: n,
                successes: s,
                rate: rate(s, n)?,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    let n = records.len() as u64;
    let s = records.iter().filter(|o| o.success).count() as u64;
    let sweep = (!by_temp.is_empty())
        .then(|| {
            by_temp
                .into_iter()
                .map(|(t, (n, s))| {
                    Ok(SweepRow {
                        temperature: t as f64 / 1000.0,
                        inputs: n,
                        successes: s,
                        rate: rate(s, n)?,
                    })
                })
                .collect::<Result<Vec<_>, ReportError>>()
        })
        .transpose()?;
    Ok(ExperimentReport {
        schema_version: crate::SCHEMA_VERSION,
        task: first.task,
        rows,
        total: Row {
            class: "TOTAL".into(),
            inputs: n,
            successes: s,
            rate: rate(s, n)?,
        },
        sweep,
        provenance: Provenance::default(),
    })
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    /// Corpus record id or design origin.
    pub design: String,
    pub temperature: Option<f64>,
    pub transcript: Transcript,
}

fn class_of(r: &CorpusRecord) -> String {
    r.vuln.map_or_else(|| "CLEAN".to_string(), |v| v.as_str().to_string())
}

fn predicts_violation(t: &Transcript) -> Option<bool> {
    match t.artifact.as_ref()? {
        Artifact::Verdicts(v) => Some(v.iter().any(|x| x.violated)),
        Artifact::Fif(rows) => Some(rows.iter().any(|r| r.overall == 1)),
        Artifact::Code(_) | Artifact::Text(_) => None,
    }
}

/// Outcomes for transcripts against corpus labels.
///
/// Detection: accurate when the artifact predicts a violation exactly for
/// labeled records. Insertion: the returned code passes the insertion
/// check for `class` against the record source. Mitigation: the returned
/// code clears the record's labels without new violations. Failed
/// transcripts count as unsuccessful.
pub fn score_transcripts(
    task: Task,
    class: Option<VulnClass>,
    lines: &[TranscriptLine],
    corpus: &[CorpusRecord],
    rules: &RuleConfig,
) -> Result<Vec<Outcome>, ReportError> {
    let index: BTreeMap<&str, &CorpusRecord> = corpus.iter().map(|r| (r.id.as_str(), r)).collect();
    if task == Task::Insertion && class.is_none() {
        return Err(ReportError::MissingClass);
    }
    lines
        .iter()
        .map(|l| {
            let rec = index
                .get(l.design.as_str())
                .ok_or_else(|| ReportError::UnknownDesign(l.design.clone()))?;
            let protected: BTreeSet<String> = rec.protected.iter().cloned().collect();
            let original = SourceText::new(rec.source.clone(), rec.id.clone());
            let code = match &l.transcript.artifact {
                Some(Artifact::Code(c)) if l.transcript.succeeded() => Some(c),
                _ => None,
            };
            let (cls, success) = match task {
                Task::Detection => {
                    let truth = !rec.labels.is_empty();
                    let ok = l.transcript.succeeded() && predicts_violation(&l.transcript) == Some(truth);
                    (class_of(rec), ok)
                }
                Task::Insertion => {
                    let c = class.expect("checked above");
                    let ok = code.is_some_and(|m| verify_insertion(&original, m, c, &protected, rules).overall);
                    (c.as_str().to_string(), ok)
                }
                Task::Mitigation => {
                    let targets: BTreeSet<RuleId> = rec.labels.iter().copied().collect();
                    let ok = code.is_some_and(|m| verify_mitigation(&original, m, &targets, &protected, rules).overall);
                    (class_of(rec), ok)
                }
            };
            Ok(Outcome {
                task,
                class: cls,
                success,
                temperature: l.temperature,
            })
        })
        .collect()
}

/// Outcomes of the built-in checker or mitigator on every corpus record.
pub fn score_static(task: Task, corpus: &[CorpusRecord], rules: &RuleConfig) -> Vec<Outcome> {
    corpus
        .iter()
        .filter(|r| task == Task::Detection || r.vuln.is_some())
        .map(|r| {
            let protected: BTreeSet<String> = r.protected.iter().cloned().collect();
            let src = SourceText::new(r.source.clone(), r.id.clone());
            let report = run_all_checks(&src, &protected, rules);
            let success = match task {
                Task::Detection => report.rule_ids().into_iter().collect::<Vec<_>>() == r.labels,
                Task::Insertion => r.labels.iter().all(|l| report.count(*l) > 0),
                Task::Mitigation => {
                    let out = crate::mitigate::mitigate(&src, &report, &Default::default());
                    let targets: BTreeSet<RuleId> = r.labels.iter().copied().collect();
                    verify_mitigation(&src, &out.design, &targets, &protected, rules).overall
                }
            };
            Outcome {
                task,
                class: class_of(r),
                success,
                temperature: None,
            }
        })
        .collect()
}
