use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::parse::{extract_delimited, parse_delimited_code, parse_fif_response, parse_policy_verdicts, FifCapture, PolicyVerdict};
use super::provider::{chat_complete, ChatRequest, Message, Provider, RetryPolicy};
use super::template::{render_prompt, template, Bindings, OutputKind, Placeholder, SELF_SCRUTINY_QUESTION};
use super::{GenerationParams, LlmError};
use crate::frontend::SourceText;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CaptureRule {
    /// Text between a marker pair.
    Delimited { name: String, open: String, close: String },
    /// Every line matching `pattern`, joined by newlines. If the pattern has
    /// a capture group, its first group is taken instead of the whole line.
    Lines { name: String, pattern: String },
}

impl CaptureRule {
    pub fn name(&self) -> &str {
        match self {
            CaptureRule::Delimited { name, .. } | CaptureRule::Lines { name, .. } => name,
        }
    }

    pub fn apply(&self, response: &str) -> Result<String, LlmError> {
        match self {
            CaptureRule::Delimited { open, close, .. } => extract_delimited(response, open, close),
            CaptureRule::Lines { name, pattern } => {
                let re = Regex::new(&format!("^(?:{pattern})")).map_err(|e| LlmError::Config(e.to_string()))?;
                let hits: Vec<&str> = response
                    .lines()
                    .filter_map(|l| {
                        let c = re.captures(l)?;
                        Some(c.get(1).unwrap_or_else(|| c.get(0).unwrap()).as_str())
                    })
                    .collect();
                if hits.is_empty() {
                    return Err(LlmError::Capture(format!("{name}: no line matches")));
                }
                Ok(hits.join("\n"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineStep {
    pub name: String,
    /// Template names, rendered in order and joined by blank lines.
    pub templates: Vec<String>,
    #[serde(default)]
    pub literals: BTreeMap<String, String>,
    #[serde(default)]
    pub captures: Vec<CaptureRule>,
    #[serde(default)]
    pub params: GenerationParams,
}

fn default_budget() -> usize {
    24_000
}
fn default_markers() -> (String, String) {
    ("[code:".to_string(), "]".to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub name: String,
    pub steps: Vec<PipelineStep>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub self_scrutiny: bool,
    /// Largest design payload, in characters, sent to a provider.
    #[serde(default = "default_budget")]
    pub char_budget: usize,
    /// Verdict count expected by policy-verdict steps; counted from the
    /// `policies` literal when unset.
    #[serde(default)]
    pub policy_count: Option<usize>,
    #[serde(default = "default_markers")]
    pub code_markers: (String, String),
    #[serde(default)]
    pub model: String,
}

/// Name of the step appended by self-scrutiny.
pub const REVIEW_STEP: &str = "review";

impl PipelineSpec {
    pub fn single(name: &str, step: PipelineStep) -> Self {
        PipelineSpec {
            name: name.to_string(),
            steps: vec![step],
            retry: RetryPolicy::default(),
            self_scrutiny: false,
            char_budget: default_budget(),
            policy_count: None,
            code_markers: default_markers(),
            model: String::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, LlmError> {
        let spec: PipelineSpec = toml::from_str(text).map_err(|e| LlmError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.steps.is_empty() {
            return Err(LlmError::Pipeline("pipeline has no steps".into()));
        }
        let mut seen: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for step in &self.steps {
            if step.name == REVIEW_STEP || step.name.contains('.') || step.name.is_empty() {
                return Err(LlmError::Pipeline(format!("invalid step name `{}`", step.name)));
            }
            if step.templates.is_empty() {
                return Err(LlmError::Pipeline(format!("step {} has no template", step.name)));
            }
            for t in &step.templates {
                let t = template(t)?;
                for p in t.placeholders() {
                    match &p {
                        Placeholder::Capture { step: s, name } => {
                            if !seen.get(s.as_str()).is_some_and(|names| names.contains(name.as_str())) {
                                return Err(LlmError::Pipeline(format!(
                                    "step {} uses {p} before it is captured",
                                    step.name
                                )));
                            }
                        }
                        Placeholder::Literal(k) if !step.literals.contains_key(k) && !t.defaults.contains_key(k) => {
                            return Err(LlmError::Unbound(p.to_string()));
                        }
                        _ => {}
                    }
                }
            }
            if seen.insert(&step.name, step.captures.iter().map(|c| c.name()).collect()).is_some() {
                return Err(LlmError::Pipeline(format!("duplicate step {}", step.name)));
            }
        }
        Ok(())
    }

    fn output_kind(&self, step: &PipelineStep) -> OutputKind {
        step.templates
            .last()
            .and_then(|t| template(t).ok())
            .map_or(OutputKind::FreeText, |t| t.expected_output)
    }

    fn policy_count_for(&self, step: &PipelineStep) -> usize {
        self.policy_count.unwrap_or_else(|| {
            let re = Regex::new(r"(?mi)^\s*policy\s*\d+").unwrap();
            step.literals.get("policies").map_or(0, |p| re.find_iter(p).count())
        })
    }
}

/// Prompt for step `k` given the captures of earlier steps.
pub fn render_step(
    spec: &PipelineSpec,
    k: usize,
    design: &SourceText,
    captures: &BTreeMap<String, String>,
) -> Result<String, LlmError> {
    let step = &spec.steps[k];
    let bindings = Bindings {
        design: Some(design.content.clone()),
        captures: captures.clone(),
        literals: step.literals.clone(),
    };
    let parts = step
        .templates
        .iter()
        .map(|t| render_prompt(template(t)?, &bindings))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.join("\n\n"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Artifact {
    Code(SourceText),
    Verdicts(Vec<PolicyVerdict>),
    Fif(Vec<FifCapture>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub name: String,
    pub prompt: String,
    /// Every raw response received, verbatim, oldest first.
    pub responses: Vec<String>,
    pub errors: Vec<String>,
    pub captures: BTreeMap<String, String>,
    pub attempts: u32,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TranscriptStatus {
    Completed,
    Failed { step: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema_version: u32,
    pub pipeline: String,
    pub design: String,
    pub provider: String,
    pub steps: Vec<StepRecord>,
    pub status: TranscriptStatus,
    pub artifact: Option<Artifact>,
}

impl Transcript {
    pub fn succeeded(&self) -> bool {
        self.status == TranscriptStatus::Completed
    }

    /// Captures of all steps keyed by "step.name".
    pub fn captures(&self) -> BTreeMap<String, String> {
        self.steps
            .iter()
            .flat_map(|s| s.captures.iter().map(move |(k, v)| (format!("{}.{k}", s.name), v.clone())))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

fn parse_artifact(spec: &PipelineSpec, step: &PipelineStep, response: &str) -> Result<Artifact, LlmError> {
    match spec.output_kind(step) {
        OutputKind::Code => parse_delimited_code(response, &spec.code_markers.0, &spec.code_markers.1).map(Artifact::Code),
        OutputKind::PolicyVerdicts => {
            parse_policy_verdicts(response, spec.policy_count_for(step)).map(Artifact::Verdicts)
        }
        OutputKind::Table => parse_fif_response(response).map(Artifact::Fif),
        OutputKind::FreeText => Ok(Artifact::Text(response.to_string())),
    }
}

struct Exchange {
    record: StepRecord,
    outcome: Result<Option<Artifact>, String>,
}

/// Sends `messages` until the response yields every capture (and the
/// artifact, for the final step) or the retry budget runs out.
fn exchange(
    spec: &PipelineSpec,
    provider: &dyn Provider,
    name: &str,
    prompt: String,
    messages: Vec<Message>,
    captures: &[CaptureRule],
    params: &GenerationParams,
    artifact_of: Option<&PipelineStep>,
) -> Exchange {
    let started = Instant::now();
    let request = ChatRequest::new(&spec.model, messages, params);
    let mut record = StepRecord {
        name: name.to_string(),
        prompt,
        responses: Vec::new(),
        errors: Vec::new(),
        captures: BTreeMap::new(),
        attempts: 0,
        elapsed_ms: 0,
    };
    let max = spec.retry.max_attempts.max(1);
    let mut tries = 0;
    let outcome = loop {
        tries += 1;
        let remaining = RetryPolicy {
            max_attempts: max.saturating_sub(record.attempts).max(1),
            ..spec.retry.clone()
        };
        match chat_complete(provider, name, &request, &remaining) {
            Err((e, n)) => {
                record.attempts += n;
                record.errors.push(e.to_string());
                break Err(e.to_string());
            }
            Ok((response, n)) => {
                record.attempts += n;
                record.responses.push(response.clone());
                let parsed = captures
                    .iter()
                    .map(|c| c.apply(&response).map(|v| (c.name().to_string(), v)))
                    .collect::<Result<BTreeMap<_, _>, _>>()
                    .and_then(|caps| {
                        let art = artifact_of.map(|s| parse_artifact(spec, s, &response)).transpose()?;
                        Ok((caps, art))
                    });
                match parsed {
                    Ok((caps, art)) => {
                        record.captures = caps;
                        break Ok(art);
                    }
                    Err(e) => {
                        record.errors.push(e.to_string());
                        if record.attempts >= max || tries >= max {
                            break Err(format!("malformed response: {e}"));
                        }
                    }
                }
            }
        }
    };
    record.elapsed_ms = started.elapsed().as_millis() as u64;
    Exchange { record, outcome }
}

pub fn check_budget(spec: &PipelineSpec, design: &SourceText) -> Result<(), LlmError> {
    let len = design.content.chars().count();
    if len > spec.char_budget {
        return Err(LlmError::Budget {
            len,
            budget: spec.char_budget,
        });
    }
    Ok(())
}

pub fn run_pipeline(spec: &PipelineSpec, design: &SourceText, provider: &dyn Provider) -> Result<Transcript, LlmError> {
    spec.validate()?;
    check_budget(spec, design)?;
    let mut transcript = Transcript {
        schema_version: crate::SCHEMA_VERSION,
        pipeline: spec.name.clone(),
        design: design.origin.clone(),
        provider: provider.id(),
        steps: Vec::new(),
        status: TranscriptStatus::Completed,
        artifact: None,
    };
    let mut captures: BTreeMap<String, String> = BTreeMap::new();
    let last = spec.steps.len() - 1;
    for (k, step) in spec.steps.iter().enumerate() {
        let prompt = render_step(spec, k, design, &captures)?;
        let ex = exchange(
            spec,
            provider,
            &step.name,
            prompt.clone(),
            vec![Message::user(prompt)],
            &step.captures,
            &step.params,
            (k == last).then_some(step),
        );
        for (n, v) in &ex.record.captures {
            captures.insert(format!("{}.{n}", step.name), v.clone());
        }
        transcript.steps.push(ex.record);
        match ex.outcome {
            Ok(art) => transcript.artifact = art.or(transcript.artifact.take()),
            Err(reason) => {
                transcript.status = TranscriptStatus::Failed {
                    step: step.name.clone(),
                    reason,
                };
                transcript.artifact = None;
                return Ok(transcript);
            }
        }
    }
    if spec.self_scrutiny {
        let prev = transcript.steps.last().expect("at least one step");
        let step = &spec.steps[last];
        let messages = vec![
            Message::user(prev.prompt.clone()),
            Message::assistant(prev.responses.last().cloned().unwrap_or_default()),
            Message::user(SELF_SCRUTINY_QUESTION),
        ];
        let mut ex = exchange(
            spec,
            provider,
            REVIEW_STEP,
            SELF_SCRUTINY_QUESTION.to_string(),
            messages,
            &[],
            &step.params,
            None,
        );
        if let (Ok(_), Some(resp)) = (&ex.outcome, ex.record.responses.last()) {
            // a review that restates the artifact in the expected format supersedes it
            if let Ok(art) = parse_artifact(spec, step, resp) {
                if !matches!(art, Artifact::Text(_)) {
                    transcript.artifact = Some(art);
                }
            }
        }
        if let Err(reason) = std::mem::replace(&mut ex.outcome, Ok(None)) {
            transcript.status = TranscriptStatus::Failed {
                step: REVIEW_STEP.to_string(),
                reason,
            };
            transcript.artifact = None;
        }
        transcript.steps.push(ex.record);
    }
    Ok(transcript)
}
