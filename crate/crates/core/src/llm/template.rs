use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Code,
    Table,
    PolicyVerdicts,
    FreeText,
}

fn default_open() -> String {
    "<".to_string()
}
fn default_close() -> String {
    ">".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub expected_output: OutputKind,
    /// Markers wrapped around the design payload.
    #[serde(default = "default_open")]
    pub open: String,
    #[serde(default = "default_close")]
    pub close: String,
    /// Fallback values for `{{literal:..}}` placeholders.
    #[serde(default)]
    pub defaults: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placeholder {
    Design,
    Capture { step: String, name: String },
    Literal(String),
}

impl std::fmt::Display for Placeholder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Placeholder::Design => f.write_str("{{design}}"),
            Placeholder::Capture { step, name } => write!(f, "{{{{capture:{step}.{name}}}}}"),
            Placeholder::Literal(k) => write!(f, "{{{{literal:{k}}}}}"),
        }
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{\s*(design|capture:([A-Za-z0-9_\-]+)\.([A-Za-z0-9_\-]+)|literal:([A-Za-z0-9_\-]+))\s*\}\}").unwrap())
}

fn classify(c: &regex::Captures<'_>) -> Placeholder {
    if let (Some(s), Some(n)) = (c.get(2), c.get(3)) {
        Placeholder::Capture {
            step: s.as_str().to_string(),
            name: n.as_str().to_string(),
        }
    } else if let Some(k) = c.get(4) {
        Placeholder::Literal(k.as_str().to_string())
    } else {
        Placeholder::Design
    }
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>, expected_output: OutputKind) -> Self {
        PromptTemplate {
            name: name.into(),
            body: body.into(),
            expected_output,
            open: default_open(),
            close: default_close(),
            defaults: BTreeMap::new(),
        }
    }

    pub fn placeholders(&self) -> Vec<Placeholder> {
        placeholder_re().captures_iter(&self.body).map(|c| classify(&c)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bindings {
    pub design: Option<String>,
    /// Keyed by "step.name".
    pub captures: BTreeMap<String, String>,
    pub literals: BTreeMap<String, String>,
}

impl Bindings {
    pub fn with_design(design: impl Into<String>) -> Self {
        Bindings {
            design: Some(design.into()),
            ..Default::default()
        }
    }

    pub fn literal(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.literals.insert(key.into(), value.into());
        self
    }

    pub fn capture(mut self, step: &str, name: &str, value: impl Into<String>) -> Self {
        self.captures.insert(format!("{step}.{name}"), value.into());
        self
    }
}

pub fn render_prompt(t: &PromptTemplate, bindings: &Bindings) -> Result<String, LlmError> {
    let mut out = String::with_capacity(t.body.len());
    let mut last = 0;
    for c in placeholder_re().captures_iter(&t.body) {
        let m = c.get(0).unwrap();
        out.push_str(&t.body[last..m.start()]);
        last = m.end();
        let p = classify(&c);
        let unbound = || LlmError::Unbound(p.to_string());
        match &p {
            Placeholder::Design => {
                let d = bindings.design.as_deref().ok_or_else(unbound)?;
                out.push_str(&t.open);
                out.push_str(d.trim_end());
                out.push_str(&t.close);
            }
            Placeholder::Capture { step, name } => {
                let v = bindings.captures.get(&format!("{step}.{name}")).ok_or_else(unbound)?;
                out.push_str(v);
            }
            Placeholder::Literal(k) => {
                let v = bindings.literals.get(k).or_else(|| t.defaults.get(k)).ok_or_else(unbound)?;
                out.push_str(v.trim_end_matches('\n'));
            }
        }
    }
    out.push_str(&t.body[last..]);
    Ok(out)
}

const SHIPPED: &[&str] = &[
    include_str!("../../templates/insert_task.toml"),
    include_str!("../../templates/insert_example.toml"),
    include_str!("../../templates/insert_constraints.toml"),
    include_str!("../../templates/insert_output.toml"),
    include_str!("../../templates/detect_blind.toml"),
    include_str!("../../templates/detect_policies.toml"),
    include_str!("../../templates/detect_context.toml"),
    include_str!("../../templates/fif_transitions.toml"),
    include_str!("../../templates/fif_bits.toml"),
    include_str!("../../templates/fif_compute.toml"),
    include_str!("../../templates/mitigate_rules.toml"),
];

/// Closing review question appended by self-scrutiny.
pub const SELF_SCRUTINY_QUESTION: &str =
    "Is there any issue regarding syntax, coding style, and synthesis? If yes, correct the problems";

pub fn parse_template(text: &str) -> Result<PromptTemplate, LlmError> {
    let mut t: PromptTemplate = toml::from_str(text).map_err(|e| LlmError::Config(e.to_string()))?;
    t.body = t.body.trim_end().to_string();
    Ok(t)
}

/// The shipped template library, keyed by name.
pub fn library() -> &'static BTreeMap<String, PromptTemplate> {
    static LIB: OnceLock<BTreeMap<String, PromptTemplate>> = OnceLock::new();
    LIB.get_or_init(|| {
        SHIPPED
            .iter()
            .map(|s| {
                let t = parse_template(s).expect("shipped template parses");
                (t.name.clone(), t)
            })
            .collect()
    })
}

pub fn template(name: &str) -> Result<&'static PromptTemplate, LlmError> {
    library().get(name).ok_or_else(|| LlmError::UnknownTemplate(name.to_string()))
}
