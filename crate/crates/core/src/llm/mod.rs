//! Prompt templates, multi-step pipelines and chat-completion providers.

mod params;
pub mod parse;
pub mod pipeline;
pub mod provider;
mod shipped;
pub mod sweep;
pub mod template;

pub use params::{temperature_grid, GenerationParams};
pub use parse::{parse_delimited_code, parse_fif_response, parse_policy_verdicts, FifCapture, PolicyVerdict};
pub use pipeline::{run_pipeline, Artifact, CaptureRule, PipelineSpec, PipelineStep, Transcript, TranscriptStatus};
pub use provider::{chat_complete, MockProvider, Provider, ProviderConfig, ProviderError, RetryPolicy};
pub use shipped::{load_pipeline, shipped_pipelines};
pub use sweep::{sweep_params, SweepPoint};
pub use template::{render_prompt, Bindings, OutputKind, PromptTemplate, SELF_SCRUTINY_QUESTION};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("invalid {field}: {value}")]
    InvalidParam { field: String, value: String },
    #[error("unbound placeholder {0}")]
    Unbound(String),
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("invalid pipeline: {0}")]
    Pipeline(String),
    #[error("design is {len} characters, over the budget of {budget}; provide a module-level region instead of the whole design")]
    Budget { len: usize, budget: usize },
    #[error("delimiters: {0}")]
    Delimiters(String),
    #[error("policy verdicts: {0}")]
    Verdicts(String),
    #[error("FIF table: {0}")]
    Table(String),
    #[error("capture {0}")]
    Capture(String),
    #[error("mock script: {0}")]
    Script(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("parameter grid is empty")]
    EmptyGrid,
}
