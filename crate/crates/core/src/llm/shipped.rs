use super::{LlmError, PipelineSpec};

const PIPELINES: &[(&str, &str)] = &[
    ("fif", include_str!("../../pipelines/fif.toml")),
    ("insert_deadlock", include_str!("../../pipelines/insert_deadlock.toml")),
    ("detect_policies", include_str!("../../pipelines/detect_policies.toml")),
    ("mitigate", include_str!("../../pipelines/mitigate.toml")),
];

/// Names of the pipelines shipped with the library.
pub fn shipped_pipelines() -> impl Iterator<Item = &'static str> {
    PIPELINES.iter().map(|(n, _)| *n)
}

/// A shipped pipeline by name, or a pipeline file path.
pub fn load_pipeline(name_or_path: &str) -> Result<PipelineSpec, LlmError> {
    if let Some((_, text)) = PIPELINES.iter().find(|(n, _)| *n == name_or_path) {
        return PipelineSpec::from_toml(text);
    }
    let text = std::fs::read_to_string(name_or_path)
        .map_err(|e| LlmError::Config(format!("{name_or_path}: {e}")))?;
    PipelineSpec::from_toml(&text)
}
