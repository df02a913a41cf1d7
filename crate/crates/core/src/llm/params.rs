use serde::{Deserialize, Serialize};

use super::LlmError;

/// Sampling controls sent with every completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct GenerationParams {
    temperature: f64,
    top_p: f64,
    presence_penalty: f64,
    frequency_penalty: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct RawParams {
    temperature: f64,
    top_p: f64,
    #[serde(default)]
    presence_penalty: f64,
    #[serde(default)]
    frequency_penalty: f64,
    max_tokens: u32,
}

impl TryFrom<RawParams> for GenerationParams {
    type Error = LlmError;
    fn try_from(r: RawParams) -> Result<Self, LlmError> {
        GenerationParams::new(r.temperature, r.top_p, r.presence_penalty, r.frequency_penalty, r.max_tokens)
    }
}

impl GenerationParams {
    pub fn new(
        temperature: f64,
        top_p: f64,
        presence_penalty: f64,
        frequency_penalty: f64,
        max_tokens: u32,
    ) -> Result<Self, LlmError> {
        let bad = |field: &str, value: f64| LlmError::InvalidParam {
            field: field.to_string(),
            value: value.to_string(),
        };
        if !(0.0..=1.0).contains(&temperature) {
            return Err(bad("temperature", temperature));
        }
        if !(top_p > 0.0 && top_p <= 1.0) {
            return Err(bad("top_p", top_p));
        }
        if !(-2.0..=2.0).contains(&presence_penalty) {
            return Err(bad("presence_penalty", presence_penalty));
        }
        if !(-2.0..=2.0).contains(&frequency_penalty) {
            return Err(bad("frequency_penalty", frequency_penalty));
        }
        if max_tokens == 0 {
            return Err(bad("max_tokens", 0.0));
        }
        Ok(GenerationParams {
            temperature,
            top_p,
            presence_penalty,
            frequency_penalty,
            max_tokens,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
    pub fn top_p(&self) -> f64 {
        self.top_p
    }
    pub fn presence_penalty(&self) -> f64 {
        self.presence_penalty
    }
    pub fn frequency_penalty(&self) -> f64 {
        self.frequency_penalty
    }
    pub fn max_tokens(&self) -> u32 {
        self.max_tokens
    }

    pub fn with_temperature(&self, t: f64) -> Result<Self, LlmError> {
        GenerationParams::new(t, self.top_p, self.presence_penalty, self.frequency_penalty, self.max_tokens)
    }
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams::new(0.2, 1.0, 0.0, 0.0, 2048).expect("valid defaults")
    }
}

/// Temperatures 0.0, 0.1, .., 1.0 around `base`.
pub fn temperature_grid(base: &GenerationParams) -> Vec<GenerationParams> {
    (0..=10)
        .map(|i| base.with_temperature(i as f64 / 10.0).expect("grid point in range"))
        .collect()
}
