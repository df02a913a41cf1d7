use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{check_budget, run_pipeline, PipelineSpec, Transcript};
use super::provider::Provider;
use super::{GenerationParams, LlmError};
use crate::frontend::SourceText;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub design: String,
    pub point: usize,
    pub params: GenerationParams,
    pub transcript: Transcript,
}

/// Runs `spec` for every design at every grid point, `max_in_flight`
/// pipelines at a time. Results are ordered by design, then grid point.
pub fn sweep_params(
    spec: &PipelineSpec,
    designs: &[SourceText],
    grid: &[GenerationParams],
    provider: &dyn Provider,
    max_in_flight: usize,
) -> Result<Vec<SweepPoint>, LlmError> {
    if grid.is_empty() {
        return Err(LlmError::EmptyGrid);
    }
    spec.validate()?;
    for d in designs {
        check_budget(spec, d)?;
    }
    let jobs: Vec<(usize, usize)> = (0..designs.len())
        .flat_map(|d| (0..grid.len()).map(move |p| (d, p)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .map_err(|e| LlmError::Config(e.to_string()))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(d, p)| {
                let mut point_spec = spec.clone();
                for s in &mut point_spec.steps {
                    s.params = grid[p].clone();
                }
                let transcript = run_pipeline(&point_spec, &designs[d], provider)?;
                Ok(SweepPoint {
                    design: designs[d].origin.clone(),
                    point: p,
                    params: grid[p].clone(),
                    transcript,
                })
            })
            .collect()
    })
}
