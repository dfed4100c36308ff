//! IO formats, report generation and parallel helpers behind the `esda`
//! command-line tool. Split out as a library so integration tests can drive
//! the same code paths the binary uses.

pub mod io;
pub mod parallel;
pub mod report;

use anyhow::Result;
use esda_core::model::ModelSpec;
use esda_core::perf::ResourceBudget;
use esda_core::search::{rank, sample, Candidate, SearchSpace};
use serde::{Deserialize, Serialize};

/// Everything `esda search` writes: enough to reproduce and re-validate the
/// ranking byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchManifest {
    pub seed: u64,
    pub requested: usize,
    pub top_k: usize,
    pub bitwidth: u32,
    pub budget: ResourceBudget,
    pub evaluated: usize,
    pub infeasible: usize,
    pub candidates: Vec<Candidate>,
}

/// Samples, profiles and ranks; the manifest is deterministic for a fixed
/// (space, seed, calibration set, budget).
pub fn run_search(
    space: &SearchSpace,
    calibration: &[esda_core::frame::Bitmap],
    n: usize,
    k: usize,
    budget: ResourceBudget,
    bitwidth: u32,
    seed: u64,
) -> Result<SearchManifest> {
    let models: Vec<ModelSpec> = sample(space, n, seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    let outcome =
        rank(&models, calibration, budget, bitwidth, k).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(SearchManifest {
        seed,
        requested: n,
        top_k: k,
        bitwidth,
        budget,
        evaluated: outcome.evaluated,
        infeasible: outcome.infeasible,
        candidates: outcome.candidates,
    })
}
