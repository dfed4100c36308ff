//! Two-step greedy architecture search: sample MBConv models from a
//! constrained space, profile their sparsity geometrically on a calibration
//! set, run the parallel-factor optimizer on each, and keep the top-k by
//! estimated throughput. Training the survivors is external; the output is a
//! manifest of specs plus their hardware configs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::Bitmap;
use crate::kernels::{AvgDenominator, PoolKind};
use crate::model::{BlockSpec, HeadSpec, InputSpec, ModelSpec, StemSpec};
use crate::perf::{
    collect_stats_analytic, estimate_pipeline, optimize, HwConfig, PerfError, ResourceBudget,
};

fn default_bitwidth() -> u32 {
    8
}

fn default_retry_factor() -> usize {
    1000
}

/// Sampling space for MBConv models. Every sampled model keeps the fixed
/// total downsample ratio (stride product including the stem) and lands
/// inside the weight-footprint range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub input: InputSpec,
    pub stem_kernel: usize,
    pub stem_stride: usize,
    pub stem_out_choices: Vec<usize>,
    pub blocks_min: usize,
    pub blocks_max: usize,
    /// Product of all strides, stem included; a power of two.
    pub downsample_ratio: usize,
    pub expand_choices: Vec<u32>,
    pub out_ch_choices: Vec<usize>,
    pub kernel_choices: Vec<usize>,
    pub classes: usize,
    /// Bitwidth used to convert parameter counts into the size range.
    #[serde(default = "default_bitwidth")]
    pub bitwidth: u32,
    /// Inclusive weight-footprint range in bits.
    pub weight_bits_min: u64,
    pub weight_bits_max: u64,
    /// Rejection-sampling budget per requested model.
    #[serde(default = "default_retry_factor")]
    pub retries_per_model: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchError {
    Space(String),
    /// Rejection sampling gave up; names the constraint that failed most.
    RetryBudget { attempts: usize, violated: String },
    Perf(PerfError),
    EmptyCalibration,
}

impl fmt::Display for SearchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchError::Space(s) => write!(f, "degenerate search space: {s}"),
            SearchError::RetryBudget { attempts, violated } => write!(
                f,
                "sampling budget exhausted after {attempts} attempts; dominant violation: {violated}"
            ),
            SearchError::Perf(e) => write!(f, "{e}"),
            SearchError::EmptyCalibration => write!(f, "empty calibration set"),
        }
    }
}

impl core::error::Error for SearchError {}

impl SearchSpace {
    fn validate(&self) -> Result<usize, SearchError> {
        let err = |s: &str| Err(SearchError::Space(String::from(s)));
        if self.stem_out_choices.is_empty()
            || self.expand_choices.is_empty()
            || self.out_ch_choices.is_empty()
            || self.kernel_choices.is_empty()
        {
            return err("a choice set is empty");
        }
        if self.blocks_min == 0 || self.blocks_min > self.blocks_max {
            return err("block count range is empty");
        }
        if !self.downsample_ratio.is_power_of_two() {
            return err("downsample ratio must be a power of two");
        }
        if self.stem_stride != 1 && self.stem_stride != 2 {
            return err("stem stride must be 1 or 2");
        }
        if self.downsample_ratio % self.stem_stride != 0 {
            return err("stem stride exceeds the downsample ratio");
        }
        let block_ratio = self.downsample_ratio / self.stem_stride;
        let s2_blocks = block_ratio.trailing_zeros() as usize;
        if s2_blocks > self.blocks_max {
            return err("downsample ratio needs more stride-2 blocks than blocks_max");
        }
        Ok(s2_blocks)
    }
}

/// Draws `n` models satisfying the stride-product and size-range constraints;
/// deterministic under `seed`.
pub fn sample(space: &SearchSpace, n: usize, seed: u64) -> Result<Vec<ModelSpec>, SearchError> {
    let s2_blocks = space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let budget = space.retries_per_model.max(1) * n.max(1);
    let mut size_rejects = 0usize;
    let mut stride_rejects = 0usize;
    while out.len() < n {
        if attempts >= budget {
            let violated = if stride_rejects >= size_rejects {
                format!("stride-product constraint ({stride_rejects} rejects)")
            } else {
                format!("weight-size range ({size_rejects} rejects)")
            };
            return Err(SearchError::RetryBudget { attempts, violated });
        }
        attempts += 1;
        let count = rng.gen_range(space.blocks_min..=space.blocks_max);
        if s2_blocks > count {
            stride_rejects += 1;
            continue;
        }
        let mut positions: Vec<usize> = (0..count).collect();
        positions.shuffle(&mut rng);
        let stride2: Vec<bool> = {
            let mut v = alloc::vec![false; count];
            for p in positions.into_iter().take(s2_blocks) {
                v[p] = true;
            }
            v
        };
        let stem = StemSpec {
            kernel: space.stem_kernel,
            stride: space.stem_stride,
            out_ch: *space.stem_out_choices.choose(&mut rng).expect("non-empty"),
        };
        let blocks: Vec<BlockSpec> = stride2
            .iter()
            .map(|s2| BlockSpec {
                expand: *space.expand_choices.choose(&mut rng).expect("non-empty"),
                out_ch: *space.out_ch_choices.choose(&mut rng).expect("non-empty"),
                stride: if *s2 { 2 } else { 1 },
                kernel: *space.kernel_choices.choose(&mut rng).expect("non-empty"),
            })
            .collect();
        let spec = ModelSpec {
            input: space.input,
            stem: Some(stem),
            blocks,
            head: HeadSpec {
                pool: PoolKind::Avg,
                classes: space.classes,
                denominator: AvgDenominator::Active,
            },
        };
        let Ok(params) = spec.parameter_count() else {
            stride_rejects += 1;
            continue;
        };
        let bits = params as u64 * space.bitwidth as u64;
        if bits < space.weight_bits_min || bits > space.weight_bits_max {
            size_rejects += 1;
            continue;
        }
        out.push(spec);
    }
    Ok(out)
}

/// One ranked search result: the spec, the hardware mapping the optimizer
/// chose for it, and its estimated performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub spec: ModelSpec,
    pub hwcfg: HwConfig,
    pub bottleneck_latency: f64,
    /// Frames per cycle, `1 / bottleneck`.
    pub throughput: f64,
    pub feasible: bool,
    pub spec_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOutcome {
    pub candidates: Vec<Candidate>,
    pub evaluated: usize,
    pub infeasible: usize,
}

/// Profiles each model geometrically on the calibration bitmaps, optimizes
/// its hardware mapping, filters budget violations and returns the top-k by
/// ascending bottleneck latency (ties broken by spec hash).
pub fn rank(
    models: &[ModelSpec],
    calibration: &[Bitmap],
    budget: ResourceBudget,
    bits: u32,
    k: usize,
) -> Result<RankOutcome, SearchError> {
    if calibration.is_empty() {
        return Err(SearchError::EmptyCalibration);
    }
    let mut infeasible = 0usize;
    let mut candidates: Vec<Candidate> = Vec::new();
    for spec in models {
        let expanded = spec
            .expand()
            .map_err(|e| SearchError::Space(format!("sampled model failed to expand: {e}")))?;
        let profile =
            collect_stats_analytic(&expanded, calibration).map_err(SearchError::Perf)?;
        match optimize(&expanded, &profile, budget, bits) {
            Ok(hwcfg) => {
                let est =
                    estimate_pipeline(&expanded, &profile, &hwcfg, bits).map_err(SearchError::Perf)?;
                debug_assert!(est.within(budget));
                let bottleneck = est.bottleneck;
                candidates.push(Candidate {
                    spec: spec.clone(),
                    hwcfg,
                    bottleneck_latency: bottleneck,
                    throughput: if bottleneck > 0.0 { 1.0 / bottleneck } else { f64::INFINITY },
                    feasible: true,
                    spec_hash: spec.spec_hash(),
                });
            }
            Err(PerfError::Infeasible(_)) => infeasible += 1,
            Err(e) => return Err(SearchError::Perf(e)),
        }
    }
    candidates.sort_by(|a, b| {
        a.bottleneck_latency
            .partial_cmp(&b.bottleneck_latency)
            .expect("finite latencies")
            .then(a.spec_hash.cmp(&b.spec_hash))
    });
    candidates.truncate(k);
    Ok(RankOutcome { candidates, evaluated: models.len(), infeasible })
}
