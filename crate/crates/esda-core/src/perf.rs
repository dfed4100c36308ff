//! Sparsity-statistics collection, per-module latency/BRAM/DSP estimation and
//! the resource-constrained min-max parallel-factor optimizer.
//!
//! The latency model for a depthwise k×k module is
//! `lat = (H·W·S_s) · (k²·S_k) · ceil(C/PF)` with `S_s` the mean input
//! density and `S_k` the mean fraction of active taps per emitted window; the
//! analogous forms for 1×1 convolutions, line buffers and the pooled
//! classifier reuse the same `ceil(·/PF)` cycle helpers the simulator charges,
//! so for stride-1 layers the estimate equals the simulated busy-cycle count
//! exactly. Stride-2 layers keep the input-resolution spatial term, which
//! upper-bounds their window count.
//!
//! BRAM is counted in 16 Kb blocks; a conv layer's weight buffer is
//! partitioned PF ways (`ceil(B·weights/16K/PF)·PF`) and each MAC lane costs
//! one DSP, so `dsp = PF`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::frame::SparseFrame;
use crate::model::{ConvLayerDesc, ExpandedModel, ModelWeights};
use crate::ops::{propagate_activity, run_model, window_stats, ConvRule};
use crate::sim::PipelineConfig;

pub const BRAM_BITS: u64 = 16_384;

#[derive(Debug, Clone, PartialEq)]
pub enum PerfError {
    EmptyDataset,
    UnknownLayer { name: String },
    BadPf { layer: String, pf: usize, channels: usize },
    Model(String),
    Infeasible(InfeasibilityReport),
}

impl fmt::Display for PerfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerfError::EmptyDataset => write!(f, "empty dataset"),
            PerfError::UnknownLayer { name } => write!(f, "no profile entry for layer `{name}`"),
            PerfError::BadPf { layer, pf, channels } => {
                write!(f, "PF {pf} does not divide the {channels} channels of `{layer}`")
            }
            PerfError::Model(s) => write!(f, "{s}"),
            PerfError::Infeasible(r) => write!(f, "{r}"),
        }
    }
}

impl core::error::Error for PerfError {}

/// Per-layer sparsity statistics, averaged over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub name: String,
    /// Mean spatial density of the layer's input at its input resolution.
    pub s_s: f64,
    /// Mean fraction of active taps per emitted window (1 for 1×1 layers).
    pub s_k: f64,
    /// Total windows observed across all samples (exact-merge weight).
    pub windows: u64,
    /// Set when no window was ever emitted; `s_k` is recorded as 0 then.
    pub zero_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub samples: u64,
    pub layers: Vec<LayerStats>,
}

impl SparsityProfile {
    pub fn layer(&self, name: &str) -> Option<&LayerStats> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Exact merge of shard profiles: `s_s` weighted by sample count, `s_k`
    /// by window count.
    pub fn merge(shards: &[SparsityProfile]) -> Result<SparsityProfile, PerfError> {
        let mut iter = shards.iter();
        let first = iter.next().ok_or(PerfError::EmptyDataset)?;
        let mut samples = first.samples;
        let mut acc: Vec<(String, f64, f64, u64)> = first
            .layers
            .iter()
            .map(|l| {
                (l.name.clone(), l.s_s * first.samples as f64, l.s_k * l.windows as f64, l.windows)
            })
            .collect();
        for shard in iter {
            samples += shard.samples;
            for (slot, l) in acc.iter_mut().zip(&shard.layers) {
                debug_assert_eq!(slot.0, l.name);
                slot.1 += l.s_s * shard.samples as f64;
                slot.2 += l.s_k * l.windows as f64;
                slot.3 += l.windows;
            }
        }
        Ok(SparsityProfile {
            samples,
            layers: acc
                .into_iter()
                .map(|(name, s_s_sum, s_k_sum, windows)| LayerStats {
                    name,
                    s_s: s_s_sum / samples as f64,
                    s_k: if windows > 0 { s_k_sum / windows as f64 } else { 0.0 },
                    windows,
                    zero_window: windows == 0,
                })
                .collect(),
        })
    }
}

/// Names of the PF-bearing layers, in order: conv layers plus the pooled
/// classifier.
pub fn pf_layers(model: &ExpandedModel) -> Vec<String> {
    let mut names: Vec<String> = model.conv_layers().iter().map(|l| l.name.clone()).collect();
    names.push(String::from("head.pool_fc"));
    names
}

struct StatsAcc {
    name: String,
    s_s_sum: f64,
    win_count: u64,
    win_frac_sum: f64,
}

fn stats_layers(model: &ExpandedModel) -> Vec<(String, usize, usize, usize)> {
    // (name, kernel, stride, resolution divisor handled via desc lookup)
    let mut v: Vec<(String, usize, usize, usize)> = model
        .conv_layers()
        .iter()
        .map(|l| (l.name.clone(), l.kernel, l.stride, l.in_h * l.in_w))
        .collect();
    v.push((String::from("head.pool_fc"), 1, 1, model.head.h * model.head.w));
    v
}

/// Measures per-layer `S_s`/`S_k` by running the functional model over the
/// dataset and scanning each layer's input activity.
pub fn collect_stats(
    model: &ExpandedModel,
    dataset: &[SparseFrame],
    weights: &ModelWeights,
) -> Result<SparsityProfile, PerfError> {
    if dataset.is_empty() {
        return Err(PerfError::EmptyDataset);
    }
    let per_sample: Result<Vec<Vec<(f64, u64, f64)>>, PerfError> = dataset
        .iter()
        .map(|frame| {
            let trace =
                run_model(model, frame, weights).map_err(|e| PerfError::Model(format!("{e}")))?;
            let mut rows = Vec::new();
            for desc in model.conv_layers() {
                let input = trace.input_of(&desc.name).expect("trace covers every layer");
                rows.push(sample_row(&input.bitmap(), desc.kernel, desc.stride));
            }
            let head_in = trace.input_of("head").expect("head input present");
            rows.push(sample_row(&head_in.bitmap(), 1, 1));
            Ok(rows)
        })
        .collect();
    finalize_stats(model, dataset.len() as u64, per_sample?)
}

/// Weight-free profile: activity under submanifold rules depends only on the
/// input bitmap, so the statistics can be derived geometrically. Exactly
/// equal to [`collect_stats`] by construction (cancellation never deactivates
/// a site); the equality is tested, not assumed.
pub fn collect_stats_analytic(
    model: &ExpandedModel,
    inputs: &[crate::frame::Bitmap],
) -> Result<SparsityProfile, PerfError> {
    if inputs.is_empty() {
        return Err(PerfError::EmptyDataset);
    }
    let convs = model.conv_layers();
    let per_sample: Vec<Vec<(f64, u64, f64)>> = inputs
        .iter()
        .map(|bm| {
            let trace = propagate_activity(model, bm, ConvRule::Submanifold);
            let mut rows = Vec::new();
            for (desc, (_, input, _)) in convs.iter().zip(&trace.layers) {
                rows.push(sample_row(input, desc.kernel, desc.stride));
            }
            let head_in = trace.layers.last().map(|(_, _, out)| out).unwrap_or(bm);
            rows.push(sample_row(head_in, 1, 1));
            rows
        })
        .collect();
    finalize_stats(model, inputs.len() as u64, per_sample)
}

fn sample_row(input: &crate::frame::Bitmap, kernel: usize, stride: usize) -> (f64, u64, f64) {
    let s_s = input.density();
    let (windows, frac_sum) = window_stats(input, kernel, stride);
    (s_s, windows, frac_sum)
}

fn finalize_stats(
    model: &ExpandedModel,
    samples: u64,
    rows: Vec<Vec<(f64, u64, f64)>>,
) -> Result<SparsityProfile, PerfError> {
    let names = stats_layers(model);
    let mut accs: Vec<StatsAcc> = names
        .iter()
        .map(|(name, ..)| StatsAcc {
            name: name.clone(),
            s_s_sum: 0.0,
            win_count: 0,
            win_frac_sum: 0.0,
        })
        .collect();
    for sample in rows {
        for (acc, (s_s, windows, frac_sum)) in accs.iter_mut().zip(sample) {
            acc.s_s_sum += s_s;
            acc.win_count += windows;
            acc.win_frac_sum += frac_sum;
        }
    }
    Ok(SparsityProfile {
        samples,
        layers: accs
            .into_iter()
            .map(|a| LayerStats {
                name: a.name,
                s_s: a.s_s_sum / samples as f64,
                s_k: if a.win_count > 0 { a.win_frac_sum / a.win_count as f64 } else { 0.0 },
                windows: a.win_count,
                zero_window: a.win_count == 0,
            })
            .collect(),
    })
}

/// FPGA resource budget: BRAM blocks of 16 Kb and DSP slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceBudget {
    pub bram: u64,
    pub dsp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerEstimate {
    /// Expected cycles per sample (real-valued expectation).
    pub lat: f64,
    pub bram: u64,
    pub dsp: u64,
}

fn bram_blocks(bits: u64, pf: u64) -> u64 {
    bits.div_ceil(BRAM_BITS * pf) * pf
}

/// Latency/resource estimate of one convolution layer at the given PF and
/// weight bitwidth.
pub fn estimate_layer(
    layer: &ConvLayerDesc,
    s_s: f64,
    s_k: f64,
    pf: usize,
    bits: u32,
) -> Result<LayerEstimate, PerfError> {
    if pf == 0 || layer.in_ch % pf != 0 {
        return Err(PerfError::BadPf {
            layer: layer.name.clone(),
            pf,
            channels: layer.in_ch,
        });
    }
    let spatial = (layer.in_h * layer.in_w) as f64 * s_s;
    let weight_bits =
        bits as u64 * (layer.out_ch * (layer.in_ch / layer.groups)) as u64 * (layer.kernel * layer.kernel) as u64;
    let (lat, bram) = if layer.kernel == 1 {
        (spatial * layer.pointwise_cycles(pf) as f64, bram_blocks(weight_bits, pf as u64))
    } else {
        let taps = (layer.kernel * layer.kernel) as f64;
        (spatial * taps * s_k * layer.tap_cycles(pf) as f64, bram_blocks(weight_bits, pf as u64))
    };
    Ok(LayerEstimate { lat, bram, dsp: pf as u64 })
}

/// Per-layer PF assignment — the optimizer's decision variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct HwConfig {
    pub pf: BTreeMap<String, usize>,
}

impl HwConfig {
    pub fn pf_for(&self, layer: &str) -> usize {
        self.pf.get(layer).copied().unwrap_or(1)
    }

    pub fn to_pipeline_config(&self) -> PipelineConfig {
        PipelineConfig { pf: self.pf.clone(), ..PipelineConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleEstimate {
    pub name: String,
    pub lat: f64,
    pub bram: u64,
    pub dsp: u64,
    pub pf: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEstimate {
    pub modules: Vec<ModuleEstimate>,
    pub bottleneck: f64,
    pub bottleneck_module: String,
    pub total_bram: u64,
    pub total_dsp: u64,
}

impl PipelineEstimate {
    pub fn within(&self, budget: ResourceBudget) -> bool {
        self.total_bram <= budget.bram && self.total_dsp <= budget.dsp
    }

    pub fn module(&self, name: &str) -> Option<&ModuleEstimate> {
        self.modules.iter().find(|m| m.name == name)
    }
}

/// Full pipeline estimate: every streaming module gets a row; the pipeline's
/// expected throughput is the reciprocal of the bottleneck latency.
pub fn estimate_pipeline(
    model: &ExpandedModel,
    profile: &SparsityProfile,
    cfg: &HwConfig,
    bits: u32,
) -> Result<PipelineEstimate, PerfError> {
    let mut modules = Vec::new();
    for desc in model.conv_layers() {
        let stats = profile
            .layer(&desc.name)
            .ok_or_else(|| PerfError::UnknownLayer { name: desc.name.clone() })?;
        let pf = cfg.pf_for(&desc.name);
        let est = estimate_layer(desc, stats.s_s, stats.s_k, pf, bits)?;
        if desc.kernel > 1 {
            // Line buffer: one pair per cycle, a k-row activation buffer.
            let spatial = (desc.in_h * desc.in_w) as f64 * stats.s_s;
            let taps = (desc.kernel * desc.kernel) as f64;
            let buf_bits = bits as u64 * (desc.kernel * desc.in_w * desc.in_ch) as u64;
            modules.push(ModuleEstimate {
                name: format!("{}.slb", desc.name.split('.').next().unwrap_or(&desc.name)),
                lat: spatial * taps * stats.s_k,
                bram: buf_bits.div_ceil(BRAM_BITS),
                dsp: 0,
                pf: None,
            });
        }
        modules.push(ModuleEstimate {
            name: desc.name.clone(),
            lat: est.lat,
            bram: est.bram,
            dsp: est.dsp,
            pf: Some(pf),
        });
    }
    for b in &model.blocks {
        if b.shortcut {
            let stats = profile
                .layer(&b.project.name)
                .ok_or_else(|| PerfError::UnknownLayer { name: b.project.name.clone() })?;
            let sites = (b.project.in_h * b.project.in_w) as f64 * stats.s_s;
            let cap = (b.depthwise.kernel * b.depthwise.in_w) as u64;
            let fifo_bits = bits as u64 * cap * b.expand.in_ch as u64;
            modules.push(ModuleEstimate {
                name: b.project.name.replace(".project", ".add"),
                lat: sites,
                bram: fifo_bits.div_ceil(BRAM_BITS),
                dsp: 0,
                pf: None,
            });
        }
    }
    let head_stats = profile
        .layer("head.pool_fc")
        .ok_or_else(|| PerfError::UnknownLayer { name: String::from("head.pool_fc") })?;
    let pf = cfg.pf_for("head.pool_fc");
    if pf == 0 || model.head.in_ch % pf != 0 {
        return Err(PerfError::BadPf {
            layer: String::from("head.pool_fc"),
            pf,
            channels: model.head.in_ch,
        });
    }
    let head_sites = (model.head.h * model.head.w) as f64 * head_stats.s_s;
    let fc_bits = bits as u64 * (model.head.in_ch * model.head.classes) as u64;
    modules.push(ModuleEstimate {
        name: String::from("head.pool_fc"),
        lat: head_sites * model.head.site_cycles(pf) as f64 + model.head.fc_cycles(pf) as f64,
        bram: bram_blocks(fc_bits, pf as u64),
        dsp: pf as u64,
        pf: Some(pf),
    });

    let (mut bottleneck, mut name) = (0.0f64, String::new());
    for m in &modules {
        if m.lat > bottleneck {
            bottleneck = m.lat;
            name = m.name.clone();
        }
    }
    Ok(PipelineEstimate {
        total_bram: modules.iter().map(|m| m.bram).sum(),
        total_dsp: modules.iter().map(|m| m.dsp).sum(),
        bottleneck,
        bottleneck_module: name,
        modules,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindingResource {
    Bram,
    Dsp,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub binding: BindingResource,
    pub min_bram: u64,
    pub min_dsp: u64,
    pub budget_bram: u64,
    pub budget_dsp: u64,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "infeasible budget (binding: {:?}): needs >= {} BRAM and >= {} DSP, budget is {}/{}",
            self.binding, self.min_bram, self.min_dsp, self.budget_bram, self.budget_dsp
        )
    }
}

struct PfOption {
    pf: usize,
    lat: f64,
    bram: u64,
    dsp: u64,
}

struct PfLayer {
    name: String,
    options: Vec<PfOption>,
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Minimizes the bottleneck latency over per-layer PF assignments subject to
/// the BRAM/DSP budget. Exact: binary search on the candidate bottleneck
/// values with a per-layer pareto-pruned selection and a min-BRAM dynamic
/// program over the DSP budget (BRAM cheapness and DSP cheapness can
/// conflict, so a greedy pick is not enough).
pub fn optimize(
    model: &ExpandedModel,
    profile: &SparsityProfile,
    budget: ResourceBudget,
    bits: u32,
) -> Result<HwConfig, PerfError> {
    let base = estimate_pipeline(model, profile, &HwConfig::default(), bits)?;
    let const_bram: u64 = base.modules.iter().filter(|m| m.pf.is_none()).map(|m| m.bram).sum();

    let mut layers: Vec<PfLayer> = Vec::new();
    for desc in model.conv_layers() {
        let stats = profile.layer(&desc.name).expect("estimate validated profile");
        let options = divisors(desc.in_ch)
            .into_iter()
            .map(|pf| {
                let e = estimate_layer(desc, stats.s_s, stats.s_k, pf, bits)
                    .expect("divisor PF is valid");
                PfOption { pf, lat: e.lat, bram: e.bram, dsp: e.dsp }
            })
            .collect();
        layers.push(PfLayer { name: desc.name.clone(), options });
    }
    {
        let head_stats = profile.layer("head.pool_fc").expect("validated");
        let sites = (model.head.h * model.head.w) as f64 * head_stats.s_s;
        let fc_bits = bits as u64 * (model.head.in_ch * model.head.classes) as u64;
        let options = divisors(model.head.in_ch)
            .into_iter()
            .map(|pf| PfOption {
                pf,
                lat: sites * model.head.site_cycles(pf) as f64 + model.head.fc_cycles(pf) as f64,
                bram: bram_blocks(fc_bits, pf as u64),
                dsp: pf as u64,
            })
            .collect();
        layers.push(PfLayer { name: String::from("head.pool_fc"), options });
    }

    if budget.bram <= const_bram {
        let min_dsp = layers.len() as u64;
        return Err(PerfError::Infeasible(InfeasibilityReport {
            binding: BindingResource::Bram,
            min_bram: const_bram + layers.len() as u64,
            min_dsp,
            budget_bram: budget.bram,
            budget_dsp: budget.dsp,
        }));
    }

    // Feasibility at unbounded latency decides feasibility outright.
    if assign(&layers, f64::INFINITY, budget, const_bram).is_none() {
        let min_dsp: u64 =
            layers.iter().map(|l| l.options.iter().map(|o| o.dsp).min().unwrap_or(1)).sum();
        let min_bram: u64 = const_bram
            + layers
                .iter()
                .map(|l| l.options.iter().map(|o| o.bram).min().unwrap_or(0))
                .sum::<u64>();
        let binding = match (min_bram > budget.bram, min_dsp > budget.dsp) {
            (true, false) => BindingResource::Bram,
            (false, true) => BindingResource::Dsp,
            _ => BindingResource::Joint,
        };
        return Err(PerfError::Infeasible(InfeasibilityReport {
            binding,
            min_bram,
            min_dsp,
            budget_bram: budget.bram,
            budget_dsp: budget.dsp,
        }));
    }

    // Candidate bottleneck values: every achievable per-layer latency.
    let mut candidates: Vec<f64> = layers.iter().flat_map(|l| l.options.iter().map(|o| o.lat)).collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite latencies"));
    candidates.dedup();

    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if assign(&layers, candidates[mid], budget, const_bram).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let chosen =
        assign(&layers, candidates[lo], budget, const_bram).expect("feasible at binary-search result");
    let mut cfg = HwConfig::default();
    for (layer, pf) in layers.iter().zip(chosen) {
        cfg.pf.insert(layer.name.clone(), pf);
    }
    Ok(cfg)
}

/// Per-layer cheapest-viable selection for a latency cap `limit`, then an
/// exact min-BRAM DP over the DSP budget. Returns the PF per layer or None if
/// no assignment fits.
fn assign(
    layers: &[PfLayer],
    limit: f64,
    budget: ResourceBudget,
    const_bram: u64,
) -> Option<Vec<usize>> {
    let dsp_cap = budget.dsp as usize;
    let bram_cap = budget.bram.checked_sub(const_bram)?;

    // Pareto-minimal (dsp, bram) options meeting the latency cap, per layer.
    let mut pruned: Vec<Vec<&PfOption>> = Vec::with_capacity(layers.len());
    for layer in layers {
        let mut viable: Vec<&PfOption> = layer.options.iter().filter(|o| o.lat <= limit).collect();
        if viable.is_empty() {
            return None;
        }
        viable.sort_by_key(|o| o.dsp);
        let mut frontier: Vec<&PfOption> = Vec::new();
        let mut best_bram = u64::MAX;
        for o in viable {
            if o.bram < best_bram {
                best_bram = o.bram;
                frontier.push(o);
            }
        }
        pruned.push(frontier);
    }

    const UNREACHED: u64 = u64::MAX;
    // tables[i][s]: minimal BRAM over the first i layers at exactly s DSPs.
    let mut tables: Vec<Vec<u64>> = Vec::with_capacity(pruned.len() + 1);
    let mut init = alloc::vec![UNREACHED; dsp_cap + 1];
    init[0] = 0;
    tables.push(init);
    for options in &pruned {
        let prev = tables.last().expect("seeded");
        let mut next = alloc::vec![UNREACHED; dsp_cap + 1];
        for o in options.iter() {
            let d = o.dsp as usize;
            if d > dsp_cap {
                continue;
            }
            for s in 0..=(dsp_cap - d) {
                if prev[s] == UNREACHED {
                    continue;
                }
                let b = prev[s] + o.bram;
                if b < next[s + d] {
                    next[s + d] = b;
                }
            }
        }
        tables.push(next);
    }

    let last = tables.last().expect("seeded");
    let best_s = (0..=dsp_cap).filter(|s| last[*s] <= bram_cap).min_by_key(|s| (last[*s], *s))?;

    // Walk the snapshots back to recover one optimal assignment; ties break
    // toward the smallest PF for determinism.
    let mut picks = alloc::vec![0usize; pruned.len()];
    let mut s = best_s;
    let mut target = last[best_s];
    for i in (0..pruned.len()).rev() {
        let prev = &tables[i];
        let mut found = false;
        for o in pruned[i].iter() {
            let d = o.dsp as usize;
            if d <= s && prev[s - d] != UNREACHED && prev[s - d] + o.bram == target {
                picks[i] = o.pf;
                s -= d;
                target -= o.bram;
                found = true;
                break;
            }
        }
        debug_assert!(found, "DP backtrack must find a predecessor");
        if !found {
            return None;
        }
    }
    Some(picks)
}

/// Per-module relative error between the closed-form latency estimate and the
/// simulated busy-cycle count, with `S_s`/`S_k` measured on the very frames
/// simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCheck {
    pub rows: Vec<ModuleErrorRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleErrorRow {
    pub name: String,
    pub mean_rel_err: f64,
    pub max_rel_err: f64,
    pub samples: u64,
}

impl EstimatorCheck {
    pub fn mean_over(&self, filter: impl Fn(&str) -> bool) -> f64 {
        let rows: Vec<&ModuleErrorRow> = self.rows.iter().filter(|r| filter(&r.name)).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|r| r.mean_rel_err).sum::<f64>() / rows.len() as f64
    }
}

pub fn verify_estimator(
    model: &ExpandedModel,
    weights: &ModelWeights,
    cfg: &HwConfig,
    frames: &[SparseFrame],
    bits: u32,
) -> Result<EstimatorCheck, PerfError> {
    if frames.is_empty() {
        return Err(PerfError::EmptyDataset);
    }
    let mut sums: BTreeMap<String, (f64, f64, u64)> = BTreeMap::new();
    for frame in frames {
        let profile = collect_stats(model, core::slice::from_ref(frame), weights)?;
        let est = estimate_pipeline(model, &profile, cfg, bits)?;
        let pipeline = crate::sim::build_pipeline(
            model,
            weights,
            &cfg.to_pipeline_config(),
            crate::sim::SimOptions::default(),
        )
        .map_err(|e| PerfError::Model(format!("{e}")))?;
        let report = crate::sim::simulate(pipeline, frame).map_err(|e| PerfError::Model(format!("{e}")))?;
        for m in &est.modules {
            let Some(sim_mod) = report.module(&m.name) else { continue };
            let busy = sim_mod.busy as f64;
            let err = if busy == 0.0 { m.lat } else { (m.lat - busy).abs() / busy };
            let e = sums.entry(m.name.clone()).or_insert((0.0, 0.0, 0));
            e.0 += err;
            e.1 = if err > e.1 { err } else { e.1 };
            e.2 += 1;
        }
    }
    Ok(EstimatorCheck {
        rows: sums
            .into_iter()
            .map(|(name, (sum, max, n))| ModuleErrorRow {
                name,
                mean_rel_err: sum / n as f64,
                max_rel_err: max,
                samples: n,
            })
            .collect(),
    })
}
