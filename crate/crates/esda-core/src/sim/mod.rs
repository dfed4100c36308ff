//! Cycle-approximate simulator of the streaming token-feature pipeline.
//!
//! [`build_pipeline`] expands a model into a graph of module state machines
//! connected by bounded channels: per block, a fork (when the identity
//! shortcut applies), a 1×1 expand, a sparse line buffer, the k×k compute, a
//! 1×1 projection and the residual add; stride-2 blocks use the two-FIFO line
//! buffer and have no shortcut. The engine clocks every module once per
//! cycle in fixed topological order, so runs are deterministic.
//!
//! The cost model is one multiply-accumulate group of width PF per module at
//! initiation interval 1, plus one cycle per pushed stream element. Module
//! `busy` counters under this model equal the closed-form latency
//! expectations in [`crate::perf`], which is the property the parallel-factor
//! optimizer relies on.
//!
//! Simulation either terminates or reports a deadlock naming the blocked
//! channels; a deadlock is always a control-logic bug (or an undersized FIFO
//! override), never an accepted outcome.

mod channel;
mod modules;
mod slb;
mod slb_s2;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use channel::{ChannelReport, Msg, StreamChannel};
pub use modules::ModuleStats;
pub use slb::{slb_ready, slb_valid, RowBuffer, SlbState};
pub use slb_s2::{slb_s2_merge, SlbS2State};

use crate::frame::SparseFrame;
use crate::model::{ConvLayerDesc, ExpandedModel, ModelWeights};
use crate::token::Token;
use modules::{
    Add, Conv1x1, Fork, KxkCompute, Module, ModuleCore, PoolFc, Sink, SlbModule, SlbS2Module,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    Config(String),
    InputMismatch { expected: (usize, usize, usize), got: (usize, usize, usize) },
    /// No module could make progress. Diagnostics name each blocked module
    /// and the channel it waits on.
    Deadlock { cycle: u64, diagnostics: Vec<String> },
    /// Internal consistency assertion failed (e.g. bitmap/buffer mismatch).
    Internal { module: String, what: String },
    CycleLimit { limit: u64 },
}

impl SimError {
    pub(crate) fn internal(module: &str, what: &str) -> Self {
        SimError::Internal { module: String::from(module), what: String::from(what) }
    }
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(s) => write!(f, "pipeline config error: {s}"),
            SimError::InputMismatch { expected, got } => write!(
                f,
                "input frame {}x{}x{} does not match model input {}x{}x{}",
                got.0, got.1, got.2, expected.0, expected.1, expected.2
            ),
            SimError::Deadlock { cycle, diagnostics } => {
                write!(f, "deadlock at cycle {cycle}:")?;
                for d in diagnostics {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
            SimError::Internal { module, what } => {
                write!(f, "simulator assertion failed in {module}: {what}")
            }
            SimError::CycleLimit { limit } => write!(f, "cycle limit {limit} exceeded"),
        }
    }
}

impl core::error::Error for SimError {}

fn default_feature_fifo() -> usize {
    16
}

fn default_max_cycles() -> u64 {
    1_000_000_000
}

/// Hardware knobs of one pipeline instance: per-layer parallel factors plus
/// FIFO depths. PF keys are the layer names (`stem`, `bN.expand`, `bN.dw`,
/// `bN.project`, `head.pool_fc`); unlisted layers default to PF 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub pf: BTreeMap<String, usize>,
    /// Capacity of inter-module site/token/pair channels, in elements.
    #[serde(default = "default_feature_fifo")]
    pub feature_fifo: usize,
    /// Override for the SLB-internal token FIFO depth (default k·W). The
    /// defaults satisfy the deadlock-freedom preconditions; smaller values
    /// can legitimately deadlock and will be diagnosed as such.
    #[serde(default)]
    pub token_fifo: Option<usize>,
    /// Override for residual shortcut FIFO depth (default k·W of the inner
    /// line buffer).
    #[serde(default)]
    pub shortcut_fifo: Option<usize>,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pf: BTreeMap::new(),
            feature_fifo: default_feature_fifo(),
            token_fifo: None,
            shortcut_fifo: None,
            max_cycles: default_max_cycles(),
        }
    }
}

impl PipelineConfig {
    pub fn pf_for(&self, layer: &str) -> usize {
        self.pf.get(layer).copied().unwrap_or(1)
    }

    /// Uniform PF for every layer (clamped per layer to a divisor by the
    /// caller; this helper does no validation).
    pub fn with_uniform_pf(model: &ExpandedModel, pf: usize) -> Self {
        let mut cfg = PipelineConfig::default();
        for l in model.conv_layers() {
            cfg.pf.insert(l.name.clone(), largest_divisor_at_most(l.in_ch, pf));
        }
        cfg.pf
            .insert(String::from("head.pool_fc"), largest_divisor_at_most(model.head.in_ch, pf));
        cfg
    }

    /// Checks that every PF key names a real layer and divides its input
    /// channel count.
    pub fn validate(&self, model: &ExpandedModel) -> Result<(), SimError> {
        let mut valid: BTreeMap<&str, usize> = BTreeMap::new();
        for l in model.conv_layers() {
            valid.insert(l.name.as_str(), l.in_ch);
        }
        let head_name = String::from("head.pool_fc");
        valid.insert(head_name.as_str(), model.head.in_ch);
        for (name, pf) in &self.pf {
            match valid.get(name.as_str()) {
                None => {
                    return Err(SimError::Config(format!("PF given for unknown layer `{name}`")))
                }
                Some(ch) => {
                    if *pf == 0 || ch % pf != 0 {
                        return Err(SimError::Config(format!(
                            "PF {pf} does not divide the {ch} channels of `{name}`"
                        )));
                    }
                }
            }
        }
        if self.feature_fifo == 0 {
            return Err(SimError::Config(String::from("feature_fifo must be >= 1")));
        }
        Ok(())
    }
}

pub fn largest_divisor_at_most(n: usize, cap: usize) -> usize {
    let cap = cap.clamp(1, n.max(1));
    (1..=cap).rev().find(|d| n % d == 0).unwrap_or(1)
}

/// Simulation switches orthogonal to the hardware config.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Record every layer-output stream and return it as tapped frames.
    pub tap_layers: bool,
    /// Drop the pooling/classifier head and terminate on the last block's
    /// end marker (used for per-block benchmarking).
    pub headless: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleReport {
    pub name: String,
    pub busy: u64,
    pub stall_in: u64,
    pub stall_out: u64,
    pub idle: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapFrame {
    pub name: String,
    pub frame: SparseFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub makespan: u64,
    pub modules: Vec<ModuleReport>,
    pub channels: Vec<ChannelReport>,
    pub pooled: Option<Vec<f64>>,
    pub logits: Option<Vec<f64>>,
    pub taps: Vec<TapFrame>,
}

impl SimReport {
    pub fn module(&self, name: &str) -> Option<&ModuleReport> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn tap(&self, name: &str) -> Option<&SparseFrame> {
        self.taps.iter().find(|t| t.name == name).map(|t| &t.frame)
    }
}

struct Tap {
    layer: String,
    chan: usize,
    h: usize,
    w: usize,
    c: usize,
}

pub struct Pipeline {
    modules: Vec<Module>,
    channels: Vec<StreamChannel>,
    input_h: usize,
    input_w: usize,
    input_c: usize,
    source: usize,
    poolfc: Option<usize>,
    taps: Vec<Tap>,
    max_cycles: u64,
}

/// Expands the model into the module graph. Fails on PF/divisor violations or
/// weight-shape mismatches.
pub fn build_pipeline(
    model: &ExpandedModel,
    weights: &ModelWeights,
    cfg: &PipelineConfig,
    options: SimOptions,
) -> Result<Pipeline, SimError> {
    weights.validate(model).map_err(|e| SimError::Config(format!("{e}")))?;
    cfg.validate(model)?;

    let mut b = Builder {
        modules: Vec::new(),
        channels: Vec::new(),
        taps: Vec::new(),
        cfg,
        tap_layers: options.tap_layers,
    };

    let src_chan = b.chan("source.out", cfg.feature_fifo, false);
    let mut cur = src_chan;
    let mut weight_iter = weights.convs.iter();

    if let Some(stem) = &model.stem {
        let w = weight_iter.next().expect("validated weight count");
        cur = b.conv_stage(stem, w, cur)?;
    }
    for (i, blk) in model.blocks.iter().enumerate() {
        let block_input = cur;
        let (body_in, shortcut_chan) = if blk.shortcut {
            let body = b.chan(&format!("b{i}.fork.body"), cfg.feature_fifo, false);
            let k = blk.depthwise.kernel;
            let sc_cap = cfg.shortcut_fifo.unwrap_or(k * blk.depthwise.in_w);
            let sc = b.chan(&format!("b{i}.fork.shortcut"), sc_cap, false);
            b.modules.push(Module::Fork(Fork {
                core: ModuleCore::new(format!("b{i}.fork")),
                input: block_input,
                out_body: body,
                out_shortcut: sc,
            }));
            (body, Some(sc))
        } else {
            (block_input, None)
        };
        let we = weight_iter.next().expect("validated weight count");
        let after_expand = b.conv_stage(&blk.expand, we, body_in)?;
        let wd = weight_iter.next().expect("validated weight count");
        let after_dw = b.conv_stage(&blk.depthwise, wd, after_expand)?;
        let wp = weight_iter.next().expect("validated weight count");
        let after_project = b.conv_stage(&blk.project, wp, after_dw)?;
        cur = after_project;
        if let Some(sc) = shortcut_chan {
            let name = format!("b{i}.add");
            let out = b.tapped_chan(
                &name,
                &blk.project,
                cfg.feature_fifo,
            );
            b.modules.push(Module::Add(Add {
                core: ModuleCore::new(name),
                in_body: after_project,
                in_shortcut: sc,
                out,
            }));
            cur = out;
        }
    }

    let mut poolfc = None;
    if options.headless {
        b.modules.push(Module::Sink(Sink {
            core: ModuleCore::new(String::from("sink")),
            input: cur,
        }));
    } else {
        let head = &model.head;
        let pf = cfg.pf_for("head.pool_fc");
        if head.in_ch % pf != 0 {
            return Err(SimError::Config(format!(
                "PF {pf} does not divide head channels {}",
                head.in_ch
            )));
        }
        poolfc = Some(b.modules.len());
        b.modules.push(Module::PoolFc(PoolFc::new(
            String::from("head.pool_fc"),
            cur,
            head.pool,
            head.denominator,
            head.in_ch,
            head.h * head.w,
            head.site_cycles(pf),
            head.fc_cycles(pf),
            weights.fc_weight.clone(),
            weights.fc_bias.clone(),
            head.classes,
        )));
    }

    // Source goes first so the fixed stepping order is topological.
    let mut modules = Vec::with_capacity(b.modules.len() + 1);
    modules.push(Module::Source(modules::Source {
        core: ModuleCore::new(String::from("source")),
        out: src_chan,
        stream: VecDeque::new(),
    }));
    modules.extend(b.modules);

    Ok(Pipeline {
        modules,
        channels: b.channels,
        input_h: model.input.h,
        input_w: model.input.w,
        input_c: model.input.c,
        source: 0,
        poolfc: poolfc.map(|i| i + 1),
        taps: b.taps,
        max_cycles: cfg.max_cycles,
    })
}

struct Builder<'c> {
    modules: Vec<Module>,
    channels: Vec<StreamChannel>,
    taps: Vec<Tap>,
    cfg: &'c PipelineConfig,
    tap_layers: bool,
}

impl Builder<'_> {
    fn chan(&mut self, name: &str, capacity: usize, record: bool) -> usize {
        let mut ch = StreamChannel::new(String::from(name), capacity);
        ch.record = record;
        self.channels.push(ch);
        self.channels.len() - 1
    }

    /// Output channel of a layer, registered as a tap point.
    fn tapped_chan(&mut self, layer: &str, desc: &ConvLayerDesc, capacity: usize) -> usize {
        let idx = self.chan(&format!("{layer}.out"), capacity, self.tap_layers);
        self.taps.push(Tap {
            layer: String::from(layer),
            chan: idx,
            h: desc.out_h,
            w: desc.out_w,
            c: desc.out_ch,
        });
        idx
    }

    /// Builds the module(s) of one conv layer and returns its output channel.
    fn conv_stage(
        &mut self,
        desc: &ConvLayerDesc,
        w: &crate::model::ConvWeights,
        input: usize,
    ) -> Result<usize, SimError> {
        let pf = self.cfg.pf_for(&desc.name);
        if desc.in_ch % pf != 0 {
            return Err(SimError::Config(format!(
                "PF {pf} does not divide the {} input channels of `{}`",
                desc.in_ch, desc.name
            )));
        }
        if desc.kernel == 1 {
            let out = self.tapped_chan(&desc.name, desc, self.cfg.feature_fifo);
            self.modules.push(Module::Conv1x1(Conv1x1::new(
                desc.name.clone(),
                input,
                out,
                w,
                desc.act,
                desc.pointwise_cycles(pf),
            )));
            Ok(out)
        } else {
            let slb_name = format!("{}.slb", layer_prefix(&desc.name));
            let tok = self.chan(&format!("{slb_name}.tok"), self.cfg.feature_fifo, false);
            let pairs = self.chan(&format!("{slb_name}.pairs"), self.cfg.feature_fifo, false);
            let fifo_cap = self.cfg.token_fifo.unwrap_or(desc.kernel * desc.in_w);
            if desc.stride == 1 {
                self.modules.push(Module::Slb(SlbModule {
                    core: ModuleCore::new(slb_name),
                    input,
                    out_token: tok,
                    out_pairs: pairs,
                    state: SlbState::new(desc.kernel, desc.in_h, desc.in_w, desc.in_ch, fifo_cap),
                }));
            } else {
                self.modules.push(Module::SlbS2(SlbS2Module {
                    core: ModuleCore::new(slb_name),
                    input,
                    out_token: tok,
                    out_pairs: pairs,
                    state: SlbS2State::new(
                        desc.kernel,
                        desc.in_h,
                        desc.in_w,
                        desc.in_ch,
                        fifo_cap,
                    ),
                }));
            }
            let out = self.tapped_chan(&desc.name, desc, self.cfg.feature_fifo);
            self.modules.push(Module::Kxk(KxkCompute::new(
                desc.name.clone(),
                tok,
                pairs,
                out,
                w.clone(),
                desc.act,
                desc.tap_cycles(pf),
            )));
            Ok(out)
        }
    }
}

/// `bN.dw` -> `bN`, `stem` -> `stem`.
fn layer_prefix(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

/// Drives the pipeline with one input frame to completion.
pub fn simulate(mut pipeline: Pipeline, input: &SparseFrame) -> Result<SimReport, SimError> {
    if input.height != pipeline.input_h
        || input.width != pipeline.input_w
        || input.channels != pipeline.input_c
    {
        return Err(SimError::InputMismatch {
            expected: (pipeline.input_h, pipeline.input_w, pipeline.input_c),
            got: (input.height, input.width, input.channels),
        });
    }
    let mut stream = VecDeque::with_capacity(input.len() + 1);
    for i in 0..input.len() {
        stream.push_back(Msg::Site { token: input.tokens[i], feature: input.feature(i).to_vec() });
    }
    stream.push_back(Msg::End);
    match &mut pipeline.modules[pipeline.source] {
        Module::Source(s) => s.stream = stream,
        _ => unreachable!("source is module 0"),
    }

    let mut cycle: u64 = 0;
    loop {
        if cycle >= pipeline.max_cycles {
            return Err(SimError::CycleLimit { limit: pipeline.max_cycles });
        }
        let mut any_progress = false;
        let mut all_done = true;
        for m in pipeline.modules.iter_mut() {
            if m.core().done {
                continue;
            }
            let step = m.step(&mut pipeline.channels)?;
            any_progress |= step.progress;
            all_done &= m.core().done;
        }
        for ch in pipeline.channels.iter_mut() {
            ch.sync();
        }
        cycle += 1;
        if all_done {
            break;
        }
        if !any_progress {
            let diagnostics = pipeline
                .modules
                .iter()
                .filter(|m| !m.core().done)
                .map(|m| {
                    let core = m.core();
                    match &core.blocked_on {
                        Some(b) => format!("{}: {b}", core.name),
                        None => format!("{}: blocked", core.name),
                    }
                })
                .collect();
            return Err(SimError::Deadlock { cycle, diagnostics });
        }
    }

    let (pooled, logits) = match pipeline.poolfc.map(|i| &pipeline.modules[i]) {
        Some(Module::PoolFc(p)) => (p.pooled.clone(), p.logits.clone()),
        _ => (None, None),
    };
    let tapping = pipeline.channels.iter().any(|c| c.record);
    let taps = if tapping {
        pipeline
            .taps
            .iter()
            .map(|t| TapFrame {
                name: t.layer.clone(),
                frame: log_to_frame(&pipeline.channels[t.chan], t.h, t.w, t.c),
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(SimReport {
        makespan: cycle,
        modules: pipeline
            .modules
            .iter()
            .map(|m| {
                let c = m.core();
                ModuleReport {
                    name: c.name.clone(),
                    busy: c.stats.busy,
                    stall_in: c.stats.stall_in,
                    stall_out: c.stats.stall_out,
                    idle: c.stats.idle,
                    total: cycle,
                }
            })
            .collect(),
        channels: pipeline.channels.iter().map(|c| c.report()).collect(),
        pooled,
        logits,
        taps,
    })
}

fn log_to_frame(ch: &StreamChannel, h: usize, w: usize, c: usize) -> SparseFrame {
    let mut frame = SparseFrame::empty(h, w, c);
    for msg in &ch.log {
        if let Msg::Site { token, feature } = msg {
            frame.tokens.push(*token);
            frame.features.extend_from_slice(feature);
        }
    }
    frame
}

/// Full-density frame of the given dims with unit features; the dense
/// baseline input.
pub fn full_density_frame(h: usize, w: usize, c: usize) -> SparseFrame {
    let mut f = SparseFrame::empty(h, w, c);
    for y in 0..h {
        for x in 0..w {
            f.tokens.push(Token::site(x as u16, y as u16));
            f.features.extend(core::iter::repeat(1.0).take(c));
        }
    }
    f
}

/// The sliding-window dense comparator: the same pipeline and cost model
/// iterating every spatial location (a 100%-density run). Window taps at the
/// frame border still skip out-of-frame positions, so at full input density
/// the sparse and dense designs coincide by construction.
pub fn simulate_dense_baseline(
    model: &ExpandedModel,
    weights: &ModelWeights,
    cfg: &PipelineConfig,
    options: SimOptions,
) -> Result<SimReport, SimError> {
    let dense = full_density_frame(model.input.h, model.input.w, model.input.c);
    let pipeline = build_pipeline(model, weights, cfg, options)?;
    simulate(pipeline, &dense)
}
