//! Declarative network descriptions and their expansion into the ordered
//! layer and module lists that the oracle, the simulator, the estimator and
//! the optimizer all share.
//!
//! A [`ModelSpec`] is stem + MBConv blocks + head. Each block expands to
//! 1×1 expand → k×k depthwise → 1×1 linear project, with an identity shortcut
//! iff the block keeps stride 1 and its channel count. Batch norm is assumed
//! folded into conv weights and biases.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernels::{Activation, AvgDenominator, PoolKind};

/// Convolution parameters plus folded weights. Weight layout is
/// `[out][in/groups][k][k]` flattened row-major; bias has `out` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvWeights {
    pub kernel: usize,
    pub stride: usize,
    pub groups: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvWeights {
    pub fn expected_weight_len(&self) -> usize {
        self.out_channels * (self.in_channels / self.groups) * self.kernel * self.kernel
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(ModelError::BadShape(format!("kernel {} must be odd", self.kernel)));
        }
        if self.stride != 1 && self.stride != 2 {
            return Err(ModelError::BadShape(format!("stride {} not in {{1,2}}", self.stride)));
        }
        if self.groups == 0
            || self.in_channels % self.groups != 0
            || self.out_channels % self.groups != 0
        {
            return Err(ModelError::BadShape(format!(
                "groups {} must divide in {} and out {}",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        if self.weight.len() != self.expected_weight_len() || self.bias.len() != self.out_channels
        {
            return Err(ModelError::BadShape(String::from("weight or bias length mismatch")));
        }
        Ok(())
    }

    /// Weight of output channel `o`, local input channel `i`, tap `offset`.
    #[inline]
    pub fn tap(&self, o: usize, i_local: usize, offset: usize) -> f64 {
        let taps = self.kernel * self.kernel;
        self.weight[(o * (self.in_channels / self.groups) + i_local) * taps + offset]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StemSpec {
    pub kernel: usize,
    pub stride: usize,
    pub out_ch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    /// Hidden width multiplier of the inverted bottleneck.
    pub expand: u32,
    pub out_ch: usize,
    pub stride: usize,
    pub kernel: usize,
}

fn default_denominator() -> AvgDenominator {
    AvgDenominator::Active
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub pool: PoolKind,
    pub classes: usize,
    /// Average-pool denominator; the streaming default divides by the active
    /// token count rather than H·W.
    #[serde(default = "default_denominator")]
    pub denominator: AvgDenominator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input: InputSpec,
    #[serde(default)]
    pub stem: Option<StemSpec>,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,
    pub head: HeadSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    BadShape(String),
    /// Layer error with the expanded layer name attached.
    Layer { name: String, what: String },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::BadShape(s) => write!(f, "bad model shape: {s}"),
            ModelError::Layer { name, what } => write!(f, "layer {name}: {what}"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Output resolution of one spatial dimension under a given stride.
pub fn strided_dim(d: usize, stride: usize) -> usize {
    d.div_ceil(stride)
}

/// Shape-level description of one expanded convolution layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayerDesc {
    pub name: String,
    pub kernel: usize,
    pub stride: usize,
    pub groups: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub act: Option<Activation>,
}

impl ConvLayerDesc {
    pub fn is_depthwise(&self) -> bool {
        self.groups == self.in_ch && self.groups == self.out_ch
    }

    /// MACs performed per (offset, feature) tap of a k>1 window.
    pub fn macs_per_tap(&self) -> u64 {
        (self.out_ch * (self.in_ch / self.groups)) as u64
    }

    /// Cycles one tap takes on a width-PF MAC group at initiation interval 1.
    /// Exact when PF divides the layer's input channel count.
    pub fn tap_cycles(&self, pf: usize) -> u64 {
        self.macs_per_tap().div_ceil(pf as u64)
    }

    /// Cycles one token takes through a 1×1 module: `ceil(Cin/PF)` beats of
    /// PF input lanes, one pass per output channel.
    pub fn pointwise_cycles(&self, pf: usize) -> u64 {
        (self.in_ch.div_ceil(pf) * self.out_ch) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandedBlock {
    pub expand: ConvLayerDesc,
    pub depthwise: ConvLayerDesc,
    pub project: ConvLayerDesc,
    pub shortcut: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadDesc {
    pub pool: PoolKind,
    pub denominator: AvgDenominator,
    pub classes: usize,
    pub in_ch: usize,
    pub h: usize,
    pub w: usize,
}

impl HeadDesc {
    /// Accumulation cycles per pooled token.
    pub fn site_cycles(&self, pf: usize) -> u64 {
        self.in_ch.div_ceil(pf) as u64
    }

    /// Classifier cycles after the end marker.
    pub fn fc_cycles(&self, pf: usize) -> u64 {
        (self.in_ch.div_ceil(pf) * self.classes) as u64
    }
}

/// The ordered expansion of a [`ModelSpec`]; single source of truth for layer
/// names, shapes and chaining used across oracle, simulator and perf model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandedModel {
    pub input: InputSpec,
    pub stem: Option<ConvLayerDesc>,
    pub blocks: Vec<ExpandedBlock>,
    pub head: HeadDesc,
}

impl ModelSpec {
    pub fn expand(&self) -> Result<ExpandedModel, ModelError> {
        if self.input.h == 0 || self.input.w == 0 || self.input.c == 0 {
            return Err(ModelError::BadShape(String::from("input dims must be positive")));
        }
        let (mut h, mut w, mut c) = (self.input.h, self.input.w, self.input.c);
        let stem = match &self.stem {
            None => None,
            Some(s) => {
                let desc = ConvLayerDesc {
                    name: String::from("stem"),
                    kernel: s.kernel,
                    stride: s.stride,
                    groups: 1,
                    in_ch: c,
                    out_ch: s.out_ch,
                    in_h: h,
                    in_w: w,
                    out_h: strided_dim(h, s.stride),
                    out_w: strided_dim(w, s.stride),
                    act: Some(Activation::Relu6),
                };
                check_layer(&desc)?;
                h = desc.out_h;
                w = desc.out_w;
                c = desc.out_ch;
                Some(desc)
            }
        };
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            if b.expand == 0 {
                return Err(ModelError::BadShape(format!("block {i}: expand ratio 0")));
            }
            let hidden = c * b.expand as usize;
            let expand = ConvLayerDesc {
                name: format!("b{i}.expand"),
                kernel: 1,
                stride: 1,
                groups: 1,
                in_ch: c,
                out_ch: hidden,
                in_h: h,
                in_w: w,
                out_h: h,
                out_w: w,
                act: Some(Activation::Relu6),
            };
            let depthwise = ConvLayerDesc {
                name: format!("b{i}.dw"),
                kernel: b.kernel,
                stride: b.stride,
                groups: hidden,
                in_ch: hidden,
                out_ch: hidden,
                in_h: h,
                in_w: w,
                out_h: strided_dim(h, b.stride),
                out_w: strided_dim(w, b.stride),
                act: Some(Activation::Relu6),
            };
            let project = ConvLayerDesc {
                name: format!("b{i}.project"),
                kernel: 1,
                stride: 1,
                groups: 1,
                in_ch: hidden,
                out_ch: b.out_ch,
                in_h: depthwise.out_h,
                in_w: depthwise.out_w,
                out_h: depthwise.out_h,
                out_w: depthwise.out_w,
                act: None,
            };
            check_layer(&expand)?;
            check_layer(&depthwise)?;
            check_layer(&project)?;
            let shortcut = b.stride == 1 && c == b.out_ch;
            h = project.out_h;
            w = project.out_w;
            c = project.out_ch;
            blocks.push(ExpandedBlock { expand, depthwise, project, shortcut });
        }
        if self.head.classes == 0 {
            return Err(ModelError::BadShape(String::from("head needs at least one class")));
        }
        Ok(ExpandedModel {
            input: self.input,
            stem,
            blocks,
            head: HeadDesc {
                pool: self.head.pool,
                denominator: self.head.denominator,
                classes: self.head.classes,
                in_ch: c,
                h,
                w,
            },
        })
    }

    /// Total number of weight scalars (conv weights + biases + classifier),
    /// for model-size constraints.
    pub fn parameter_count(&self) -> Result<usize, ModelError> {
        Ok(self.expand()?.conv_layers().iter().map(|l| layer_params(l)).sum::<usize>()
            + self.expand().map(|e| e.head.in_ch * e.head.classes + e.head.classes)?)
    }

    /// Stable 64-bit content hash of the spec, for deterministic tie-breaking.
    pub fn spec_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_usize(self.input.h);
        h.write_usize(self.input.w);
        h.write_usize(self.input.c);
        match &self.stem {
            None => h.write_u8(0),
            Some(s) => {
                h.write_u8(1);
                h.write_usize(s.kernel);
                h.write_usize(s.stride);
                h.write_usize(s.out_ch);
            }
        }
        h.write_usize(self.blocks.len());
        for b in &self.blocks {
            h.write_usize(b.expand as usize);
            h.write_usize(b.out_ch);
            h.write_usize(b.stride);
            h.write_usize(b.kernel);
        }
        h.write_u8(match self.head.pool {
            PoolKind::Avg => 0,
            PoolKind::Max => 1,
        });
        h.write_usize(self.head.classes);
        h.finish()
    }
}

fn layer_params(l: &ConvLayerDesc) -> usize {
    l.out_ch * (l.in_ch / l.groups) * l.kernel * l.kernel + l.out_ch
}

fn check_layer(l: &ConvLayerDesc) -> Result<(), ModelError> {
    if l.kernel == 0 || l.kernel % 2 == 0 {
        return Err(ModelError::Layer {
            name: l.name.clone(),
            what: format!("kernel {} must be odd", l.kernel),
        });
    }
    if l.stride != 1 && l.stride != 2 {
        return Err(ModelError::Layer {
            name: l.name.clone(),
            what: format!("stride {} not in {{1,2}}", l.stride),
        });
    }
    if l.out_ch == 0 || l.in_ch == 0 {
        return Err(ModelError::Layer { name: l.name.clone(), what: String::from("zero channels") });
    }
    if l.stride == 2 && l.kernel == 1 {
        return Err(ModelError::Layer {
            name: l.name.clone(),
            what: String::from("stride-2 layers need kernel > 1"),
        });
    }
    if l.kernel == 1 && l.groups != 1 {
        return Err(ModelError::Layer {
            name: l.name.clone(),
            what: String::from("grouped 1x1 layers are not supported"),
        });
    }
    Ok(())
}

impl ExpandedModel {
    /// All convolution layers in execution order (stem, then per block:
    /// expand, depthwise, project).
    pub fn conv_layers(&self) -> Vec<&ConvLayerDesc> {
        let mut out = Vec::new();
        if let Some(s) = &self.stem {
            out.push(s);
        }
        for b in &self.blocks {
            out.push(&b.expand);
            out.push(&b.depthwise);
            out.push(&b.project);
        }
        out
    }

    pub fn find_layer(&self, name: &str) -> Option<&ConvLayerDesc> {
        self.conv_layers().into_iter().find(|l| l.name == name)
    }
}

/// Weights for every expanded layer, in execution order, plus the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub convs: Vec<ConvWeights>,
    /// Row-major `[classes][channels]`.
    pub fc_weight: Vec<f64>,
    pub fc_bias: Vec<f64>,
}

impl ModelWeights {
    /// Checks that the weights fit the expanded model exactly.
    pub fn validate(&self, model: &ExpandedModel) -> Result<(), ModelError> {
        let layers = model.conv_layers();
        if layers.len() != self.convs.len() {
            return Err(ModelError::BadShape(format!(
                "{} conv weight sets for {} layers",
                self.convs.len(),
                layers.len()
            )));
        }
        for (desc, w) in layers.iter().zip(&self.convs) {
            w.validate()?;
            if w.kernel != desc.kernel
                || w.stride != desc.stride
                || w.groups != desc.groups
                || w.in_channels != desc.in_ch
                || w.out_channels != desc.out_ch
            {
                return Err(ModelError::Layer {
                    name: desc.name.clone(),
                    what: String::from("weight shape does not match layer"),
                });
            }
        }
        if self.fc_weight.len() != model.head.classes * model.head.in_ch
            || self.fc_bias.len() != model.head.classes
        {
            return Err(ModelError::BadShape(String::from("classifier shape mismatch")));
        }
        Ok(())
    }

    /// Deterministic pseudo-random weights for a model; layer `i` draws from
    /// its own seeded stream so the result does not depend on walk order.
    pub fn generate(model: &ExpandedModel, seed: u64) -> Self {
        let mut convs = Vec::new();
        for (i, desc) in model.conv_layers().iter().enumerate() {
            let mut rng = layer_rng(seed, i as u64);
            let mut w = ConvWeights {
                kernel: desc.kernel,
                stride: desc.stride,
                groups: desc.groups,
                in_channels: desc.in_ch,
                out_channels: desc.out_ch,
                weight: Vec::new(),
                bias: Vec::new(),
            };
            let n = w.expected_weight_len();
            w.weight = (0..n).map(|_| rng.gen_range(-0.4..0.4)).collect();
            w.bias = (0..desc.out_ch).map(|_| rng.gen_range(-0.2..0.2)).collect();
            convs.push(w);
        }
        let mut rng = layer_rng(seed, 0xFC);
        let fc_weight = (0..model.head.classes * model.head.in_ch)
            .map(|_| rng.gen_range(-0.4..0.4))
            .collect();
        let fc_bias = (0..model.head.classes).map(|_| rng.gen_range(-0.2..0.2)).collect();
        ModelWeights { convs, fc_weight, fc_bias }
    }
}

fn layer_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write_u8(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x100_0000_01b3);
    }

    fn write_usize(&mut self, v: usize) {
        for b in (v as u64).to_le_bytes() {
            self.write_u8(b);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
