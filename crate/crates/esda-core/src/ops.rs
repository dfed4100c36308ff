//! Functional reference implementations of every layer — the golden oracle
//! the streaming simulator is bit-matched against, and the engine behind
//! sparsity-statistics collection.
//!
//! Submanifold semantics: stride-1 layers relay the token set unchanged and
//! compute each active site's feature as the standard convolution over its
//! in-bounds active neighbors (inactive neighbors contribute zero, borders are
//! zero-padded). Stride-2 layers activate an output site iff its 2×2 input
//! stride grid contains an active pixel, with the k×k window centered at the
//! grid's top-left cell `(2·ox, 2·oy)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::frame::{site_index, Bitmap, SparseFrame};
use crate::kernels::{
    add_features, apply_activation, matvec_bias, Activation, AvgDenominator, PoolAccumulator,
    PoolKind,
};
use crate::model::{strided_dim, ConvWeights, ExpandedModel, ModelError, ModelWeights};
use crate::token::Token;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpError {
    ChannelMismatch { expected: usize, got: usize },
    /// Residual operands carry different token sets or dims; signals a
    /// block-wiring bug upstream.
    TokenSetMismatch,
    BadStride { stride: usize },
}

impl fmt::Display for OpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpError::ChannelMismatch { expected, got } => {
                write!(f, "expected {expected} channels, got {got}")
            }
            OpError::TokenSetMismatch => write!(f, "residual operands have different token sets"),
            OpError::BadStride { stride } => write!(f, "unsupported stride {stride}"),
        }
    }
}

impl core::error::Error for OpError {}

fn check_channels(frame: &SparseFrame, w: &ConvWeights) -> Result<(), OpError> {
    if frame.channels != w.in_channels {
        return Err(OpError::ChannelMismatch { expected: w.in_channels, got: frame.channels });
    }
    Ok(())
}

/// Submanifold k×k convolution, stride 1: output token set equals the input
/// token set, in the same order.
pub fn subm_conv(frame: &SparseFrame, w: &ConvWeights) -> Result<SparseFrame, OpError> {
    check_channels(frame, w)?;
    if w.stride != 1 {
        return Err(OpError::BadStride { stride: w.stride });
    }
    let u = (w.kernel - 1) / 2;
    let index = site_index(frame);
    let mut out = SparseFrame::empty(frame.height, frame.width, w.out_channels);
    out.tokens = frame.tokens.clone();
    for t in &frame.tokens {
        let feature = window_feature(frame, &index, w, t.x as i64, t.y as i64, u as i64);
        out.features.extend_from_slice(&feature);
    }
    Ok(out)
}

/// Sparse convolution with stride 2: output site `(ox, oy)` is active iff the
/// input 2×2 grid at `(2ox, 2oy)` contains an active pixel.
pub fn sparse_conv_s2(frame: &SparseFrame, w: &ConvWeights) -> Result<SparseFrame, OpError> {
    check_channels(frame, w)?;
    if w.stride != 2 {
        return Err(OpError::BadStride { stride: w.stride });
    }
    let u = (w.kernel - 1) / 2;
    let index = site_index(frame);
    let out_h = strided_dim(frame.height, 2);
    let out_w = strided_dim(frame.width, 2);
    let mut active = Bitmap::new(out_h, out_w);
    for t in &frame.tokens {
        active.set(t.x as usize / 2, t.y as usize / 2, true);
    }
    let mut out = SparseFrame::empty(out_h, out_w, w.out_channels);
    for oy in 0..out_h {
        for ox in 0..out_w {
            if !active.get(ox, oy) {
                continue;
            }
            out.tokens.push(Token::site(ox as u16, oy as u16));
            let feature =
                window_feature(frame, &index, w, (2 * ox) as i64, (2 * oy) as i64, u as i64);
            out.features.extend_from_slice(&feature);
        }
    }
    Ok(out)
}

/// Weighted sum over the k×k window centered at `(cx, cy)`, taps in ascending
/// offset order, bias folded in first.
fn window_feature(
    frame: &SparseFrame,
    index: &[i32],
    w: &ConvWeights,
    cx: i64,
    cy: i64,
    u: i64,
) -> Vec<f64> {
    let mut acc = crate::kernels::WindowAccumulator::new(
        &w.weight,
        &w.bias,
        w.in_channels,
        w.out_channels,
        w.groups,
        w.kernel,
    );
    let k = w.kernel as i64;
    for ky in 0..k {
        for kx in 0..k {
            let ix = cx + kx - u;
            let iy = cy + ky - u;
            if ix < 0 || iy < 0 || ix >= frame.width as i64 || iy >= frame.height as i64 {
                continue;
            }
            let slot = index[iy as usize * frame.width + ix as usize];
            if slot >= 0 {
                let offset = (ky * k + kx) as usize;
                acc.add_tap(offset, frame.feature(slot as usize));
            }
        }
    }
    acc.finish()
}

/// 1×1 convolution: token set preserved, each feature mapped through the
/// out×in matrix plus bias.
pub fn pointwise_conv(frame: &SparseFrame, w: &ConvWeights) -> Result<SparseFrame, OpError> {
    check_channels(frame, w)?;
    debug_assert_eq!(w.kernel, 1);
    let mut out = SparseFrame::empty(frame.height, frame.width, w.out_channels);
    out.tokens = frame.tokens.clone();
    for i in 0..frame.len() {
        let mapped = matvec_bias(&w.weight, &w.bias, frame.feature(i), w.out_channels);
        out.features.extend_from_slice(&mapped);
    }
    Ok(out)
}

/// Elementwise activation; the token set stays put even if a feature becomes
/// all-zero.
pub fn activation(frame: &SparseFrame, kind: Activation) -> SparseFrame {
    let mut out = frame.clone();
    apply_activation(kind, &mut out.features);
    out
}

/// Elementwise sum of two frames with identical token sets (guaranteed by
/// submanifold stride-1 blocks).
pub fn residual_add(a: &SparseFrame, b: &SparseFrame) -> Result<SparseFrame, OpError> {
    if a.channels != b.channels {
        return Err(OpError::ChannelMismatch { expected: a.channels, got: b.channels });
    }
    if a.height != b.height || a.width != b.width || a.tokens != b.tokens {
        return Err(OpError::TokenSetMismatch);
    }
    let mut out = SparseFrame::empty(a.height, a.width, a.channels);
    out.tokens = a.tokens.clone();
    for i in 0..a.len() {
        out.features.extend_from_slice(&add_features(a.feature(i), b.feature(i)));
    }
    Ok(out)
}

/// Global pooling over the active features; empty frames reduce to the zero
/// vector.
pub fn global_pool(frame: &SparseFrame, kind: PoolKind) -> Vec<f64> {
    global_pool_with(frame, kind, AvgDenominator::Active)
}

pub fn global_pool_with(
    frame: &SparseFrame,
    kind: PoolKind,
    denominator: AvgDenominator,
) -> Vec<f64> {
    let mut acc = PoolAccumulator::new(kind, frame.channels);
    for i in 0..frame.len() {
        acc.add(frame.feature(i));
    }
    acc.finish(denominator, frame.height * frame.width)
}

/// Linear classifier: `logits = weight · v + bias` with a row-major
/// `[classes][channels]` matrix.
pub fn fc(v: &[f64], weight: &[f64], bias: &[f64], classes: usize) -> Vec<f64> {
    matvec_bias(weight, bias, v, classes)
}

/// Frame snapshot after each expanded layer, in execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTrace {
    pub input: SparseFrame,
    /// `(layer name, frame after the layer)`; convs include their fused
    /// activation, residual entries are named `bN.add`.
    pub layers: Vec<(String, SparseFrame)>,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ModelTrace {
    /// Frame feeding the named layer (the output of its predecessor).
    pub fn input_of(&self, name: &str) -> Option<&SparseFrame> {
        let mut prev = &self.input;
        for (n, f) in &self.layers {
            if n == name {
                return Some(prev);
            }
            prev = f;
        }
        if name == "head" {
            return Some(prev);
        }
        None
    }

    pub fn output_of(&self, name: &str) -> Option<&SparseFrame> {
        self.layers.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }
}

fn conv_step(
    frame: &SparseFrame,
    desc_name: &str,
    w: &ConvWeights,
    act: Option<Activation>,
) -> Result<SparseFrame, ModelError> {
    let wrap = |e: OpError| ModelError::Layer {
        name: String::from(desc_name),
        what: alloc::format!("{e}"),
    };
    let mut out = if w.kernel == 1 {
        pointwise_conv(frame, w).map_err(wrap)?
    } else if w.stride == 1 {
        subm_conv(frame, w).map_err(wrap)?
    } else {
        sparse_conv_s2(frame, w).map_err(wrap)?
    };
    if let Some(kind) = act {
        apply_activation(kind, &mut out.features);
    }
    Ok(out)
}

/// Runs the expanded model functionally and keeps the per-layer frame trace
/// for statistics collection and simulator cross-checking.
pub fn run_model(
    model: &ExpandedModel,
    input: &SparseFrame,
    weights: &ModelWeights,
) -> Result<ModelTrace, ModelError> {
    weights.validate(model)?;
    if input.height != model.input.h
        || input.width != model.input.w
        || input.channels != model.input.c
    {
        return Err(ModelError::BadShape(String::from("input frame does not match model input")));
    }
    let mut layers: Vec<(String, SparseFrame)> = Vec::new();
    let mut cur = input.clone();
    let mut next_w = 0usize;
    if let Some(stem) = &model.stem {
        let out = conv_step(&cur, &stem.name, &weights.convs[next_w], stem.act)?;
        next_w += 1;
        layers.push((stem.name.clone(), out.clone()));
        cur = out;
    }
    for b in &model.blocks {
        let block_input = cur.clone();
        for desc in [&b.expand, &b.depthwise, &b.project] {
            let out = conv_step(&cur, &desc.name, &weights.convs[next_w], desc.act)?;
            next_w += 1;
            layers.push((desc.name.clone(), out.clone()));
            cur = out;
        }
        if b.shortcut {
            let name = b.project.name.replace(".project", ".add");
            let summed = residual_add(&cur, &block_input).map_err(|e| ModelError::Layer {
                name: name.clone(),
                what: alloc::format!("{e}"),
            })?;
            layers.push((name, summed.clone()));
            cur = summed;
        }
    }
    let pooled = global_pool_with(&cur, model.head.pool, model.head.denominator);
    let logits = fc(&pooled, &weights.fc_weight, &weights.fc_bias, model.head.classes);
    Ok(ModelTrace { input: input.clone(), layers, pooled, logits })
}

/// Which activation-propagation rule to apply per convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvRule {
    /// Stride-1 layers preserve the active set; stride-2 layers OR each 2×2
    /// stride grid.
    Submanifold,
    /// Standard convolution dilation: a site is active iff any in-bounds tap
    /// of its window is active.
    Standard,
}

/// Per-layer activity of one input bitmap under the chosen rule. Activity is
/// purely geometric — weights never change which sites are active — so this
/// is exact, and it is what makes per-candidate sparsity profiling cheap.
#[derive(Debug, Clone)]
pub struct ActivityTrace {
    /// `(layer name, input bitmap, output bitmap)` for every conv layer.
    pub layers: Vec<(String, Bitmap, Bitmap)>,
}

impl ActivityTrace {
    pub fn output_of(&self, name: &str) -> Option<&Bitmap> {
        self.layers.iter().find(|(n, _, _)| n == name).map(|(_, _, b)| b)
    }
}

pub fn propagate_activity(model: &ExpandedModel, input: &Bitmap, rule: ConvRule) -> ActivityTrace {
    let mut layers = Vec::new();
    let mut cur = input.clone();
    for desc in model.conv_layers() {
        let out = layer_activity(&cur, desc.kernel, desc.stride, rule);
        layers.push((desc.name.clone(), cur.clone(), out.clone()));
        cur = out;
    }
    // Residual adds keep the stride-1 active set; nothing to record.
    ActivityTrace { layers }
}

fn layer_activity(input: &Bitmap, kernel: usize, stride: usize, rule: ConvRule) -> Bitmap {
    match (rule, stride) {
        (ConvRule::Submanifold, 1) => input.clone(),
        (ConvRule::Submanifold, _) => {
            let mut out = Bitmap::new(strided_dim(input.height, 2), strided_dim(input.width, 2));
            for y in 0..input.height {
                for x in 0..input.width {
                    if input.get(x, y) {
                        out.set(x / 2, y / 2, true);
                    }
                }
            }
            out
        }
        (ConvRule::Standard, s) => {
            let u = (kernel as i64 - 1) / 2;
            let out_h = strided_dim(input.height, s);
            let out_w = strided_dim(input.width, s);
            let mut out = Bitmap::new(out_h, out_w);
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let (cx, cy) = ((s * ox) as i64, (s * oy) as i64);
                    'scan: for ky in -u..=u {
                        for kx in -u..=u {
                            let (ix, iy) = (cx + kx, cy + ky);
                            if ix >= 0
                                && iy >= 0
                                && (ix as usize) < input.width
                                && (iy as usize) < input.height
                                && input.get(ix as usize, iy as usize)
                            {
                                out.set(ox, oy, true);
                                break 'scan;
                            }
                        }
                    }
                }
            }
            out
        }
    }
}

/// Window statistics of one layer input under submanifold semantics: the
/// number of emitted windows (active output sites) and the summed fraction of
/// active in-bounds taps per window. `1×1` layers always report full windows.
pub fn window_stats(input: &Bitmap, kernel: usize, stride: usize) -> (u64, f64) {
    if kernel == 1 {
        let n = input.popcount() as u64;
        return (n, n as f64);
    }
    let out = layer_activity(input, kernel, stride, ConvRule::Submanifold);
    let u = (kernel as i64 - 1) / 2;
    let taps = (kernel * kernel) as f64;
    let mut windows = 0u64;
    let mut frac_sum = 0.0;
    for oy in 0..out.height {
        for ox in 0..out.width {
            if !out.get(ox, oy) {
                continue;
            }
            let (cx, cy) = ((stride * ox) as i64, (stride * oy) as i64);
            let mut active = 0usize;
            for ky in -u..=u {
                for kx in -u..=u {
                    let (ix, iy) = (cx + kx, cy + ky);
                    if ix >= 0
                        && iy >= 0
                        && (ix as usize) < input.width
                        && (iy as usize) < input.height
                        && input.get(ix as usize, iy as usize)
                    {
                        active += 1;
                    }
                }
            }
            windows += 1;
            frac_sum += active as f64 / taps;
        }
    }
    (windows, frac_sum)
}
