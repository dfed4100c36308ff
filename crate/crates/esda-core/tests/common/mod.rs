//! Shared test fixtures: seeded random frames/models and an independent
//! brute-force dense convolution, written in plain dense loops so it shares
//! no code path with the sparse implementations it checks.

#![allow(dead_code)]

use esda_core::frame::{DenseTensor, SparseFrame, tokenize};
use esda_core::kernels::{Activation, AvgDenominator, PoolKind};
use esda_core::model::{
    BlockSpec, ConvWeights, HeadSpec, InputSpec, ModelSpec, StemSpec, strided_dim,
};
use esda_core::token::Token;
use rand::Rng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Frame with an exact number of active sites drawn uniformly; features are
/// bounded away from zero so tokenization is unambiguous.
pub fn random_frame(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize, density: f64) -> SparseFrame {
    let count = ((h * w) as f64 * density).round() as usize;
    let mut sites: Vec<usize> = (0..h * w).collect();
    sites.shuffle(rng);
    sites.truncate(count);
    sites.sort_unstable();
    let mut frame = SparseFrame::empty(h, w, c);
    for s in sites {
        frame.tokens.push(Token::site((s % w) as u16, (s / w) as u16));
        for _ in 0..c {
            let mag: f64 = rng.gen_range(0.1..1.0);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            frame.features.push(mag * sign);
        }
    }
    frame
}

pub fn random_conv(
    rng: &mut ChaCha8Rng,
    kernel: usize,
    stride: usize,
    groups: usize,
    in_ch: usize,
    out_ch: usize,
) -> ConvWeights {
    let n = out_ch * (in_ch / groups) * kernel * kernel;
    ConvWeights {
        kernel,
        stride,
        groups,
        in_channels: in_ch,
        out_channels: out_ch,
        weight: (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        bias: (0..out_ch).map(|_| rng.gen_range(-0.25..0.25)).collect(),
    }
}

/// Brute-force dense convolution: zero padding (k-1)/2, window centered at
/// `(s*ox, s*oy)`, all k² taps visited, correlation (no kernel flip).
pub fn dense_conv(input: &DenseTensor, w: &ConvWeights) -> DenseTensor {
    let u = (w.kernel as i64 - 1) / 2;
    let out_h = strided_dim(input.height, w.stride);
    let out_w = strided_dim(input.width, w.stride);
    let mut out = DenseTensor::zeros(out_h, out_w, w.out_channels);
    let in_per_group = w.in_channels / w.groups;
    let out_per_group = w.out_channels / w.groups;
    for oy in 0..out_h {
        for ox in 0..out_w {
            for o in 0..w.out_channels {
                let g = o / out_per_group;
                let mut acc = w.bias[o];
                for ky in 0..w.kernel as i64 {
                    for kx in 0..w.kernel as i64 {
                        let iy = (w.stride * oy) as i64 + ky - u;
                        let ix = (w.stride * ox) as i64 + kx - u;
                        if ix < 0 || iy < 0 || ix >= input.width as i64 || iy >= input.height as i64
                        {
                            continue;
                        }
                        for il in 0..in_per_group {
                            let tap = w.tap(o, il, (ky * w.kernel as i64 + kx) as usize);
                            acc += tap * input.at(ix as usize, iy as usize, g * in_per_group + il);
                        }
                    }
                }
                *out.at_mut(ox, oy, o) = acc;
            }
        }
    }
    out
}

/// Zeroes every pixel of `dense` that is not active in `mask_frame`.
pub fn mask_to_active(dense: &DenseTensor, mask_frame: &SparseFrame) -> DenseTensor {
    let bm = mask_frame.bitmap();
    let mut out = DenseTensor::zeros(dense.height, dense.width, dense.channels);
    for t in &mask_frame.tokens {
        let _ = &bm;
        for ch in 0..dense.channels {
            *out.at_mut(t.x as usize, t.y as usize, ch) =
                dense.at(t.x as usize, t.y as usize, ch);
        }
    }
    out
}

pub fn max_abs_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
    assert_eq!(a.data.len(), b.data.len());
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Random MBConv model within desk-scale bounds.
pub struct ModelParams {
    pub max_blocks: usize,
    pub max_dim: usize,
    pub in_ch: usize,
    pub channel_choices: Vec<usize>,
    pub kernel_choices: Vec<usize>,
    pub allow_stride2: bool,
    pub with_stem: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            max_blocks: 6,
            max_dim: 32,
            in_ch: 4,
            channel_choices: vec![2, 4, 6, 8],
            kernel_choices: vec![3, 5],
            allow_stride2: true,
            with_stem: true,
        }
    }
}

pub fn random_model(rng: &mut ChaCha8Rng, p: &ModelParams) -> ModelSpec {
    let h = rng.gen_range(5..=p.max_dim);
    let w = rng.gen_range(5..=p.max_dim);
    let n_blocks = rng.gen_range(0..=p.max_blocks);
    let stem = if p.with_stem {
        Some(StemSpec {
            kernel: *p.kernel_choices.choose(rng).unwrap(),
            stride: if p.allow_stride2 && rng.gen_bool(0.5) { 2 } else { 1 },
            out_ch: *p.channel_choices.choose(rng).unwrap(),
        })
    } else {
        None
    };
    let mut blocks = Vec::new();
    let mut cur_ch = stem.map(|s| s.out_ch).unwrap_or(p.in_ch);
    for _ in 0..n_blocks {
        let keep = rng.gen_bool(0.5);
        let out_ch = if keep { cur_ch } else { *p.channel_choices.choose(rng).unwrap() };
        blocks.push(BlockSpec {
            expand: rng.gen_range(1..=3),
            out_ch,
            stride: if p.allow_stride2 && rng.gen_bool(0.3) { 2 } else { 1 },
            kernel: *p.kernel_choices.choose(rng).unwrap(),
        });
        cur_ch = out_ch;
    }
    ModelSpec {
        input: InputSpec { h, w, c: p.in_ch },
        stem,
        blocks,
        head: HeadSpec {
            pool: if rng.gen_bool(0.8) { PoolKind::Avg } else { PoolKind::Max },
            classes: rng.gen_range(2..=5),
            denominator: AvgDenominator::Active,
        },
    }
}

/// Dense reference of one activation pass.
pub fn dense_activation(t: &DenseTensor, kind: Activation) -> DenseTensor {
    let mut out = t.clone();
    for v in out.data.iter_mut() {
        *v = match kind {
            Activation::Relu => v.max(0.0),
            Activation::Relu6 => v.max(0.0).min(6.0),
        };
    }
    out
}

pub fn frame_from_dense(d: &DenseTensor) -> SparseFrame {
    tokenize(d)
}
