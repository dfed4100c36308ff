//! Weights container: a one-line JSON manifest of layer shapes followed by a
//! flat little-endian f32 blob, laid out layer by layer (weights then bias)
//! with the classifier matrix and bias last.

use std::path::Path;

use anyhow::{bail, Context, Result};
use esda_core::model::{ConvWeights, ExpandedModel, ModelWeights};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct ConvShape {
    name: String,
    kernel: usize,
    stride: usize,
    groups: usize,
    in_channels: usize,
    out_channels: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    convs: Vec<ConvShape>,
    classes: usize,
    channels: usize,
}

pub fn write_weights(path: &Path, model: &ExpandedModel, weights: &ModelWeights) -> Result<()> {
    weights.validate(model).map_err(|e| anyhow::anyhow!("{e}"))?;
    let manifest = Manifest {
        convs: model
            .conv_layers()
            .iter()
            .zip(&weights.convs)
            .map(|(l, w)| ConvShape {
                name: l.name.clone(),
                kernel: w.kernel,
                stride: w.stride,
                groups: w.groups,
                in_channels: w.in_channels,
                out_channels: w.out_channels,
            })
            .collect(),
        classes: model.head.classes,
        channels: model.head.in_ch,
    };
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, &manifest)?;
    out.push(b'\n');
    let mut push = |vals: &[f64]| {
        for v in vals {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    };
    for w in &weights.convs {
        push(&w.weight);
        push(&w.bias);
    }
    push(&weights.fc_weight);
    push(&weights.fc_bias);
    std::fs::write(path, out).with_context(|| format!("writing weights {}", path.display()))
}

pub fn read_weights(path: &Path) -> Result<ModelWeights> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let nl = bytes.iter().position(|b| *b == b'\n').context("missing manifest line")?;
    let manifest: Manifest = serde_json::from_slice(&bytes[..nl]).context("bad manifest")?;
    let mut body = bytes[nl + 1..].chunks_exact(4);
    let mut take = |n: usize| -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            let chunk = body.next().context("weights blob truncated")?;
            v.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64);
        }
        Ok(v)
    };
    let mut convs = Vec::with_capacity(manifest.convs.len());
    for s in &manifest.convs {
        let n = s.out_channels * (s.in_channels / s.groups.max(1)) * s.kernel * s.kernel;
        let weight = take(n)?;
        let bias = take(s.out_channels)?;
        convs.push(ConvWeights {
            kernel: s.kernel,
            stride: s.stride,
            groups: s.groups,
            in_channels: s.in_channels,
            out_channels: s.out_channels,
            weight,
            bias,
        });
    }
    let fc_weight = take(manifest.classes * manifest.channels)?;
    let fc_bias = take(manifest.classes)?;
    if body.next().is_some() {
        bail!("trailing bytes after weights blob");
    }
    Ok(ModelWeights { convs, fc_weight, fc_bias })
}
