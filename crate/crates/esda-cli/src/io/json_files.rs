//! JSON config loading with schema-level validation via serde, plus the
//! `validate-config` helper that names the failing schema.

use std::path::Path;

use anyhow::{Context, Result};
use esda_core::model::ModelSpec;
use esda_core::perf::{HwConfig, SparsityProfile};
use esda_core::search::SearchSpace;
use esda_core::sim::PipelineConfig;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn load<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {} `{}`", what, path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {} `{}`", what, path.display()))
}

pub fn save<T: Serialize>(path: &Path, value: &T, what: &str) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {} `{}`", what, path.display()))
}

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let spec: ModelSpec = load(path, "model spec")?;
    spec.expand().map_err(|e| anyhow::anyhow!("invalid model `{}`: {e}", path.display()))?;
    Ok(spec)
}

pub fn load_pipeline_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => load(p, "pipeline config"),
    }
}

pub fn load_profile(path: &Path) -> Result<SparsityProfile> {
    load(path, "sparsity profile")
}

pub fn load_hwconfig(path: &Path) -> Result<HwConfig> {
    load(path, "hardware config")
}

pub fn load_space(path: &Path) -> Result<SearchSpace> {
    load(path, "search space")
}

/// Config kinds `validate-config` understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ConfigKind {
    Model,
    Hwconfig,
    Pipeline,
    Profile,
    Space,
    Run,
    Blocks,
    Frame,
}

pub fn validate_config(path: &Path, kind: ConfigKind) -> Result<String> {
    match kind {
        ConfigKind::Model => {
            let spec = load_model(path)?;
            let m = spec.expand().map_err(|e| anyhow::anyhow!("{e}"))?;
            Ok(format!(
                "model ok: {} blocks, {} conv layers, head {}x{}x{}",
                spec.blocks.len(),
                m.conv_layers().len(),
                m.head.h,
                m.head.w,
                m.head.in_ch
            ))
        }
        ConfigKind::Hwconfig => {
            let cfg = load_hwconfig(path)?;
            Ok(format!("hardware config ok: {} PF entries", cfg.pf.len()))
        }
        ConfigKind::Pipeline => {
            let cfg: PipelineConfig = load(path, "pipeline config")?;
            Ok(format!(
                "pipeline config ok: {} PF entries, feature fifo {}",
                cfg.pf.len(),
                cfg.feature_fifo
            ))
        }
        ConfigKind::Profile => {
            let p = load_profile(path)?;
            Ok(format!("profile ok: {} samples, {} layers", p.samples, p.layers.len()))
        }
        ConfigKind::Space => {
            let s = load_space(path)?;
            Ok(format!(
                "search space ok: blocks {}..={}, downsample {}",
                s.blocks_min, s.blocks_max, s.downsample_ratio
            ))
        }
        ConfigKind::Run => {
            let r: crate::report::RunConfig = load(path, "run config")?;
            Ok(format!("run config ok: model `{}`", r.model.display()))
        }
        ConfigKind::Blocks => {
            let b: Vec<crate::report::BlockBench> = load(path, "block list")?;
            Ok(format!("block list ok: {} blocks", b.len()))
        }
        ConfigKind::Frame => {
            let f = super::frame_file::read_frame(path)?;
            Ok(format!(
                "frame ok: {}x{}x{}, {} tokens",
                f.height,
                f.width,
                f.channels,
                f.len()
            ))
        }
    }
}
