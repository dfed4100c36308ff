//! Report generation: per-resolution density sweeps (submanifold vs standard
//! dilation), per-block dense/sparse makespan sweeps over input density, and
//! the single-command end-to-end run that cross-checks the simulator against
//! the functional path.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use esda_core::event::{clip_window, histogram, synth_recording, AerFormat, SynthSpec, WindowSpec};
use esda_core::frame::{spatial_sparsity, SparseFrame};
use esda_core::kernels::{AvgDenominator, PoolKind};
use esda_core::model::{
    BlockSpec, ExpandedModel, HeadSpec, InputSpec, ModelSpec, ModelWeights,
};
use esda_core::ops::{propagate_activity, run_model, ConvRule};
use esda_core::perf::{collect_stats, estimate_pipeline, HwConfig, PipelineEstimate};
use esda_core::sim::{
    build_pipeline, simulate, simulate_dense_baseline, ModuleReport, PipelineConfig, SimOptions,
};
use esda_core::token::{validate_stream, Token};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::io::{frame_file, json_files, weights_file};
use crate::parallel::par_map;

// ---------------------------------------------------------------------------
// Fig. 7 analog: per-resolution density under the two convolution rules.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig7Row {
    pub height: usize,
    pub width: usize,
    pub rule: String,
    pub density: f64,
}

/// Mean density at each feature resolution under submanifold and standard
/// dilation rules. The density of a resolution is measured at its last layer
/// (where standard convolution has dilated the most).
pub fn fig7_sweep(model: &ExpandedModel, frames: &[SparseFrame]) -> Result<Vec<Fig7Row>> {
    if frames.is_empty() {
        bail!("no frames given");
    }
    let mut rows = Vec::new();
    for (rule, rule_name) in
        [(ConvRule::Submanifold, "submanifold"), (ConvRule::Standard, "standard")]
    {
        // resolution -> (sum of stage-end densities, in first-seen order)
        let mut stages: Vec<(usize, usize)> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        for frame in frames {
            let input = frame.bitmap();
            let trace = propagate_activity(model, &input, rule);
            let mut snapshots: Vec<esda_core::frame::Bitmap> = vec![input];
            for (_, _, out) in &trace.layers {
                snapshots.push(out.clone());
            }
            // Last snapshot per resolution.
            let mut per_stage: Vec<((usize, usize), f64)> = Vec::new();
            for bm in &snapshots {
                let key = (bm.height, bm.width);
                match per_stage.last_mut() {
                    Some((k, d)) if *k == key => *d = bm.density(),
                    _ => per_stage.push((key, bm.density())),
                }
            }
            if stages.is_empty() {
                stages = per_stage.iter().map(|(k, _)| *k).collect();
                sums = vec![0.0; per_stage.len()];
            }
            for (i, (_, d)) in per_stage.iter().enumerate() {
                sums[i] += d;
            }
        }
        for ((h, w), sum) in stages.iter().zip(&sums) {
            rows.push(Fig7Row {
                height: *h,
                width: *w,
                rule: rule_name.to_string(),
                density: sum / frames.len() as f64,
            });
        }
    }
    Ok(rows)
}

pub fn fig7_csv(rows: &[Fig7Row]) -> String {
    let mut out = String::from("resolution_h,resolution_w,rule,density\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.height, r.width, r.rule, r.density));
    }
    out
}

// ---------------------------------------------------------------------------
// Fig. 8 analog: dense/sparse makespan ratio per block per input density.

/// One MBConv block shape to benchmark in isolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBench {
    pub name: String,
    pub h: usize,
    pub w: usize,
    pub in_ch: usize,
    pub expand: u32,
    pub out_ch: usize,
    pub stride: usize,
    pub kernel: usize,
}

impl BlockBench {
    pub fn to_model(&self) -> ModelSpec {
        ModelSpec {
            input: InputSpec { h: self.h, w: self.w, c: self.in_ch },
            stem: None,
            blocks: vec![BlockSpec {
                expand: self.expand,
                out_ch: self.out_ch,
                stride: self.stride,
                kernel: self.kernel,
            }],
            head: HeadSpec {
                pool: PoolKind::Avg,
                classes: 1,
                denominator: AvgDenominator::Active,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub densities: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// Uniform PF cap applied per layer (clamped to a divisor).
    pub pf: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { densities: (1..=9).map(|i| i as f64 / 10.0).collect(), reps: 3, seed: 7, pf: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig8Row {
    pub block: String,
    pub density: f64,
    pub sparse_cycles: f64,
    pub dense_cycles: f64,
    pub speedup: f64,
}

fn random_bench_frame(seed: u64, h: usize, w: usize, c: usize, density: f64) -> SparseFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = ((h * w) as f64 * density).round() as usize;
    let mut sites: Vec<usize> = (0..h * w).collect();
    sites.shuffle(&mut rng);
    sites.truncate(count);
    sites.sort_unstable();
    let mut frame = SparseFrame::empty(h, w, c);
    for s in sites {
        frame.tokens.push(Token::site((s % w) as u16, (s / w) as u16));
        for _ in 0..c {
            frame.features.push(rng.gen_range(0.1..1.0));
        }
    }
    frame
}

/// Benchmarks each block headless across the density grid. The dense
/// comparator is the identical pipeline iterating every spatial location
/// (its makespan does not depend on the input content).
pub fn fig8_sweep(
    blocks: &[BlockBench],
    cfg: Option<&PipelineConfig>,
    sweep: &SweepSpec,
) -> Result<Vec<Fig8Row>> {
    if sweep.reps == 0 {
        bail!("reps must be >= 1");
    }
    for d in &sweep.densities {
        if !(*d > 0.0 && *d <= 1.0) {
            bail!("densities must lie in (0, 1], got {d}");
        }
    }
    struct Job {
        block_idx: usize,
        density_idx: usize,
        rep: u64,
    }
    let mut prepared = Vec::new();
    for b in blocks {
        let spec = b.to_model();
        let model = spec.expand().map_err(|e| anyhow::anyhow!("block `{}`: {e}", b.name))?;
        let weights = ModelWeights::generate(&model, sweep.seed);
        let cfg = match cfg {
            Some(c) => c.clone(),
            None => PipelineConfig::with_uniform_pf(&model, sweep.pf),
        };
        let dense = simulate_dense_baseline(
            &model,
            &weights,
            &cfg,
            SimOptions { tap_layers: false, headless: true },
        )
        .map_err(|e| anyhow::anyhow!("dense baseline for `{}`: {e}", b.name))?;
        prepared.push((model, weights, cfg, dense.makespan));
    }
    let mut jobs = Vec::new();
    for (bi, _) in blocks.iter().enumerate() {
        for (di, _) in sweep.densities.iter().enumerate() {
            for rep in 0..sweep.reps as u64 {
                jobs.push(Job { block_idx: bi, density_idx: di, rep });
            }
        }
    }
    let makespans: Vec<Result<u64>> = par_map(&jobs, |job| {
        let (model, weights, cfg, _) = &prepared[job.block_idx];
        let density = sweep.densities[job.density_idx];
        let seed = sweep
            .seed
            .wrapping_add(1_000_003 * job.block_idx as u64)
            .wrapping_add(1_009 * job.density_idx as u64)
            .wrapping_add(job.rep);
        let frame = random_bench_frame(seed, model.input.h, model.input.w, model.input.c, density);
        let pipeline = build_pipeline(
            model,
            weights,
            cfg,
            SimOptions { tap_layers: false, headless: true },
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        let report = simulate(pipeline, &frame).map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(report.makespan)
    });

    let mut rows = Vec::new();
    let mut cursor = 0;
    for (bi, b) in blocks.iter().enumerate() {
        for (di, d) in sweep.densities.iter().enumerate() {
            let mut sum = 0.0;
            for _ in 0..sweep.reps {
                let m = makespans[cursor]
                    .as_ref()
                    .map_err(|e| anyhow::anyhow!("block `{}` density {}: {e}", b.name, d))?;
                sum += *m as f64;
                cursor += 1;
            }
            let sparse = sum / sweep.reps as f64;
            let dense = prepared[bi].3 as f64;
            let _ = di;
            rows.push(Fig8Row {
                block: b.name.clone(),
                density: *d,
                sparse_cycles: sparse,
                dense_cycles: dense,
                speedup: dense / sparse,
            });
        }
    }
    Ok(rows)
}

/// Per block: is the speedup monotone non-increasing as density grows?
pub fn fig8_monotone(rows: &[Fig8Row]) -> Vec<(String, bool)> {
    let mut out: Vec<(String, bool)> = Vec::new();
    for row in rows {
        match out.iter().position(|(b, _)| *b == row.block) {
            None => out.push((row.block.clone(), true)),
            Some(_) => {}
        }
    }
    for (block, ok) in out.iter_mut() {
        let mut series: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.block == *block).map(|r| (r.density, r.speedup)).collect();
        series.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        *ok = series.windows(2).all(|w| w[1].1 <= w[0].1);
    }
    out
}

pub fn fig8_csv(rows: &[Fig8Row]) -> String {
    let mut out = String::from("block,density,sparse_cycles,dense_cycles,speedup\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.block, r.density, r.sparse_cycles, r.dense_cycles, r.speedup
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// End-to-end run

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordingSource {
    File { path: PathBuf, format: AerFormat },
    Synthetic { synthetic: SynthSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsSource {
    File { path: PathBuf },
    Seed { seed: u64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SensorDims {
    pub height: usize,
    pub width: usize,
}

fn default_bitwidth() -> u32 {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub recording: RecordingSource,
    #[serde(default)]
    pub sensor: Option<SensorDims>,
    pub window: WindowSpec,
    #[serde(default)]
    pub saturate: Option<f64>,
    pub model: PathBuf,
    pub weights: WeightsSource,
    #[serde(default)]
    pub hwconfig: Option<PathBuf>,
    #[serde(default = "default_bitwidth")]
    pub bitwidth: u32,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunChecks {
    pub logits_match: bool,
    pub taps_match: bool,
    pub streams_valid: bool,
}

impl RunChecks {
    pub fn passed(&self) -> bool {
        self.logits_match && self.taps_match && self.streams_valid
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub input_tokens: usize,
    pub input_density: f64,
    pub makespan: u64,
    pub logits: Vec<f64>,
    pub oracle_logits: Vec<f64>,
    pub checks: RunChecks,
    pub modules: Vec<ModuleReport>,
    pub estimate: PipelineEstimate,
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Ingest → oracle → simulate → cross-check → estimate → report. The report
/// is written to `out_dir/report.json`; a failed cross-check yields
/// `passed() == false` (the CLI exits nonzero on it).
pub fn end_to_end(cfg: &RunConfig) -> Result<RunReport> {
    // Ingest.
    let (events, sensor) = match &cfg.recording {
        RecordingSource::File { path, format } => {
            let rec = crate::io::read_recording(path, *format)?;
            let sensor = rec
                .sensor
                .map(|(w, h)| SensorDims { height: h as usize, width: w as usize })
                .or(cfg.sensor);
            (rec.events, sensor)
        }
        RecordingSource::Synthetic { synthetic } => (
            synth_recording(synthetic),
            Some(SensorDims {
                height: synthetic.height as usize,
                width: synthetic.width as usize,
            }),
        ),
    };
    let sensor = sensor.context("sensor dims unknown: set `sensor` for CSV recordings")?;
    let windowed = clip_window(&events, cfg.window);
    let frame = histogram(&windowed, sensor.height, sensor.width, cfg.saturate)
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    // Model and weights.
    let spec = json_files::load_model(&cfg.model)?;
    let model = spec.expand().map_err(|e| anyhow::anyhow!("{e}"))?;
    if model.input.h != frame.height || model.input.w != frame.width || model.input.c != 2 {
        bail!(
            "model input {}x{}x{} does not match ingested frame {}x{}x2",
            model.input.h,
            model.input.w,
            model.input.c,
            frame.height,
            frame.width
        );
    }
    let weights = match &cfg.weights {
        WeightsSource::File { path } => weights_file::read_weights(path)?,
        WeightsSource::Seed { seed } => ModelWeights::generate(&model, *seed),
    };

    // Oracle and simulation.
    let trace = run_model(&model, &frame, &weights).map_err(|e| anyhow::anyhow!("{e}"))?;
    let pipe_cfg = match &cfg.hwconfig {
        Some(p) => json_files::load_hwconfig(p)?.to_pipeline_config(),
        None => PipelineConfig::default(),
    };
    let pipeline = build_pipeline(
        &model,
        &weights,
        &pipe_cfg,
        SimOptions { tap_layers: true, headless: false },
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let sim = simulate(pipeline, &frame).map_err(|e| anyhow::anyhow!("{e}"))?;

    // Cross-checks.
    let logits = sim.logits.clone().context("full pipeline must produce logits")?;
    let logits_match = bits_equal(&logits, &trace.logits);
    let mut taps_match = sim.taps.len() == trace.layers.len();
    let mut streams_valid = true;
    for tap in &sim.taps {
        match trace.output_of(&tap.name) {
            Some(oracle) => {
                taps_match &= tap.frame.tokens == oracle.tokens
                    && bits_equal(&tap.frame.features, &oracle.features);
            }
            None => taps_match = false,
        }
        streams_valid &= validate_stream(&tap.frame.token_stream(), tap.frame.width).is_ok();
    }

    // Estimate from this frame's own statistics.
    let profile = collect_stats(&model, std::slice::from_ref(&frame), &weights)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let hw = match &cfg.hwconfig {
        Some(p) => json_files::load_hwconfig(p)?,
        None => HwConfig::default(),
    };
    let estimate =
        estimate_pipeline(&model, &profile, &hw, cfg.bitwidth).map_err(|e| anyhow::anyhow!("{e}"))?;

    let report = RunReport {
        input_tokens: frame.len(),
        input_density: spatial_sparsity(&frame),
        makespan: sim.makespan,
        logits,
        oracle_logits: trace.logits.clone(),
        checks: RunChecks { logits_match, taps_match, streams_valid },
        modules: sim.modules.clone(),
        estimate,
    };

    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    frame_file::write_frame(&cfg.out_dir.join("input_frame.esf"), &frame)?;
    json_files::save(&cfg.out_dir.join("report.json"), &report, "run report")?;
    for tap in &sim.taps {
        frame_file::write_frame(
            &cfg.out_dir.join(format!("tap_{}.esf", tap.name.replace('.', "_"))),
            &tap.frame,
        )?;
    }
    Ok(report)
}

/// Writes a CSV next to stdout-style reporting.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
