//! `esda` — event-driven submanifold sparse dataflow toolkit.
//!
//! Subcommands tie together ingestion, the functional oracle, the streaming
//! simulator, the latency/resource estimator, the parallel-factor optimizer
//! and the model search. All outputs are machine-parseable (JSON/CSV) and
//! deterministic under fixed seeds; any invariant violation exits nonzero.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use esda_cli::io::{frame_file, json_files, npy, weights_file};
use esda_cli::report::{
    end_to_end, fig7_csv, fig7_sweep, fig8_csv, fig8_monotone, fig8_sweep, BlockBench, RunConfig,
    SweepSpec,
};
use esda_cli::{run_search, SearchManifest};
use esda_core::event::{
    clip_window, encode_bin, encode_csv, histogram, synth_recording, AerFormat, SynthSpec,
    WindowSpec,
};
use esda_core::frame::spatial_sparsity;
use esda_core::model::ModelWeights;
use esda_core::perf::{collect_stats, estimate_pipeline, optimize, ResourceBudget, SparsityProfile};
use esda_core::sim::{build_pipeline, simulate, simulate_dense_baseline, SimOptions};

#[derive(Parser)]
#[command(name = "esda", version, about = "Composable sparse dataflow toolkit for event-based vision")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an AER recording, clip a time window and build the 2-channel
    /// histogram frame.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: CliFormat,
        /// Window start in microseconds.
        #[arg(long)]
        t0: u64,
        /// Window length in microseconds.
        #[arg(long)]
        dt: u64,
        /// Clamp per-pixel counts to this value.
        #[arg(long)]
        saturate: Option<f64>,
        /// Sensor height; required for CSV input (binary headers carry it).
        #[arg(long)]
        height: Option<usize>,
        /// Sensor width; required for CSV input.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic moving-edge recording.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: CliFormat,
        #[arg(long, default_value_t = 32)]
        height: u16,
        #[arg(long, default_value_t = 32)]
        width: u16,
        #[arg(long, default_value_t = 10_000)]
        duration_us: u64,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0.002)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Generate deterministic pseudo-random weights for a model.
    GenWeights {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the streaming pipeline on one frame.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// Pipeline config JSON (PF map and FIFO depths); defaults to PF 1.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Also dump per-layer frames into this directory for oracle diffing.
        #[arg(long)]
        tap_layers: Option<PathBuf>,
        /// Additionally run the dense sliding-window comparator.
        #[arg(long)]
        dense_baseline: bool,
    },
    /// Collect per-layer sparsity statistics over a directory of frames.
    Stats {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Min-max parallel-factor optimization under a resource budget.
    Optimize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        bram: u64,
        #[arg(long)]
        dsp: u64,
        #[arg(long, default_value_t = 8)]
        bitwidth: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-step greedy model search: sample, profile, optimize, rank.
    Search {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        bram: u64,
        #[arg(long)]
        dsp: u64,
        #[arg(long, default_value_t = 8)]
        bitwidth: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-resolution density sweep: submanifold vs standard dilation.
    Fig7 {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dense/sparse makespan ratio sweep over input density, per block.
    Fig8 {
        /// JSON list of block shapes to benchmark.
        #[arg(long)]
        blocks: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated density grid.
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        densities: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Uniform PF cap when no config file is given.
        #[arg(long, default_value_t = 8)]
        pf: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-command pipeline: ingest, simulate, verify against the oracle,
    /// estimate, report. Exits nonzero on any mismatch.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Validate a JSON config or data file against its schema.
    ValidateConfig {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, value_enum)]
        kind: json_files::ConfigKind,
    },
    /// Convert a dense NPY fixture into a sparse frame.
    Tokenize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CliFormat {
    Csv,
    Bin,
}

impl From<CliFormat> for AerFormat {
    fn from(f: CliFormat) -> AerFormat {
        match f {
            CliFormat::Csv => AerFormat::Csv,
            CliFormat::Bin => AerFormat::Bin,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest { input, format, t0, dt, saturate, height, width, out } => {
            let rec = esda_cli::io::read_recording(&input, format.into())?;
            let (h, w) = match (rec.sensor, height, width) {
                (_, Some(h), Some(w)) => (h, w),
                (Some((sw, sh)), _, _) => (sh as usize, sw as usize),
                _ => bail!("CSV recordings need --height and --width"),
            };
            let windowed = clip_window(&rec.events, WindowSpec { t0, dt });
            let frame =
                histogram(&windowed, h, w, saturate).map_err(|e| anyhow::anyhow!("{e}"))?;
            frame_file::write_frame(&out, &frame)?;
            println!(
                "ingested {} events -> {} tokens ({:.2}% density) -> {}",
                windowed.len(),
                frame.len(),
                100.0 * spatial_sparsity(&frame),
                out.display()
            );
            Ok(())
        }
        Command::Synth { out, format, height, width, duration_us, density, noise, seed } => {
            let spec = SynthSpec { height, width, duration_us, density, noise, seed };
            let events = synth_recording(&spec);
            match format {
                CliFormat::Csv => std::fs::write(&out, encode_csv(&events))?,
                CliFormat::Bin => std::fs::write(&out, encode_bin(&events, width, height))?,
            }
            println!("wrote {} events to {}", events.len(), out.display());
            Ok(())
        }
        Command::GenWeights { model, seed, out } => {
            let spec = json_files::load_model(&model)?;
            let expanded = spec.expand().map_err(|e| anyhow::anyhow!("{e}"))?;
            let weights = ModelWeights::generate(&expanded, seed);
            weights_file::write_weights(&out, &expanded, &weights)?;
            println!("wrote weights for {} conv layers to {}", weights.convs.len(), out.display());
            Ok(())
        }
        Command::Simulate { model, weights, config, input, report, tap_layers, dense_baseline } => {
            let spec = json_files::load_model(&model)?;
            let expanded = spec.expand().map_err(|e| anyhow::anyhow!("{e}"))?;
            let w = weights_file::read_weights(&weights)?;
            let cfg = json_files::load_pipeline_config(config.as_deref())?;
            let frame = frame_file::read_frame(&input)?;
            let options = SimOptions { tap_layers: tap_layers.is_some(), headless: false };
            let pipeline = build_pipeline(&expanded, &w, &cfg, options)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let sim = simulate(pipeline, &frame).map_err(|e| anyhow::anyhow!("{e}"))?;
            if let Some(dir) = &tap_layers {
                std::fs::create_dir_all(dir)?;
                for tap in &sim.taps {
                    frame_file::write_frame(
                        &dir.join(format!("{}.esf", tap.name.replace('.', "_"))),
                        &tap.frame,
                    )?;
                }
            }
            json_files::save(&report, &sim, "simulation report")?;
            println!("makespan: {} cycles; logits: {:?}", sim.makespan, sim.logits);
            if dense_baseline {
                let dense = simulate_dense_baseline(&expanded, &w, &cfg, SimOptions::default())
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                let ratio = dense.makespan as f64 / sim.makespan as f64;
                println!(
                    "dense baseline: {} cycles; dense/sparse ratio {:.3}",
                    dense.makespan, ratio
                );
            }
            Ok(())
        }
        Command::Stats { model, weights, frames, out } => {
            let spec = json_files::load_model(&model)?;
            let expanded = spec.expand().map_err(|e| anyhow::anyhow!("{e}"))?;
            let w = weights_file::read_weights(&weights)?;
            let all = frame_file::read_frame_dir(&frames)?;
            // Per-sample profiles in parallel, merged in deterministic order.
            let shards: Vec<Result<SparsityProfile>> = esda_cli::parallel::par_map(&all, |f| {
                collect_stats(&expanded, std::slice::from_ref(f), &w)
                    .map_err(|e| anyhow::anyhow!("{e}"))
            });
            let shards: Result<Vec<SparsityProfile>> = shards.into_iter().collect();
            let profile =
                SparsityProfile::merge(&shards?).map_err(|e| anyhow::anyhow!("{e}"))?;
            json_files::save(&out, &profile, "sparsity profile")?;
            println!(
                "profiled {} frames, {} layers -> {}",
                all.len(),
                profile.layers.len(),
                out.display()
            );
            Ok(())
        }
        Command::Optimize { model, profile, bram, dsp, bitwidth, out } => {
            let spec = json_files::load_model(&model)?;
            let expanded = spec.expand().map_err(|e| anyhow::anyhow!("{e}"))?;
            let prof = json_files::load_profile(&profile)?;
            let budget = ResourceBudget { bram, dsp };
            let cfg = optimize(&expanded, &prof, budget, bitwidth)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let est = estimate_pipeline(&expanded, &prof, &cfg, bitwidth)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            json_files::save(&out, &cfg, "hardware config")?;
            println!(
                "bottleneck {:.1} cycles at `{}`; bram {}/{}, dsp {}/{} -> {}",
                est.bottleneck,
                est.bottleneck_module,
                est.total_bram,
                bram,
                est.total_dsp,
                dsp,
                out.display()
            );
            Ok(())
        }
        Command::Search { space, frames, n, k, bram, dsp, bitwidth, seed, out } => {
            let sp = json_files::load_space(&space)?;
            let calib: Vec<_> =
                frame_file::read_frame_dir(&frames)?.iter().map(|f| f.bitmap()).collect();
            let manifest: SearchManifest =
                run_search(&sp, &calib, n, k, ResourceBudget { bram, dsp }, bitwidth, seed)?;
            json_files::save(&out, &manifest, "search manifest")?;
            if manifest.candidates.is_empty() {
                bail!(
                    "no feasible candidates: {} sampled, {} infeasible under bram {} / dsp {}",
                    manifest.evaluated,
                    manifest.infeasible,
                    bram,
                    dsp
                );
            }
            println!(
                "kept {}/{} candidates (best bottleneck {:.1} cycles) -> {}",
                manifest.candidates.len(),
                manifest.evaluated,
                manifest.candidates[0].bottleneck_latency,
                out.display()
            );
            Ok(())
        }
        Command::Fig7 { model, frames, out } => {
            let spec = json_files::load_model(&model)?;
            let expanded = spec.expand().map_err(|e| anyhow::anyhow!("{e}"))?;
            let all = frame_file::read_frame_dir(&frames)?;
            let rows = fig7_sweep(&expanded, &all)?;
            esda_cli::report::write_text(&out, &fig7_csv(&rows))?;
            for r in &rows {
                println!("{:>3}x{:<3} {:<12} density {:.4}", r.height, r.width, r.rule, r.density);
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Fig8 { blocks, config, densities, reps, seed, pf, out } => {
            let block_list: Vec<BlockBench> = json_files::load(&blocks, "block list")?;
            let cfg = match config {
                Some(p) => Some(json_files::load(&p, "pipeline config")?),
                None => None,
            };
            let grid: Vec<f64> = densities
                .split(',')
                .map(|s| s.trim().parse::<f64>().context("bad density"))
                .collect::<Result<_>>()?;
            let sweep = SweepSpec { densities: grid, reps, seed, pf };
            let rows = fig8_sweep(&block_list, cfg.as_ref(), &sweep)?;
            esda_cli::report::write_text(&out, &fig8_csv(&rows))?;
            for (block, monotone) in fig8_monotone(&rows) {
                let best = rows
                    .iter()
                    .filter(|r| r.block == block)
                    .map(|r| r.speedup)
                    .fold(f64::MIN, f64::max);
                println!("{block}: peak speedup {best:.2}x, monotone non-increasing: {monotone}");
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Run { config } => {
            let run_cfg: RunConfig = json_files::load(&config, "run config")?;
            let report = end_to_end(&run_cfg)?;
            println!(
                "input {} tokens ({:.2}% density), makespan {} cycles",
                report.input_tokens,
                100.0 * report.input_density,
                report.makespan
            );
            println!(
                "checks: logits {} | taps {} | streams {}",
                report.checks.logits_match, report.checks.taps_match, report.checks.streams_valid
            );
            if !report.checks.passed() {
                bail!(
                    "oracle cross-check failed; see {}",
                    run_cfg.out_dir.join("report.json").display()
                );
            }
            println!("report: {}", run_cfg.out_dir.join("report.json").display());
            Ok(())
        }
        Command::ValidateConfig { file, kind } => {
            let summary = json_files::validate_config(&file, kind)?;
            println!("{summary}");
            Ok(())
        }
        Command::Tokenize { input, out } => {
            let dense = npy::read_npy(&input)?;
            let frame = esda_core::frame::tokenize(&dense);
            frame_file::write_frame(&out, &frame)?;
            println!(
                "{} active of {} pixels -> {}",
                frame.len(),
                dense.height * dense.width,
                out.display()
            );
            Ok(())
        }
    }
}
