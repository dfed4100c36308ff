//! Acceptance suite: one test per exit criterion, each printing a PASS line
//! with its measured numbers (visible under `--nocapture`). Tolerances are
//! pinned here, in code.

use std::collections::BTreeSet;

use esda_cli::report::{fig7_sweep, fig8_monotone, fig8_sweep, BlockBench, SweepSpec};
use esda_cli::run_search;
use esda_core::event::{clip_window, histogram, synth_recording, SynthSpec, WindowSpec};
use esda_core::frame::{Bitmap, SparseFrame};
use esda_core::kernels::{AvgDenominator, PoolKind};
use esda_core::model::{
    BlockSpec, ConvWeights, HeadSpec, InputSpec, ModelSpec, ModelWeights, StemSpec,
};
use esda_core::ops::{run_model, window_stats};
use esda_core::perf::{
    collect_stats, estimate_pipeline, optimize, pf_layers, HwConfig, PerfError, ResourceBudget,
};
use esda_core::search::{rank, sample, SearchSpace};
use esda_core::sim::{
    build_pipeline, full_density_frame, simulate, slb_ready, slb_s2_merge, slb_valid,
    PipelineConfig, SimOptions,
};
use esda_core::token::{validate_stream, Token};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_frame(r: &mut ChaCha8Rng, h: usize, w: usize, c: usize, density: f64) -> SparseFrame {
    let count = ((h * w) as f64 * density).round() as usize;
    let mut sites: Vec<usize> = (0..h * w).collect();
    sites.shuffle(r);
    sites.truncate(count);
    sites.sort_unstable();
    let mut frame = SparseFrame::empty(h, w, c);
    for s in sites {
        frame.tokens.push(Token::site((s % w) as u16, (s / w) as u16));
        for _ in 0..c {
            let mag: f64 = r.gen_range(0.1..1.0);
            frame.features.push(if r.gen::<bool>() { mag } else { -mag });
        }
    }
    frame
}

fn random_bitmap(r: &mut ChaCha8Rng, h: usize, w: usize, density: f64) -> Bitmap {
    let mut bm = Bitmap::new(h, w);
    for y in 0..h {
        for x in 0..w {
            if r.gen::<f64>() < density {
                bm.set(x, y, true);
            }
        }
    }
    bm
}

fn random_model(r: &mut ChaCha8Rng, max_blocks: usize, max_dim: usize) -> ModelSpec {
    let h = r.gen_range(6..=max_dim);
    let w = r.gen_range(6..=max_dim);
    let channel_choices = [2usize, 4, 6, 8];
    let stem = if r.gen_bool(0.8) {
        Some(StemSpec {
            kernel: if r.gen_bool(0.7) { 3 } else { 5 },
            stride: if r.gen_bool(0.5) { 2 } else { 1 },
            out_ch: channel_choices[r.gen_range(0..channel_choices.len())],
        })
    } else {
        None
    };
    let n_blocks = r.gen_range(0..=max_blocks);
    let mut blocks = Vec::new();
    let mut cur = stem.map(|s| s.out_ch).unwrap_or(4);
    for _ in 0..n_blocks {
        let out = if r.gen_bool(0.5) { cur } else { channel_choices[r.gen_range(0..channel_choices.len())] };
        blocks.push(BlockSpec {
            expand: r.gen_range(1..=3),
            out_ch: out,
            stride: if r.gen_bool(0.3) { 2 } else { 1 },
            kernel: if r.gen_bool(0.7) { 3 } else { 5 },
        });
        cur = out;
    }
    ModelSpec {
        input: InputSpec { h, w, c: 4 },
        stem,
        blocks,
        head: HeadSpec {
            pool: if r.gen_bool(0.8) { PoolKind::Avg } else { PoolKind::Max },
            classes: r.gen_range(2..=6),
            denominator: AvgDenominator::Active,
        },
    }
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Criterion 1: simulator logits bit-equal to the functional oracle and every
/// tapped layer densifying to the oracle trace, over 500 random triples.
#[test]
fn acceptance_01_oracle_equivalence() {
    let start = std::time::Instant::now();
    let mut r = rng(101);
    let densities = [0.0, 0.05, 0.2, 0.5, 1.0];
    for trial in 0..500u64 {
        let spec = random_model(&mut r, 6, 32);
        let model = spec.expand().unwrap();
        let weights = ModelWeights::generate(&model, 9_000 + trial);
        let density = densities[r.gen_range(0..densities.len())];
        let input = random_frame(&mut r, model.input.h, model.input.w, model.input.c, density);
        // Random PF assignment, biased toward larger divisors for speed.
        let mut cfg = PipelineConfig::default();
        for l in model.conv_layers() {
            let divisors: Vec<usize> = (1..=l.in_ch).filter(|d| l.in_ch % d == 0).collect();
            let lo = if divisors.len() > 2 { divisors.len() - 3 } else { 0 };
            cfg.pf.insert(l.name.clone(), divisors[r.gen_range(lo..divisors.len())]);
        }
        let pipeline = build_pipeline(
            &model,
            &weights,
            &cfg,
            SimOptions { tap_layers: true, headless: false },
        )
        .unwrap();
        let report = simulate(pipeline, &input)
            .unwrap_or_else(|e| panic!("trial {trial}: simulation failed: {e}"));
        let trace = run_model(&model, &input, &weights).unwrap();
        assert!(
            bits_equal(report.logits.as_ref().unwrap(), &trace.logits),
            "trial {trial}: logits diverge"
        );
        assert_eq!(report.taps.len(), trace.layers.len());
        for tap in &report.taps {
            let oracle = trace.output_of(&tap.name).unwrap();
            assert_eq!(tap.frame.tokens, oracle.tokens, "trial {trial}: {} tokens", tap.name);
            assert!(
                bits_equal(&tap.frame.features, &oracle.features),
                "trial {trial}: {} features",
                tap.name
            );
        }
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 300.0, "runtime target exceeded: {secs:.1}s");
    println!("PASS criterion 1: oracle equivalence on 500 random triples ({secs:.1}s)");
}

/// Criterion 2: every layer op equals dense convolution composed with the
/// submanifold activity mask on 200 random instances, max abs error <= 1e-9.
#[test]
fn acceptance_02_masked_dense_equivalence() {
    // The dense brute force lives beside the core tests; here we drive the
    // same check through whole-model traces so each op kind is covered.
    let mut r = rng(102);
    let mut max_err = 0.0f64;
    for trial in 0..200u64 {
        let spec = random_model(&mut r, 2, 16);
        let model = spec.expand().unwrap();
        let weights = ModelWeights::generate(&model, 20_000 + trial);
        let density = r.gen_range(0.0..=1.0);
        let input = random_frame(&mut r, model.input.h, model.input.w, model.input.c, density);
        let trace = run_model(&model, &input, &weights).unwrap();

        // Dense route, layer by layer.
        let mut dense = esda_core::frame::densify(&input).unwrap();
        let mut wi = 0;
        for (name, frame) in &trace.layers {
            if name.ends_with(".add") {
                // Residual adds are covered by their own dense check; resume
                // the per-layer comparison from the summed frame.
                dense = esda_core::frame::densify(frame).unwrap();
                continue;
            }
            let desc = model.conv_layers()[wi].clone();
            let w = &weights.convs[wi];
            wi += 1;
            dense = dense_conv_ref(&dense, w);
            // Mask to the sparse route's own active set, then compare there.
            for (i, t) in frame.tokens.iter().enumerate() {
                for ch in 0..frame.channels {
                    let mut v = dense.at(t.x as usize, t.y as usize, ch);
                    if let Some(kind) = desc.act {
                        v = match kind {
                            esda_core::kernels::Activation::Relu => v.max(0.0),
                            esda_core::kernels::Activation::Relu6 => v.max(0.0).min(6.0),
                        };
                    }
                    let err = (frame.feature(i)[ch] - v).abs();
                    if err > max_err {
                        max_err = err;
                    }
                }
            }
            // Continue the dense route from the masked sparse frame so
            // residual adds and downstream layers stay aligned.
            dense = esda_core::frame::densify(frame).unwrap();
        }
    }
    assert!(max_err <= 1e-9, "max abs error {max_err}");
    println!("PASS criterion 2: masked-dense equivalence, max abs err {max_err:.3e} <= 1e-9");
}

/// Independent dense convolution for criterion 2 (plain dense loops).
fn dense_conv_ref(
    input: &esda_core::frame::DenseTensor,
    w: &ConvWeights,
) -> esda_core::frame::DenseTensor {
    let u = (w.kernel as i64 - 1) / 2;
    let out_h = input.height.div_ceil(w.stride);
    let out_w = input.width.div_ceil(w.stride);
    let mut out = esda_core::frame::DenseTensor::zeros(out_h, out_w, w.out_channels);
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
                            acc += w.tap(o, il, (ky * w.kernel as i64 + kx) as usize)
                                * input.at(ix as usize, iy as usize, g * in_per_group + il);
                        }
                    }
                }
                *out.at_mut(ox, oy, o) = acc;
            }
        }
    }
    out
}

/// Criterion 3: the valid/ready control reproduces the head/tail comparison
/// on an exhaustive (h, t) grid for k in {3, 5} on 16x16 frames, and valid
/// never fires before the whole in-bounds window has arrived.
#[test]
fn acceptance_03_slb_control_logic() {
    const W: i64 = 16;
    const H: i64 = 16;
    let mut checked = 0u64;
    for k in [3i64, 5] {
        let u = (k - 1) / 2;
        for hy in 0..H {
            for hx in 0..W {
                let h = Token::site(hx as u16, hy as u16);
                for ty in 0..H {
                    for tx in 0..W {
                        let t = Token::site(tx as u16, ty as u16);
                        if ty * W + tx < hy * W + hx {
                            continue; // tail precedes head: not a stream state
                        }
                        // Literal formula.
                        let expect_v =
                            ((tx - hx >= u) && (ty - hy >= u)) || (ty - hy >= u + 1);
                        assert_eq!(slb_valid(h, t, u as usize, false), expect_v);
                        let expect_r = ty - hy <= u;
                        assert_eq!(slb_ready(h, t, u as usize), expect_r);
                        // Soundness: valid implies every in-bounds window
                        // cell has ravel <= ravel(tail).
                        if expect_v {
                            let t_ravel = ty * W + tx;
                            for wy in (hy - u).max(0)..=(hy + u).min(H - 1) {
                                for wx in (hx - u).max(0)..=(hx + u).min(W - 1) {
                                    assert!(
                                        wy * W + wx <= t_ravel,
                                        "k={k} h=({hx},{hy}) t=({tx},{ty}): cell ({wx},{wy}) not buffered"
                                    );
                                }
                            }
                        }
                        checked += 1;
                    }
                }
                // End flush overrides the tail test.
                assert!(slb_valid(h, h, u as usize, true));
            }
        }
    }
    println!("PASS criterion 3: SLB valid/ready on {checked} exhaustive (h,t) pairs, k in {{3,5}}");
}

/// Criterion 4: merged stride-2 output token sets equal the brute-force 2x2
/// grid OR on 1000 random bitmaps, including equal-halved-head cases.
#[test]
fn acceptance_04_stride2_merge() {
    let mut r = rng(104);
    for trial in 0..1000u64 {
        let density = r.gen_range(0.02..=1.0f64);
        let bm = random_bitmap(&mut r, 16, 16, density);
        let mut state = esda_core::sim::SlbS2State::new(3, 16, 16, 1, 16 * 16);
        for y in 0..16 {
            for x in 0..16 {
                if bm.get(x, y) {
                    let t = Token::site(x as u16, y as u16);
                    state.observe(t);
                    state.accept(t, &[1.0]);
                }
            }
        }
        state.end_seen = true;
        // Token-set harness: the fifos are stuffed wholesale (the row buffer
        // only matters under real streaming, which criteria 1 and 5 cover).
        let mut emitted = Vec::new();
        while state.candidate().is_some() {
            assert!(state.head_valid(), "flush must validate every candidate");
            let (tok, _) = state.emit_head();
            emitted.push(tok);
        }
        // Brute-force grid OR.
        let mut expect = BTreeSet::new();
        for y in 0..16 {
            for x in 0..16 {
                if bm.get(x, y) {
                    expect.insert(((y / 2) as u16, (x / 2) as u16));
                }
            }
        }
        let got: BTreeSet<(u16, u16)> = emitted.iter().map(|t| (t.y, t.x)).collect();
        assert_eq!(got, expect, "trial {trial}");
        assert_eq!(got.len(), emitted.len(), "trial {trial}: duplicate outputs");
        // Ravel order of the merged stream.
        let mut stream: Vec<Token> = emitted.clone();
        stream.push(Token::end_marker());
        validate_stream(&stream, 8).unwrap();
    }
    // Directed equal-halved-head case: both FIFO heads in one stride grid.
    let mut state = esda_core::sim::SlbS2State::new(3, 8, 8, 1, 64);
    for t in [Token::site(2, 2), Token::site(3, 3)] {
        state.observe(t);
        state.accept(t, &[1.0]);
    }
    state.end_seen = true;
    assert_eq!(slb_s2_merge(Some(Token::site(2, 2)), Some(Token::site(3, 3)), 4), Some(Token::site(1, 1)));
    let (tok, _) = state.emit_head();
    assert_eq!(tok, Token::site(1, 1));
    assert!(state.candidate().is_none(), "both grid members must be popped");
    println!("PASS criterion 4: stride-2 merge equals grid OR on 1000 bitmaps");
}

/// Criterion 5: adversarial inputs terminate (and still match the oracle);
/// a deadlock diagnostic is a failure.
#[test]
fn acceptance_05_deadlock_freedom() {
    let mut r = rng(105);
    let mut runs = 0u64;
    for shape in 0..4u64 {
        let spec = random_model(&mut r, 3, 14);
        let model = spec.expand().unwrap();
        let weights = ModelWeights::generate(&model, 30_000 + shape);
        let (h, w, c) = (model.input.h, model.input.w, model.input.c);
        let mut adversarial: Vec<(&str, SparseFrame)> = vec![
            ("empty", SparseFrame::empty(h, w, c)),
            ("full", full_density_frame(h, w, c)),
        ];
        let mut row = SparseFrame::empty(h, w, c);
        for x in 0..w {
            row.tokens.push(Token::site(x as u16, (h / 2) as u16));
            row.features.extend(std::iter::repeat(1.0).take(c));
        }
        adversarial.push(("single-row", row));
        let mut col = SparseFrame::empty(h, w, c);
        for y in 0..h {
            col.tokens.push(Token::site((w / 2) as u16, y as u16));
            col.features.extend(std::iter::repeat(1.0).take(c));
        }
        adversarial.push(("single-column", col));
        let mut cb = SparseFrame::empty(h, w, c);
        for y in 0..h {
            for x in 0..w {
                if (x + y) % 2 == 0 {
                    cb.tokens.push(Token::site(x as u16, y as u16));
                    cb.features.extend(std::iter::repeat(1.0).take(c));
                }
            }
        }
        adversarial.push(("checkerboard", cb));
        let mut skip = SparseFrame::empty(h, w, c);
        for y in (0..h).step_by(3) {
            for x in 0..w {
                skip.tokens.push(Token::site(x as u16, y as u16));
                skip.features.extend(std::iter::repeat(1.0).take(c));
            }
        }
        adversarial.push(("row-skipping", skip));

        for (name, input) in &adversarial {
            let trace = run_model(&model, input, &weights).unwrap();
            let pipeline =
                build_pipeline(&model, &weights, &PipelineConfig::default(), SimOptions::default())
                    .unwrap();
            match simulate(pipeline, input) {
                Ok(report) => {
                    assert!(bits_equal(report.logits.as_ref().unwrap(), &trace.logits));
                    runs += 1;
                }
                Err(e) => panic!("shape {shape}, {name}: {e}"),
            }
        }
    }
    println!("PASS criterion 5: {runs} adversarial simulations terminated and matched the oracle");
}

/// Criterion 6: dense/sparse makespan ratio >= 3x at 10% density, <= 2x at
/// 90%, monotone non-increasing across the grid, on reduced-resolution
/// MBConv blocks.
#[test]
fn acceptance_06_fig8_analog() {
    let start = std::time::Instant::now();
    let blocks = vec![
        BlockBench { name: "blk_early".into(), h: 24, w: 24, in_ch: 8, expand: 4, out_ch: 8, stride: 1, kernel: 3 },
        BlockBench { name: "blk_down".into(), h: 24, w: 24, in_ch: 8, expand: 4, out_ch: 12, stride: 2, kernel: 3 },
        BlockBench { name: "blk_mid".into(), h: 12, w: 12, in_ch: 12, expand: 6, out_ch: 12, stride: 1, kernel: 3 },
        BlockBench { name: "blk_late".into(), h: 8, w: 8, in_ch: 16, expand: 6, out_ch: 16, stride: 1, kernel: 3 },
    ];
    let sweep = SweepSpec {
        densities: (1..=9).map(|i| i as f64 / 10.0).collect(),
        reps: 3,
        seed: 616,
        pf: 8,
    };
    let rows = fig8_sweep(&blocks, None, &sweep).unwrap();
    for b in &blocks {
        let at = |d: f64| {
            rows.iter()
                .find(|row| row.block == b.name && (row.density - d).abs() < 1e-9)
                .unwrap()
                .speedup
        };
        assert!(at(0.1) >= 3.0, "{}: speedup at 10% density is {:.2} < 3", b.name, at(0.1));
        assert!(at(0.9) <= 2.0, "{}: speedup at 90% density is {:.2} > 2", b.name, at(0.9));
    }
    for (block, monotone) in fig8_monotone(&rows) {
        assert!(monotone, "{block}: speedup not monotone non-increasing in density");
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 600.0, "runtime target exceeded: {secs:.1}s");
    let peak = rows.iter().map(|r| r.speedup).fold(f64::MIN, f64::max);
    println!("PASS criterion 6: dense/sparse sweep on 4 blocks, peak {peak:.1}x ({secs:.1}s)");
}

/// Criterion 7: on synthetic event histograms (<= 15% input density),
/// submanifold density <= standard-dilation density at every stage, with at
/// least one stage showing a >= 2x gap.
#[test]
fn acceptance_07_fig7_analog() {
    let spec: ModelSpec = serde_json::from_str(
        r#"{
            "input": {"h": 32, "w": 32, "c": 2},
            "stem": {"kernel": 3, "stride": 1, "out_ch": 8},
            "blocks": [
                {"expand": 2, "out_ch": 8, "stride": 1, "kernel": 3},
                {"expand": 2, "out_ch": 12, "stride": 2, "kernel": 3},
                {"expand": 2, "out_ch": 12, "stride": 1, "kernel": 3},
                {"expand": 2, "out_ch": 16, "stride": 2, "kernel": 3}
            ],
            "head": {"pool": "avg", "classes": 4}
        }"#,
    )
    .unwrap();
    let model = spec.expand().unwrap();
    let mut frames = Vec::new();
    for seed in 0..6u64 {
        let rec = synth_recording(&SynthSpec {
            height: 32,
            width: 32,
            duration_us: 20_000,
            density: 0.55,
            noise: 0.001,
            seed,
        });
        let windowed = clip_window(&rec, WindowSpec { t0: 4_000, dt: 1_600 });
        let frame = histogram(&windowed, 32, 32, None).unwrap();
        let density = esda_core::frame::spatial_sparsity(&frame);
        assert!(density <= 0.15, "seed {seed}: input density {density:.3} above 15%");
        assert!(density > 0.0, "seed {seed}: degenerate empty window");
        frames.push(frame);
    }
    let rows = fig7_sweep(&model, &frames).unwrap();
    let mut max_gap = 0.0f64;
    for sub in rows.iter().filter(|r| r.rule == "submanifold") {
        let std_row = rows
            .iter()
            .find(|r| r.rule == "standard" && r.height == sub.height && r.width == sub.width)
            .unwrap();
        assert!(
            sub.density <= std_row.density + 1e-12,
            "{}x{}: submanifold {} > standard {}",
            sub.height,
            sub.width,
            sub.density,
            std_row.density
        );
        if sub.density > 0.0 {
            max_gap = max_gap.max(std_row.density / sub.density);
        }
    }
    assert!(max_gap >= 2.0, "largest standard/submanifold density gap {max_gap:.2} < 2");
    println!("PASS criterion 7: submanifold dominance at every stage, max gap {max_gap:.2}x");
}

/// Criterion 8: closed-form latency vs simulated busy cycles on 100 random
/// stride-1 depthwise layers, mean relative error <= 10%.
#[test]
fn acceptance_08_estimator_fidelity() {
    let mut r = rng(108);
    let mut errs = Vec::new();
    for trial in 0..100u64 {
        let h = r.gen_range(8..=24);
        let w = r.gen_range(8..=24);
        let c = [4usize, 8, 16][r.gen_range(0..3)];
        let k = if r.gen_bool(0.7) { 3 } else { 5 };
        let spec = ModelSpec {
            input: InputSpec { h, w, c },
            stem: None,
            blocks: vec![BlockSpec { expand: 1, out_ch: c, stride: 1, kernel: k }],
            head: HeadSpec { pool: PoolKind::Avg, classes: 2, denominator: AvgDenominator::Active },
        };
        let model = spec.expand().unwrap();
        let weights = ModelWeights::generate(&model, 40_000 + trial);
        let density = r.gen_range(0.05..=0.9);
        let frame = random_frame(&mut r, h, w, c, density);
        let divisors: Vec<usize> = (1..=c).filter(|d| c % d == 0).collect();
        let pf = divisors[r.gen_range(0..divisors.len())];

        // Measured statistics on this very frame.
        let (windows, frac_sum) = window_stats(&frame.bitmap(), k, 1);
        let s_s = esda_core::frame::spatial_sparsity(&frame);
        let s_k = if windows > 0 { frac_sum / windows as f64 } else { 0.0 };
        let dw = model.blocks[0].depthwise.clone();
        let est = esda_core::perf::estimate_layer(&dw, s_s, s_k, pf, 8).unwrap();

        let mut cfg = PipelineConfig::default();
        cfg.pf.insert("b0.dw".into(), pf);
        let pipeline = build_pipeline(&model, &weights, &cfg, SimOptions::default()).unwrap();
        let report = simulate(pipeline, &frame).unwrap();
        let busy = report.module("b0.dw").unwrap().busy as f64;
        let err = if busy == 0.0 { est.lat } else { (est.lat - busy).abs() / busy };
        errs.push(err);
    }
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    assert!(mean <= 0.10, "mean relative error {mean:.4} > 10%");
    println!("PASS criterion 8: estimator vs simulator on 100 depthwise layers, mean err {mean:.2e}");
}

/// Criterion 9: optimizer bottleneck equals exhaustive divisor-tuple search
/// on 50 random instances (<= 6 PF layers, channels <= 32), and every output
/// satisfies the budget.
#[test]
fn acceptance_09_optimizer_optimality() {
    let mut r = rng(109);
    let mut feasible_count = 0;
    for trial in 0..50u64 {
        // Stem + one block + head = at most 6 PF-bearing layers.
        let channel_choices = [4usize, 6, 8, 12, 16, 24, 32];
        let with_stem = r.gen_bool(0.5);
        let c0 = channel_choices[r.gen_range(0..channel_choices.len())];
        let spec = ModelSpec {
            input: InputSpec { h: r.gen_range(8..=16), w: r.gen_range(8..=16), c: if with_stem { 2 } else { c0 } },
            stem: with_stem.then(|| StemSpec { kernel: 3, stride: 1, out_ch: c0 }),
            blocks: vec![BlockSpec {
                expand: r.gen_range(1..=2),
                out_ch: channel_choices[r.gen_range(0..channel_choices.len())],
                stride: if r.gen_bool(0.5) { 2 } else { 1 },
                kernel: 3,
            }],
            head: HeadSpec { pool: PoolKind::Avg, classes: 4, denominator: AvgDenominator::Active },
        };
        let model = spec.expand().unwrap();
        assert!(pf_layers(&model).len() <= 6);
        let weights = ModelWeights::generate(&model, 50_000 + trial);
        let density = r.gen_range(0.05..=0.6);
        let frame = random_frame(&mut r, model.input.h, model.input.w, model.input.c, density);
        let profile = collect_stats(&model, std::slice::from_ref(&frame), &weights).unwrap();
        let budget = ResourceBudget { bram: r.gen_range(4..60), dsp: r.gen_range(4..80) };

        // Exhaustive oracle over all divisor tuples.
        let names = pf_layers(&model);
        let channels: Vec<usize> = model
            .conv_layers()
            .iter()
            .map(|l| l.in_ch)
            .chain(std::iter::once(model.head.in_ch))
            .collect();
        let sets: Vec<Vec<usize>> =
            channels.iter().map(|c| (1..=*c).filter(|d| c % d == 0).collect()).collect();
        let mut best: Option<f64> = None;
        let mut idx = vec![0usize; sets.len()];
        'odometer: loop {
            let mut cfg = HwConfig::default();
            for (i, name) in names.iter().enumerate() {
                cfg.pf.insert(name.clone(), sets[i][idx[i]]);
            }
            let est = estimate_pipeline(&model, &profile, &cfg, 8).unwrap();
            if est.within(budget) {
                best = Some(best.map_or(est.bottleneck, |b: f64| b.min(est.bottleneck)));
            }
            let mut i = 0;
            loop {
                if i == idx.len() {
                    break 'odometer;
                }
                idx[i] += 1;
                if idx[i] < sets[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }

        match optimize(&model, &profile, budget, 8) {
            Ok(cfg) => {
                let est = estimate_pipeline(&model, &profile, &cfg, 8).unwrap();
                assert!(est.within(budget), "trial {trial}: budget violated");
                let expected = best.expect("exhaustive must agree on feasibility");
                assert_eq!(
                    est.bottleneck.to_bits(),
                    expected.to_bits(),
                    "trial {trial}: {} vs exhaustive {}",
                    est.bottleneck,
                    expected
                );
                feasible_count += 1;
            }
            Err(PerfError::Infeasible(_)) => {
                assert!(best.is_none(), "trial {trial}: missed a feasible assignment");
            }
            Err(e) => panic!("trial {trial}: {e}"),
        }
    }
    assert!(feasible_count >= 20, "only {feasible_count} feasible instances");
    println!("PASS criterion 9: optimizer equals exhaustive optimum on 50 instances ({feasible_count} feasible)");
}

/// Criterion 10: fixed-seed search emits identical manifests; every emitted
/// candidate re-validates within budget; the stride-product constraint holds
/// for 100% of samples.
#[test]
fn acceptance_10_search_determinism_soundness() {
    let space = SearchSpace {
        input: InputSpec { h: 24, w: 24, c: 2 },
        stem_kernel: 3,
        stem_stride: 2,
        stem_out_choices: vec![4, 8],
        blocks_min: 2,
        blocks_max: 4,
        downsample_ratio: 8,
        expand_choices: vec![1, 2, 4],
        out_ch_choices: vec![8, 16],
        kernel_choices: vec![3],
        classes: 8,
        bitwidth: 8,
        weight_bits_min: 0,
        weight_bits_max: 2_000_000,
        retries_per_model: 1000,
    };
    let mut r = rng(110);
    let calibration: Vec<Bitmap> = (0..3).map(|_| random_bitmap(&mut r, 24, 24, 0.1)).collect();
    let budget = ResourceBudget { bram: 150, dsp: 64 };

    // Stride product over every sample, not just survivors.
    let samples = sample(&space, 100, 42).unwrap();
    for (i, m) in samples.iter().enumerate() {
        let product: usize = m.stem.as_ref().map(|s| s.stride).unwrap_or(1)
            * m.blocks.iter().map(|b| b.stride).product::<usize>();
        assert_eq!(product, space.downsample_ratio, "sample {i}");
    }

    let a = run_search(&space, &calibration, 60, 8, budget, 8, 42).unwrap();
    let b = run_search(&space, &calibration, 60, 8, budget, 8, 42).unwrap();
    let ja = serde_json::to_string_pretty(&a).unwrap();
    let jb = serde_json::to_string_pretty(&b).unwrap();
    assert_eq!(ja, jb, "same seed must give byte-identical manifests");
    assert!(!a.candidates.is_empty());

    for (i, cand) in a.candidates.iter().enumerate() {
        let model = cand.spec.expand().unwrap();
        let profile =
            esda_core::perf::collect_stats_analytic(&model, &calibration).unwrap();
        let est = estimate_pipeline(&model, &profile, &cand.hwcfg, 8).unwrap();
        assert!(est.within(budget), "candidate {i} exceeds budget");
        assert_eq!(
            est.bottleneck.to_bits(),
            cand.bottleneck_latency.to_bits(),
            "candidate {i} latency does not re-validate"
        );
    }
    // Ranking is latency-sorted with hash tie-breaks.
    for w in a.candidates.windows(2) {
        assert!(w[0].bottleneck_latency <= w[1].bottleneck_latency);
    }
    // rank() itself is permutation-invariant.
    let mut shuffled = samples.clone();
    shuffled.shuffle(&mut rng(9));
    let ranked_a = rank(&samples, &calibration, budget, 8, 5).unwrap();
    let ranked_b = rank(&shuffled, &calibration, budget, 8, 5).unwrap();
    assert_eq!(ranked_a.candidates, ranked_b.candidates);
    println!("PASS criterion 10: search deterministic, candidates sound, stride product 100%");
}

/// Criterion 11: histogram mass equals windowed event count on 1000 random
/// synthetic recordings; consecutive windows partition recordings exactly.
#[test]
fn acceptance_11_ingestion_conservation() {
    let mut r = rng(111);
    for trial in 0..1000u64 {
        let spec = SynthSpec {
            height: r.gen_range(8..=32),
            width: r.gen_range(8..=32),
            duration_us: r.gen_range(1_000..=20_000),
            density: r.gen_range(0.05..=0.9),
            noise: r.gen_range(0.0..=0.01),
            seed: trial,
        };
        let events = synth_recording(&spec);
        let dt = r.gen_range(200..=5_000u64);
        let mut reassembled = Vec::new();
        let mut t0 = 0u64;
        while t0 <= spec.duration_us {
            let windowed = clip_window(&events, WindowSpec { t0, dt });
            let frame =
                histogram(&windowed, spec.height as usize, spec.width as usize, None).unwrap();
            let mass: f64 = frame.features.iter().sum();
            assert_eq!(mass, windowed.len() as f64, "trial {trial}: mass mismatch");
            reassembled.extend(windowed);
            t0 += dt;
        }
        assert_eq!(reassembled, events, "trial {trial}: windows do not partition");
    }
    println!("PASS criterion 11: conservation and partition on 1000 synthetic recordings");
}

/// The acceptance suite exercises the CLI binary end to end once: the bundled
/// synthetic golden run must pass all cross-checks and be reproducible.
#[test]
fn acceptance_cli_golden_run() {
    let bin = env!("CARGO_BIN_EXE_esda");
    let dir = std::env::temp_dir().join(format!("esda_accept_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let model = dir.join("model.json");
    std::fs::write(
        &model,
        r#"{
            "input": {"h": 24, "w": 24, "c": 2},
            "stem": {"kernel": 3, "stride": 2, "out_ch": 8},
            "blocks": [
                {"expand": 2, "out_ch": 8, "stride": 1, "kernel": 3},
                {"expand": 2, "out_ch": 16, "stride": 2, "kernel": 3}
            ],
            "head": {"pool": "avg", "classes": 5}
        }"#,
    )
    .unwrap();
    let run_cfg = dir.join("run.json");
    std::fs::write(
        &run_cfg,
        format!(
            r#"{{
                "recording": {{"synthetic": {{"height": 24, "width": 24, "duration_us": 10000, "density": 0.5, "noise": 0.002, "seed": 5}}}},
                "window": {{"t0": 0, "dt": 1500}},
                "model": {model:?},
                "weights": {{"seed": 7}},
                "bitwidth": 8,
                "out_dir": {out:?}
            }}"#,
            model = model.to_str().unwrap(),
            out = dir.join("out").to_str().unwrap(),
        ),
    )
    .unwrap();
    let run = |args: &[&str]| {
        let out = std::process::Command::new(bin).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "`esda {}` failed:\n{}\n{}",
            args.join(" "),
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8_lossy(&out.stdout).to_string()
    };
    let first = run(&["run", "--config", run_cfg.to_str().unwrap()]);
    assert!(first.contains("logits true"));
    let report_a = std::fs::read(dir.join("out/report.json")).unwrap();
    run(&["run", "--config", run_cfg.to_str().unwrap()]);
    let report_b = std::fs::read(dir.join("out/report.json")).unwrap();
    assert_eq!(report_a, report_b, "fixed-seed run must be byte-identical");
    let _ = std::fs::remove_dir_all(&dir);
    println!("PASS golden run: CLI end-to-end checks green and byte-reproducible");
}

/// Corrupted inputs exit nonzero with a structured error.
#[test]
fn acceptance_cli_corrupt_frame_is_structured_error() {
    let bin = env!("CARGO_BIN_EXE_esda");
    let dir = std::env::temp_dir().join(format!("esda_corrupt_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.esf");
    std::fs::write(&bad, b"{\"height\":4,\"width\":4,\"channels\":1,\"count\":9}\nxx").unwrap();
    let out = std::process::Command::new(bin)
        .args(["validate-config", "--file", bad.to_str().unwrap(), "--kind", "frame"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
    let _ = std::fs::remove_dir_all(&dir);
    println!("PASS golden run: corrupted frame rejected with a structured error");
}
