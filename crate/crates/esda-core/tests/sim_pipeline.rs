//! Streaming-simulator checks: bit-exact logits against the functional path,
//! tapped inter-module streams densifying to the oracle trace, ordering and
//! termination on adversarial inputs, and the dense-baseline closed forms.

mod common;

use common::*;
use esda_core::frame::SparseFrame;
use esda_core::model::{ModelSpec, ModelWeights};
use esda_core::ops::run_model;
use esda_core::sim::{
    build_pipeline, full_density_frame, simulate, simulate_dense_baseline, PipelineConfig,
    SimError, SimOptions,
};
use esda_core::token::{validate_stream, Token};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn random_pf_config(r: &mut ChaCha8Rng, model: &esda_core::model::ExpandedModel) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    for l in model.conv_layers() {
        let divisors: Vec<usize> = (1..=l.in_ch).filter(|d| l.in_ch % d == 0).collect();
        cfg.pf.insert(l.name.clone(), divisors[r.gen_range(0..divisors.len())]);
    }
    let hd: Vec<usize> = (1..=model.head.in_ch).filter(|d| model.head.in_ch % d == 0).collect();
    cfg.pf.insert("head.pool_fc".into(), hd[r.gen_range(0..hd.len())]);
    cfg
}

/// Simulate and require logits plus every tapped layer to match the oracle
/// bit for bit.
fn check_against_oracle(spec: &ModelSpec, input: &SparseFrame, cfg: &PipelineConfig, seed: u64) {
    let model = spec.expand().unwrap();
    let weights = ModelWeights::generate(&model, seed);
    let trace = run_model(&model, input, &weights).unwrap();
    let pipeline =
        build_pipeline(&model, &weights, cfg, SimOptions { tap_layers: true, headless: false })
            .unwrap();
    let report = simulate(pipeline, input).unwrap_or_else(|e| panic!("simulation failed: {e}"));

    let logits = report.logits.as_ref().expect("full model produces logits");
    assert!(
        bits_equal(logits, &trace.logits),
        "logits diverge:\n sim {:?}\n orc {:?}",
        logits,
        trace.logits
    );
    assert_eq!(report.taps.len(), trace.layers.len(), "one tap per oracle layer");
    for tap in &report.taps {
        let oracle = trace.output_of(&tap.name).expect("oracle layer");
        assert_eq!(tap.frame.tokens, oracle.tokens, "token stream of {} diverges", tap.name);
        assert!(
            bits_equal(&tap.frame.features, &oracle.features),
            "features of {} diverge",
            tap.name
        );
        validate_stream(&tap.frame.token_stream(), tap.frame.width).unwrap();
    }
}

#[test]
fn simulator_matches_oracle_on_random_models() {
    let mut r = rng(21);
    let densities = [0.0, 0.05, 0.2, 0.5, 1.0];
    for trial in 0..60u64 {
        let params = ModelParams { max_blocks: 4, max_dim: 20, ..Default::default() };
        let spec = random_model(&mut r, &params);
        let model = spec.expand().unwrap();
        let density = densities[r.gen_range(0..densities.len())];
        let input = random_frame(&mut r, model.input.h, model.input.w, model.input.c, density);
        let cfg = random_pf_config(&mut r, &model);
        check_against_oracle(&spec, &input, &cfg, 3000 + trial);
    }
}

#[test]
fn adversarial_inputs_terminate_and_match() {
    let mut r = rng(22);
    // Shapes chosen to cover stride-2 blocks, shortcuts and k=5.
    let specs: Vec<ModelSpec> = (0..3)
        .map(|_| {
            random_model(
                &mut r,
                &ModelParams { max_blocks: 3, max_dim: 12, kernel_choices: vec![3, 5], ..Default::default() },
            )
        })
        .collect();
    for (si, spec) in specs.iter().enumerate() {
        let model = spec.expand().unwrap();
        let (h, w, c) = (model.input.h, model.input.w, model.input.c);
        let mut frames: Vec<(&str, SparseFrame)> = Vec::new();
        frames.push(("empty", SparseFrame::empty(h, w, c)));
        frames.push(("full", full_density_frame(h, w, c)));
        // Single row / single column.
        let mut row = SparseFrame::empty(h, w, c);
        for x in 0..w {
            row.tokens.push(Token::site(x as u16, (h / 2) as u16));
            row.features.extend(std::iter::repeat(0.5).take(c));
        }
        frames.push(("single-row", row));
        let mut col = SparseFrame::empty(h, w, c);
        for y in 0..h {
            col.tokens.push(Token::site((w / 2) as u16, y as u16));
            col.features.extend(std::iter::repeat(-0.5).take(c));
        }
        frames.push(("single-column", col));
        // Checkerboard.
        let mut cb = SparseFrame::empty(h, w, c);
        for y in 0..h {
            for x in 0..w {
                if (x + y) % 2 == 0 {
                    cb.tokens.push(Token::site(x as u16, y as u16));
                    cb.features.extend(std::iter::repeat(1.0).take(c));
                }
            }
        }
        frames.push(("checkerboard", cb));
        // Row skipping: rows 0 mod 3 only, exercising the tail-jump clause.
        let mut skip = SparseFrame::empty(h, w, c);
        for y in (0..h).step_by(3) {
            for x in 0..w {
                skip.tokens.push(Token::site(x as u16, y as u16));
                skip.features.extend(std::iter::repeat(0.25).take(c));
            }
        }
        frames.push(("row-skipping", skip));

        for (name, input) in &frames {
            let cfg = PipelineConfig::default();
            let model2 = spec.expand().unwrap();
            let weights = ModelWeights::generate(&model2, 77);
            let trace = run_model(&model2, input, &weights).unwrap();
            let pipeline = build_pipeline(&model2, &weights, &cfg, SimOptions::default()).unwrap();
            match simulate(pipeline, input) {
                Ok(report) => {
                    assert!(
                        bits_equal(report.logits.as_ref().unwrap(), &trace.logits),
                        "spec {si}, input {name}: logits diverge"
                    );
                }
                Err(e) => panic!("spec {si}, input {name}: {e}"),
            }
        }
    }
}

#[test]
fn pf_one_and_pf_max_agree_on_logits() {
    // PF changes cycle counts, never values.
    let mut r = rng(23);
    let spec = random_model(&mut r, &ModelParams { max_blocks: 2, max_dim: 10, ..Default::default() });
    let model = spec.expand().unwrap();
    let weights = ModelWeights::generate(&model, 9);
    let input = random_frame(&mut r, model.input.h, model.input.w, model.input.c, 0.4);

    let slow = simulate(
        build_pipeline(&model, &weights, &PipelineConfig::default(), SimOptions::default()).unwrap(),
        &input,
    )
    .unwrap();
    let fast_cfg = PipelineConfig::with_uniform_pf(&model, usize::MAX);
    let fast = simulate(
        build_pipeline(&model, &weights, &fast_cfg, SimOptions::default()).unwrap(),
        &input,
    )
    .unwrap();
    assert!(bits_equal(slow.logits.as_ref().unwrap(), fast.logits.as_ref().unwrap()));
    assert!(fast.makespan <= slow.makespan);
}

#[test]
fn empty_input_flushes_to_fc_bias() {
    let mut r = rng(24);
    let spec = random_model(&mut r, &ModelParams::default());
    let model = spec.expand().unwrap();
    let weights = ModelWeights::generate(&model, 10);
    let input = SparseFrame::empty(model.input.h, model.input.w, model.input.c);
    let report = simulate(
        build_pipeline(&model, &weights, &PipelineConfig::default(), SimOptions::default()).unwrap(),
        &input,
    )
    .unwrap();
    assert_eq!(report.logits.as_ref().unwrap(), &weights.fc_bias);
    // Flush latency only: a few cycles per pipeline stage.
    let bound = 4 * report.modules.len() as u64 + 8;
    assert!(report.makespan < bound, "empty-input makespan {} >= {bound}", report.makespan);
}

#[test]
fn undersized_token_fifo_deadlocks_with_diagnostics() {
    // Shrinking the SLB token FIFO below a row's worth of tokens violates
    // the deadlock-freedom precondition; the simulator must say so rather
    // than hang or return wrong results.
    let spec: ModelSpec = serde_json::from_str(
        r#"{
            "input": {"h": 8, "w": 8, "c": 2},
            "stem": {"kernel": 3, "stride": 1, "out_ch": 2},
            "blocks": [],
            "head": {"pool": "avg", "classes": 2}
        }"#,
    )
    .unwrap();
    let model = spec.expand().unwrap();
    let weights = ModelWeights::generate(&model, 3);
    let cfg = PipelineConfig { token_fifo: Some(2), ..Default::default() };
    let input = full_density_frame(8, 8, 2);
    let pipeline = build_pipeline(&model, &weights, &cfg, SimOptions::default()).unwrap();
    match simulate(pipeline, &input) {
        Err(SimError::Deadlock { diagnostics, .. }) => {
            assert!(!diagnostics.is_empty());
            assert!(
                diagnostics.iter().any(|d| d.contains("stem")),
                "diagnostics should name the blocked stage: {diagnostics:?}"
            );
        }
        Ok(_) => panic!("expected deadlock"),
        Err(e) => panic!("expected deadlock, got {e}"),
    }
}

#[test]
fn dense_baseline_busy_matches_closed_forms() {
    let spec: ModelSpec = serde_json::from_str(
        r#"{
            "input": {"h": 12, "w": 10, "c": 4},
            "blocks": [{"expand": 2, "out_ch": 4, "stride": 1, "kernel": 3}],
            "head": {"pool": "avg", "classes": 3}
        }"#,
    )
    .unwrap();
    let model = spec.expand().unwrap();
    let weights = ModelWeights::generate(&model, 8);
    let mut cfg = PipelineConfig::default();
    cfg.pf.insert("b0.expand".into(), 2);
    cfg.pf.insert("b0.dw".into(), 4);
    let report = simulate_dense_baseline(&model, &weights, &cfg, SimOptions::default()).unwrap();

    // 1x1 layer: every location, ceil(Cin/PF)*Cout cycles each.
    let sites = 12 * 10u64;
    let expand = report.module("b0.expand").unwrap();
    assert_eq!(expand.busy, sites * (4u64.div_ceil(2)) * 8);

    // Depthwise 3x3: every location, in-bounds window taps, C/PF per tap.
    let mut taps_total = 0u64;
    for y in 0i64..12 {
        for x in 0i64..10 {
            let mut m = 0u64;
            for ky in -1..=1i64 {
                for kx in -1..=1i64 {
                    let (ix, iy) = (x + kx, y + ky);
                    if ix >= 0 && iy >= 0 && ix < 10 && iy < 12 {
                        m += 1;
                    }
                }
            }
            taps_total += m;
        }
    }
    let dw = report.module("b0.dw").unwrap();
    assert_eq!(dw.busy, taps_total * (8u64.div_ceil(4)));

    // Monotone in H·W: a smaller frame takes fewer cycles.
    let small: ModelSpec = serde_json::from_str(
        r#"{
            "input": {"h": 6, "w": 5, "c": 4},
            "blocks": [{"expand": 2, "out_ch": 4, "stride": 1, "kernel": 3}],
            "head": {"pool": "avg", "classes": 3}
        }"#,
    )
    .unwrap();
    let small_model = small.expand().unwrap();
    let small_weights = ModelWeights::generate(&small_model, 8);
    let small_report =
        simulate_dense_baseline(&small_model, &small_weights, &cfg, SimOptions::default()).unwrap();
    assert!(small_report.makespan < report.makespan);
}

#[test]
fn sparse_equals_dense_at_full_density() {
    let mut r = rng(25);
    let spec = random_model(&mut r, &ModelParams { max_blocks: 2, max_dim: 10, ..Default::default() });
    let model = spec.expand().unwrap();
    let weights = ModelWeights::generate(&model, 11);
    let cfg = PipelineConfig::default();
    let dense_input = full_density_frame(model.input.h, model.input.w, model.input.c);
    let sparse_run = simulate(
        build_pipeline(&model, &weights, &cfg, SimOptions::default()).unwrap(),
        &dense_input,
    )
    .unwrap();
    let baseline = simulate_dense_baseline(&model, &weights, &cfg, SimOptions::default()).unwrap();
    assert_eq!(sparse_run.makespan, baseline.makespan);
}

#[test]
fn stride1_modules_relay_token_sequence() {
    let mut r = rng(26);
    let spec: ModelSpec = serde_json::from_str(
        r#"{
            "input": {"h": 9, "w": 9, "c": 2},
            "stem": {"kernel": 3, "stride": 1, "out_ch": 4},
            "blocks": [{"expand": 2, "out_ch": 4, "stride": 1, "kernel": 3}],
            "head": {"pool": "avg", "classes": 2}
        }"#,
    )
    .unwrap();
    let model = spec.expand().unwrap();
    let weights = ModelWeights::generate(&model, 12);
    let input = random_frame(&mut r, 9, 9, 2, 0.25);
    let pipeline = build_pipeline(
        &model,
        &weights,
        &PipelineConfig::default(),
        SimOptions { tap_layers: true, headless: false },
    )
    .unwrap();
    let report = simulate(pipeline, &input).unwrap();
    for tap in &report.taps {
        assert_eq!(tap.frame.tokens, input.tokens, "stride-1 stage {} must relay tokens", tap.name);
    }
}
