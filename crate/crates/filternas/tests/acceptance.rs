//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! The criteria pin every tolerance in code: analytic derivatives against
//! finite differences at 1e-6 relative / 1e-8 absolute, normalization at
//! 1e-10, estimator unbiasedness within three standard errors, 4x variance
//! scaling within 25%, BOP consistency at 1e-9 relative, search-sanity
//! success in at least 8 of 10 seeds, interpolation exactness, and
//! byte-identical grid determinism.

use std::collections::HashMap;
use std::time::Instant;

use filternas::arch::{
    make_homogeneous, ArchitectureSpec, BitWidths, HomogeneousTarget, LayerConfig, LayerSpec,
    NetworkConfig, OperationSet,
};
use filternas::complexity::{
    homogeneous_layer_bops, layer_bops, network_bops_expected, network_total, ComplexityOptions,
    InputGroups,
};
use filternas::dist::{sample_network, AlphaParams};
use filternas::harness::{confidence_interval, run_grid_study, run_oracle_check, GridSettings};
use filternas::net::{
    evaluate, forward, init_weights, quantize, train_epochs, Dataset, Selection, SgdMomentum,
    SyntheticSpec, TrainSettings,
};
use filternas::objective::InterpTable;
use filternas::oracle::{exact_grad, grid_optimum, DEFAULT_GUARD};
use filternas::search::{
    estimate_gradient, expected_counts, run_prune_noshare, run_quant_search, SampleSet,
    SearchSettings,
};
use filternas::sigma::Sigma;
use filternas::util::derive_seed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    (a - b).abs() <= abs_floor.max(rel * a.abs().max(b.abs()))
}

fn quant_arch(filters: &[usize], ops: &[(u32, u32)], classes: usize) -> ArchitectureSpec {
    let mut layers = Vec::new();
    let mut in_c = 1;
    for &f in filters {
        layers.push(LayerSpec {
            filters: f,
            in_channels: in_c,
            kernel: 3,
            out_height: 8,
            out_width: 8,
            ops: OperationSet::Quantization(
                ops.iter().map(|&(w, a)| BitWidths::new(w, a)).collect(),
            ),
        });
        in_c = f;
    }
    ArchitectureSpec {
        layers,
        num_classes: classes,
        input_shape: (1, 8, 8),
    }
}

fn prune_arch(filters: &[usize], classes: usize) -> ArchitectureSpec {
    let mut layers = Vec::new();
    let mut in_c = 1;
    for &f in filters {
        layers.push(LayerSpec {
            filters: f,
            in_channels: in_c,
            kernel: 3,
            out_height: 8,
            out_width: 8,
            ops: OperationSet::Pruning,
        });
        in_c = f;
    }
    ArchitectureSpec {
        layers,
        num_classes: classes,
        input_shape: (1, 8, 8),
    }
}

/// Single-layer toy with two operations and two filters: three
/// configurations with losses 1, 2, 3 and exact expected-loss gradient
/// -0.5 at uniform parameters.
fn toy_arch() -> ArchitectureSpec {
    quant_arch(&[2], &[(2, 2), (3, 3)], 4)
}

fn toy_loss(cfg: &NetworkConfig) -> f64 {
    match &cfg.per_layer[0] {
        LayerConfig::Quant(c) => match c[0] {
            2 => 1.0,
            1 => 2.0,
            _ => 3.0,
        },
        _ => unreachable!(),
    }
}

#[test]
fn acceptance_1_derivative_suite_against_finite_differences() {
    let start = Instant::now();
    let report = run_oracle_check(7, 100).unwrap();
    let elapsed = start.elapsed();
    for line in &report.lines {
        assert!(line.passed, "{}: {}", line.name, line.detail);
    }
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "derivative suite took {elapsed:?}, budget is one minute"
    );
    println!(
        "acceptance 1 PASS: analytic derivatives match finite differences on 100 instances in {:.2}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_2_normalization_and_zero_sums() {
    // The same randomized instances as criterion 1; the suite separately
    // reports mass normalization (1e-10) and vanishing derivative sums.
    let report = run_oracle_check(7, 100).unwrap();
    let norm = report
        .lines
        .iter()
        .find(|l| l.name.contains("normalization"))
        .unwrap();
    let sums = report.lines.iter().find(|l| l.name.contains("vanish")).unwrap();
    assert!(norm.passed, "{}", norm.detail);
    assert!(sums.passed, "{}", sums.detail);
    println!(
        "acceptance 2 PASS: {} / {}",
        norm.detail, sums.detail
    );
}

#[test]
fn acceptance_3_estimator_unbiasedness_and_variance_scaling() {
    let arch = toy_arch();
    let alpha = AlphaParams::uniform(&arch);

    // Enumerated ground truth: dJ/d(alpha_0) = -0.5.
    let exact = exact_grad(&arch, &alpha, toy_loss, DEFAULT_GUARD).unwrap()[0][0];
    assert!(close(exact, -0.5, 1e-12, 0.0));

    // Monte-Carlo mean of single-sample estimates over 1e5 draws.
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let n = 100_000usize;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        let cfg = sample_network(&arch, &alpha, &mut rng);
        let sample = SampleSet {
            losses: vec![toy_loss(&cfg)],
            configs: vec![cfg],
        };
        let g = estimate_gradient(&arch, &alpha, &sample).unwrap()[0][0];
        sum += g;
        sumsq += g * g;
    }
    let mean = sum / n as f64;
    let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!(
        (mean - exact).abs() <= 3.0 * se,
        "Monte-Carlo mean {mean} vs exact {exact}, 3 standard errors = {}",
        3.0 * se
    );

    // Empirical variance of the estimate shrinks ~4x per 4x sample growth.
    let variance_at = |size: usize, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reps = 30_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..reps {
            let configs: Vec<NetworkConfig> =
                (0..size).map(|_| sample_network(&arch, &alpha, &mut rng)).collect();
            let losses = configs.iter().map(toy_loss).collect();
            let g = estimate_gradient(&arch, &alpha, &SampleSet { configs, losses }).unwrap()[0][0];
            sum += g;
            sumsq += g * g;
        }
        let m = sum / reps as f64;
        sumsq / reps as f64 - m * m
    };
    let v1 = variance_at(1, 5);
    let v4 = variance_at(4, 6);
    let v16 = variance_at(16, 7);
    for (num, den, label) in [(v1, v4, "1 to 4"), (v4, v16, "4 to 16")] {
        let ratio = num / den;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "variance ratio {label} was {ratio}, expected 4 +- 25%"
        );
    }
    println!(
        "acceptance 3 PASS: estimator mean {mean:.4} vs exact {exact:.4}, variance ratios {:.2} and {:.2}",
        v1 / v4,
        v4 / v16
    );
}

#[test]
fn acceptance_4_filterwise_bops_match_homogeneous_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let out_c = rng.gen_range(1..=32usize);
        let in_c = rng.gen_range(1..=32usize);
        let kernel = [1usize, 3, 5][rng.gen_range(0..3)];
        let h = rng.gen_range(1..=10usize);
        let w = rng.gen_range(1..=10usize);
        let b_w = rng.gen_range(1..=16u32);
        let b_a = rng.gen_range(1..=16u32);
        let layer = LayerSpec {
            filters: out_c,
            in_channels: in_c,
            kernel,
            out_height: h,
            out_width: w,
            ops: OperationSet::Quantization(vec![BitWidths::new(b_w, b_a)]),
        };
        let input = InputGroups::single(in_c as f64, b_a).unwrap();
        let cfg = LayerConfig::Quant(vec![out_c]);
        let filterwise = layer_bops(&layer, &input, &cfg).unwrap();
        let closed = (h * w) as f64 * homogeneous_layer_bops(out_c, in_c, kernel, b_a, b_w);
        let rel = (filterwise - closed).abs() / closed.abs();
        worst = worst.max(rel);
        assert!(
            rel <= 1e-9,
            "shape ({out_c},{in_c},{kernel},{h},{w},{b_a},{b_w}): relative error {rel}"
        );

        // Monotone in every bitwidth.
        assert!(homogeneous_layer_bops(out_c, in_c, kernel, b_a + 1, b_w) >= closed / (h * w) as f64);
        assert!(homogeneous_layer_bops(out_c, in_c, kernel, b_a, b_w + 1) >= closed / (h * w) as f64);
        let wider_w = LayerSpec {
            ops: OperationSet::Quantization(vec![BitWidths::new(b_w + 1, b_a)]),
            ..layer.clone()
        };
        assert!(layer_bops(&wider_w, &input, &cfg).unwrap() >= filterwise);
        let wider_in = InputGroups::single(in_c as f64, b_a + 1).unwrap();
        assert!(layer_bops(&layer, &wider_in, &cfg).unwrap() >= filterwise);
    }
    println!(
        "acceptance 4 PASS: filter-wise BOPs match the closed form on 50 shapes (worst rel {worst:.2e})"
    );
}

fn quant_toy_data(seed: u64) -> Dataset {
    // Four classes at noise 0.3 with enough samples keep 2-bit
    // configurations measurably worse than 8-bit ones even after the
    // shared weights adapt.
    Dataset::synthetic(
        &SyntheticSpec {
            classes: 4,
            per_class: 24,
            channels: 1,
            height: 8,
            width: 8,
            noise: 0.3,
            alpha_frac: 0.4,
            omega_frac: 0.4,
        },
        seed,
    )
    .unwrap()
}

/// Cross-entropy of a homogeneous configuration trained from scratch;
/// identifies which operation the search should prefer.
fn homogeneous_ce(arch: &ArchitectureSpec, data: &Dataset, op: usize, seed: u64) -> f64 {
    let cfg = make_homogeneous(arch, HomogeneousTarget::OpIndex(op)).unwrap();
    let mut w = init_weights(arch, seed).unwrap();
    let mut opt = SgdMomentum::new(&w);
    let settings = TrainSettings {
        batch_size: 8,
        ..TrainSettings::default()
    };
    train_epochs(arch, &mut w, &mut opt, Some(&cfg), data, Selection::Train, 10, &settings).unwrap();
    evaluate(arch, &w, Some(&cfg), data, Selection::Train).unwrap().0
}

#[test]
fn acceptance_5_quantization_search_sanity() {
    let start = Instant::now();
    let arch = quant_arch(&[4, 4], &[(2, 2), (8, 8)], 4);
    let data = quant_toy_data(50);

    // Establish which operation carries the lower cross-entropy.
    let ce0 = homogeneous_ce(&arch, &data, 0, 400);
    let ce1 = homogeneous_ce(&arch, &data, 1, 400);
    let better = if ce1 < ce0 { 1 } else { 0 };
    assert!(
        (ce0 - ce1).abs() > 0.02,
        "toy fails to separate the operations: {ce0} vs {ce1}"
    );

    // Accuracy-only search concentrates probability on that operation.
    let base = SearchSettings {
        sample_size: 8,
        lambda: 0.0,
        alpha_lr: 0.12,
        weight_epochs: 4,
        max_iterations: 99, // five search batches per iteration: 495 steps
        convergence_threshold: 0.0,
        train: TrainSettings {
            batch_size: 8,
            learning_rate: 0.05,
            ..TrainSettings::default()
        },
        ..SearchSettings::default()
    };
    let mut hits = 0;
    for seed in 0..10u64 {
        let settings = SearchSettings { seed, ..base.clone() };
        let (alpha, trace) = run_quant_search(&arch, &data, &settings).unwrap();
        assert!(trace.records.len() <= 500, "budget is 500 parameter steps");
        let mean_p: f64 = (0..arch.layers.len())
            .map(|l| alpha.layer_probs(l).as_multinomial().unwrap()[better])
            .sum::<f64>()
            / arch.layers.len() as f64;
        if mean_p > 0.8 {
            hits += 1;
        }
    }
    assert!(hits >= 8, "only {hits}/10 seeds concentrated above 0.8");

    // With a binding target and the hinge, expected BOPs settle near the
    // target.
    let mut ratio_hits = 0;
    let mut ratios = Vec::new();
    for seed in 0..3u64 {
        let settings = SearchSettings {
            lambda: 50.0,
            target: Some(HomogeneousTarget::OpIndex(0)),
            sigma: Sigma::Hinge,
            seed: 100 + seed,
            ..base.clone()
        };
        let (alpha, _) = run_quant_search(&arch, &data, &settings).unwrap();
        let counts = expected_counts(&arch, &alpha).unwrap();
        let expected_bops =
            network_bops_expected(&arch, &counts, &settings.complexity).unwrap();
        let target_cfg = make_homogeneous(&arch, HomogeneousTarget::OpIndex(0)).unwrap();
        let (_, _, target_bops) =
            network_total(&arch, &target_cfg, &settings.complexity).unwrap();
        let ratio = expected_bops / target_bops;
        ratios.push(ratio);
        if (0.95..=1.05).contains(&ratio) {
            ratio_hits += 1;
        }
    }
    assert!(
        ratio_hits == 3,
        "expected-configuration BOPs missed the 5% band: ratios {ratios:?}"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 600.0,
        "search sanity took {elapsed:?}, budget is ten minutes"
    );
    println!(
        "acceptance 5 PASS: {hits}/10 seeds above 0.8 toward operation {better}, target ratios {ratios:?}, {:.1}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_6_pruning_search_sanity() {
    let arch = prune_arch(&[4], 4);
    let data = Dataset::synthetic(
        &SyntheticSpec {
            classes: 4,
            per_class: 24,
            noise: 0.2,
            ..SyntheticSpec::default()
        },
        91,
    )
    .unwrap();
    let settings = TrainSettings {
        batch_size: 8,
        ..TrainSettings::default()
    };

    // Ground-truth loss per width: train each configuration from scratch
    // to its plateau, averaged over three runs so the capacity ordering is
    // stable against training noise.
    let epochs = 40;
    let mut table: HashMap<String, f64> = HashMap::new();
    for width in 1..=4usize {
        let cfg = NetworkConfig::new(vec![LayerConfig::Prune(width - 1)]);
        let mut total = 0.0;
        for rep in 0..3u64 {
            let mut w =
                init_weights(&arch, derive_seed(17, "table", width as u64, rep)).unwrap();
            let mut opt = SgdMomentum::new(&w);
            train_epochs(
                &arch, &mut w, &mut opt, Some(&cfg), &data, Selection::Train, epochs, &settings,
            )
            .unwrap();
            total += evaluate(&arch, &w, Some(&cfg), &data, Selection::Train).unwrap().0;
        }
        table.insert(cfg.id(), total / 3.0);
    }
    let loss_fn = |cfg: &NetworkConfig| table[&cfg.id()];

    // Width-limited configurations demonstrably underfit: the exhaustive
    // optimum is wide and the narrow end pays a clear penalty.
    let best = grid_optimum(&arch, loss_fn, None, &ComplexityOptions::default(), DEFAULT_GUARD)
        .unwrap();
    let best_width = best.per_layer[0].active_filters().unwrap();
    assert!(best_width >= 3, "optimum width {best_width} is not wide");
    let narrow = table["1"];
    let wide = table["4"];
    assert!(
        narrow - wide > 0.15,
        "no underfitting gap: width 1 at {narrow}, width 4 at {wide}"
    );

    // The oracle gradient at the initial distribution points wider.
    let alpha0 = AlphaParams::from_prob(&arch, 0.5).unwrap();
    let oracle = exact_grad(&arch, &alpha0, loss_fn, DEFAULT_GUARD).unwrap()[0][0];
    assert!(oracle < 0.0, "oracle gradient {oracle} does not favor widening");

    // The no-sharing search moves the parameter in the same direction.
    let mut hits = 0;
    let mut finals = Vec::new();
    for seed in 0..10u64 {
        let search = SearchSettings {
            sample_size: 4,
            lambda: 0.0,
            alpha_lr: 0.08,
            weight_epochs: epochs,
            max_iterations: 10,
            convergence_threshold: 0.0,
            seed,
            train: settings,
            ..SearchSettings::default()
        };
        let (alpha, _) = run_prune_noshare(&arch, &data, &search).unwrap();
        finals.push(alpha.layers[0][0]);
        if alpha.layers[0][0] > 0.0 {
            hits += 1;
        }
    }
    assert!(
        hits >= 8,
        "only {hits}/10 seeds moved the parameter upward: {finals:?}"
    );
    println!(
        "acceptance 6 PASS: optimum width {best_width}, oracle gradient {oracle:.3}, {hits}/10 seeds widened"
    );
}

#[test]
fn acceptance_7_interpolation_loss_exactness() {
    // Hand example: anchors (1, 1.0), (2, 0.6), (4, 0.5); z = 3 -> 0.55.
    let table = InterpTable::new(vec![
        filternas::objective::InterpAnchor {
            id: "a".into(),
            z: 1.0,
            ce_mean: 1.0,
        },
        filternas::objective::InterpAnchor {
            id: "b".into(),
            z: 2.0,
            ce_mean: 0.6,
        },
        filternas::objective::InterpAnchor {
            id: "c".into(),
            z: 4.0,
            ce_mean: 0.5,
        },
    ])
    .unwrap();
    let mid = table.interp_ce(3.0).unwrap();
    assert!(
        close(mid, 0.55, 0.0, 1e-12),
        "interpolated value {mid} vs 0.55"
    );

    // Anchors built by real training sessions evaluate to sigma(0) exactly
    // against their own table.
    let arch = prune_arch(&[4, 4], 4);
    let data = Dataset::synthetic(
        &SyntheticSpec {
            per_class: 8,
            ..SyntheticSpec::default()
        },
        8,
    )
    .unwrap();
    let built = InterpTable::build(
        &arch,
        &data,
        &[0.25, 0.5, 0.75, 1.0],
        5,
        2,
        &TrainSettings::default(),
        2024,
    )
    .unwrap();
    for (i, anchor) in built.anchors().iter().enumerate() {
        let ratio = [0.25, 0.5, 0.75, 1.0][i];
        let cfg = make_homogeneous(&arch, HomogeneousTarget::WidthRatio(ratio)).unwrap();
        for sigma in [Sigma::Identity, Sigma::Hinge, Sigma::LeakyRelu, Sigma::Sigmoid] {
            let loss = filternas::objective::config_interpolation_loss(
                anchor.ce_mean,
                &arch,
                &cfg,
                &built,
                sigma,
                &ComplexityOptions::default(),
            )
            .unwrap();
            assert_eq!(loss, sigma.apply(0.0), "{} at anchor {}", sigma.name(), anchor.id);
        }
    }
    println!("acceptance 7 PASS: interpolation exact at anchors and on the hand example");
}

#[test]
fn acceptance_8_grid_protocol_and_determinism() {
    // Hand confidence interval: samples (0, 2) at the one-sigma coverage.
    let (mean, half) = confidence_interval(&[0.0, 2.0], 0.6827);
    assert_eq!(mean, 1.0);
    assert!(
        close(half, 1.0, 0.0, 1e-3),
        "half-width {half} vs 1 (coverage level is the rounded one-sigma value)"
    );

    // Full toy grid, twice, byte-identical tables.
    let arch = prune_arch(&[4], 2);
    let data = Dataset::synthetic(
        &SyntheticSpec {
            classes: 2,
            per_class: 10,
            noise: 0.1,
            ..SyntheticSpec::default()
        },
        14,
    )
    .unwrap();
    let grid = GridSettings {
        repeats: 3,
        patience: 3,
        max_epochs: 6,
        include_homogeneous: true,
        extra_widths: vec![vec![2]],
        ..GridSettings::default()
    };
    let configs = filternas::harness::grid_configs(&arch, &grid).unwrap();
    assert!(configs.len() <= 10);
    let train = TrainSettings {
        batch_size: 8,
        ..TrainSettings::default()
    };
    let opts = ComplexityOptions::default();

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let results =
            run_grid_study(&arch, &data, &configs, &grid, &train, &opts, 777).unwrap();
        assert!(results.iter().all(|r| r.samples.len() == 3));
        assert!(results.iter().all(|r| r.failures.is_empty()));
        filternas::harness::emit_grid(&results, dir.path()).unwrap();
    }
    for name in ["records.jsonl", "table.csv", "plot.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identically seeded runs");
    }
    println!("acceptance 8 PASS: hand interval reproduced, grid tables byte-identical");
}

#[test]
fn acceptance_9_slimmable_and_quantizer_unit_properties() {
    // Full-width pruning forward is exactly the plain forward.
    let arch = prune_arch(&[4, 4], 4);
    let w = init_weights(&arch, 3).unwrap();
    let data = Dataset::synthetic(&SyntheticSpec::default(), 4).unwrap();
    let batch = data.indices(Selection::Validation);
    let full = make_homogeneous(&arch, HomogeneousTarget::WidthRatio(1.0)).unwrap();
    let a = forward(&arch, &w, Some(&full), &data, &batch).unwrap();
    let b = forward(&arch, &w, None, &data, &batch).unwrap();
    assert_eq!(a, b);

    // Quantizer idempotence, exact.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let bits = rng.gen_range(1..=16);
        let values: Vec<f64> = (0..rng.gen_range(1..32)).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let once = quantize(&values, bits);
        let twice = quantize(&once, bits);
        assert_eq!(once, twice);
    }

    // 32-bit forward matches the float forward within 1e-4.
    let qarch = quant_arch(&[4, 4], &[(32, 32)], 4);
    let qw = init_weights(&qarch, 3).unwrap();
    let wide = make_homogeneous(&qarch, HomogeneousTarget::OpIndex(0)).unwrap();
    let ql = forward(&qarch, &qw, Some(&wide), &data, &batch).unwrap();
    let fl = forward(&qarch, &qw, None, &data, &batch).unwrap();
    for (qr, fr) in ql.iter().zip(&fl) {
        for (&qa, &fa) in qr.iter().zip(fr) {
            assert!((qa - fa).abs() <= 1e-4, "{qa} vs {fa}");
        }
    }
    println!("acceptance 9 PASS: slimmable identity, quantizer idempotence, wide-bit equivalence");
}
