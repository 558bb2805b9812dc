//! Acceptance suite. Runs without the libtest harness so the verdict lines are
//! always printed. Exits nonzero if any criterion fails, except those listed in
//! `KNOWN_RED`, which still print FAIL.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flarebench_core::augment::{flip_horizontal, flip_vertical, invert_polarity};
use flarebench_core::batch::{self, Command};
use flarebench_core::dataset::{dataset_stats, FlareClass, FlareLabel, GoesLetter, Label};
use flarebench_core::evaluate::{
    calibrate_threshold, calibrate_threshold_with, confusion_counts, css, hss, merge_counts, tss,
    ConfusionCounts, PredictionRecord,
};
use flarebench_core::io::{render_prediction_csv, write_file, write_patch_bundle, RunConfig};
use flarebench_core::raster::{
    clamp_flux, clamp_value, scale_value, ArBitmap, FluxRaster, PatchMetadata, PipelineConfig,
};
use flarebench_core::window::select_max_usflux_window;
use flarebench_core::Exec;

use common::{predictions, snapshot, utc, write_dataset};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < budget, || {
        format!("took {took:?}, budget {budget:?}")
    })?;
    Ok(took)
}

// (TSS, HSS, reported CSS) for every row of the published comparison table.
const CSS_TABLE: [(f64, f64, f64); 16] = [
    (0.66, 0.14, 0.31),
    (0.45, 0.44, 0.44),
    (0.60, 0.45, 0.52),
    (0.60, 0.44, 0.51),
    (0.72, 0.31, 0.47),
    (0.54, 0.19, 0.32),
    (0.76, 0.51, 0.62),
    (0.81, 0.22, 0.42),
    (0.81, 0.43, 0.59),
    (0.58, 0.43, 0.50),
    (0.59, 0.44, 0.51),
    (0.64, 0.34, 0.47),
    (0.80, 0.26, 0.45),
    (0.58, 0.38, 0.47),
    (0.56, 0.40, 0.48),
    (0.56, 0.34, 0.44),
];
const CSS_TOL: f64 = 0.01;

fn css_table_regression() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for &(t, h, want) in &CSS_TABLE {
        let got = css(t, h);
        let err = (got - want).abs();
        worst = worst.max(err);
        ensure(err <= CSS_TOL, || {
            format!("css({t}, {h}) = {got:.4}, reported {want}")
        })?;
    }
    let took = within_budget(start, Duration::from_secs(1))?;
    Ok(format!(
        "{} rows, max |err| {worst:.4}, {took:?}",
        CSS_TABLE.len()
    ))
}

fn near_limb_css() -> Outcome {
    let got = css(0.48, 0.32);
    ensure((got - 0.39).abs() <= CSS_TOL, || format!("css = {got:.4}"))?;
    ensure((got - 0.392).abs() < 5e-4, || {
        format!("css = {got:.4}, expected 0.392")
    })?;
    Ok(format!("css(0.48, 0.32) = {got:.4}"))
}

fn imbalance_ratio() -> Outcome {
    let (nf, fl) = (501_106usize, 10_315usize);
    let nf_label = FlareLabel::from_max_class(FlareClass::flare(GoesLetter::C, 15));
    let fl_label = FlareLabel::from_max_class(FlareClass::flare(GoesLetter::M, 10));
    let labels: Vec<FlareLabel> = std::iter::repeat_n(nf_label, nf)
        .chain(std::iter::repeat_n(fl_label, fl))
        .collect();
    let stats = dataset_stats(&labels);
    ensure(stats.nf == nf && stats.fl == fl, || format!("{stats:?}"))?;
    let ratio = stats.imbalance_ratio().ok_or("no ratio")?;
    ensure(format!("{ratio:.2}") == "48.58", || {
        format!("ratio {ratio}")
    })?;
    let label = stats.imbalance_label().ok_or("no label")?;
    ensure(label == "~1:49", || format!("label {label}"))?;
    Ok(format!("{nf}/{fl} = {ratio:.2}, {label}"))
}

/// Exhaustive argmax over every window position, first maximum in raster order.
fn brute_window(r: &FluxRaster, side: usize) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for top in 0..=r.height() - side {
        for left in 0..=r.width() - side {
            let mut s = 0.0;
            for i in top..top + side {
                for j in left..left + side {
                    s += r.get(i, j).abs();
                }
            }
            if s > best.2 {
                best = (top, left, s);
            }
        }
    }
    best
}

fn window_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sides = [2usize, 4, 8, 16];
    let mut worst_rel = 0.0f64;
    for case in 0..1000 {
        let side = sides[case % sides.len()];
        let h = rng.gen_range(side..=64);
        let w = rng.gen_range(side..=64);
        let values = (0..h * w).map(|_| rng.gen_range(-300.0..=300.0)).collect();
        let r = FluxRaster::new(h, w, values).map_err(|e| e.to_string())?;
        let got = select_max_usflux_window(&r, side).map_err(|e| e.to_string())?;
        let (top, left, sum) = brute_window(&r, side);
        ensure((got.top, got.left) == (top, left), || {
            format!(
                "case {case}: {h}x{w} side {side}: got ({}, {}), brute force ({top}, {left})",
                got.top, got.left
            )
        })?;
        let rel = (got.usflux - sum).abs() / sum.max(f64::MIN_POSITIVE);
        worst_rel = worst_rel.max(rel);
        ensure(rel <= 1e-9, || {
            format!("case {case}: usflux {} vs {sum}", got.usflux)
        })?;
    }
    let took = within_budget(start, Duration::from_secs(10))?;
    Ok(format!(
        "1000 rasters, max rel err {worst_rel:.2e}, {took:?}"
    ))
}

fn oracle_tss(c: &ConfusionCounts) -> f64 {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    tp / (tp + fn_) - fp / (fp + tn)
}

fn oracle_hss(c: &ConfusionCounts) -> f64 {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    2.0 * (tp * tn - fn_ * fp) / ((tp + fn_) * (fn_ + tn) + (tp + fp) * (fp + tn))
}

fn metric_properties() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps = 1e-12;
    for i in 0..10_000 {
        let p = rng.gen_range(1..=500u64);
        let n = rng.gen_range(1..=5000u64);
        let tp = rng.gen_range(0..=p);
        let tn = rng.gen_range(0..=n);
        let c = ConfusionCounts::new(tp, n - tn, tn, p - tp);
        let t = tss(&c).map_err(|e| e.to_string())?;
        let h = hss(&c).map_err(|e| e.to_string())?;
        ensure((-1.0 - eps..=1.0 + eps).contains(&t), || {
            format!("{c:?}: tss {t}")
        })?;
        ensure((-1.0 - eps..=1.0 + eps).contains(&h), || {
            format!("{c:?}: hss {h}")
        })?;
        ensure((t - oracle_tss(&c)).abs() < 1e-12, || {
            format!("{c:?}: tss oracle")
        })?;
        ensure((h - oracle_hss(&c)).abs() < 1e-12, || {
            format!("{c:?}: hss oracle")
        })?;
        let s = css(t, h);
        if t * h < 0.0 {
            ensure(s == 0.0, || format!("{c:?}: css {s} with opposite signs"))?;
        } else {
            ensure((s - (t * h).sqrt()).abs() < 1e-12, || {
                format!("{c:?}: css {s}")
            })?;
        }

        let perfect = ConfusionCounts::new(p, 0, n, 0)
            .scores()
            .map_err(|e| e.to_string())?;
        ensure(
            (perfect.tss, perfect.hss, perfect.css) == (1.0, 1.0, 1.0),
            || format!("perfect p={p} n={n}: {perfect:?}"),
        )?;
        for (name, k) in [
            ("all-FL", ConfusionCounts::new(p, n, 0, 0)),
            ("all-NF", ConfusionCounts::new(0, 0, n, p)),
        ] {
            let s = k.scores().map_err(|e| e.to_string())?;
            ensure(s.tss.abs() < eps && s.hss.abs() < eps, || {
                format!("{name}: {s:?}")
            })?;
        }

        // Counting a split set equals merging the counts of its halves.
        if i % 50 == 0 {
            let recs: Vec<PredictionRecord> = (0..rng.gen_range(0..200))
                .map(|j| PredictionRecord {
                    patch_id: format!("r{j}"),
                    observation_time: utc(2015, 1, 1, 0),
                    center_longitude: 0.0,
                    score: rng.gen_range(0.0..1.0),
                    true_label: if rng.gen_bool(0.3) {
                        Label::Fl
                    } else {
                        Label::Nf
                    },
                })
                .collect();
            let cut = rng.gen_range(0..=recs.len());
            let thr = rng.gen_range(1..=99) as f64 / 100.0;
            let whole = confusion_counts(&recs, thr);
            let merged = merge_counts(
                confusion_counts(&recs[..cut], thr),
                confusion_counts(&recs[cut..], thr),
            );
            ensure(whole == merged, || {
                format!("merge: {whole:?} vs {merged:?}")
            })?;
        }
    }
    ensure(css(0.5, -0.2) == 0.0 && css(-0.5, 0.2) == 0.0, || {
        "negative branch".into()
    })?;
    let took = within_budget(start, Duration::from_secs(5))?;
    Ok(format!("10000 random tables, {took:?}"))
}

fn record(i: usize, score: f64, label: Label) -> PredictionRecord {
    PredictionRecord {
        patch_id: format!("v{i}"),
        observation_time: utc(2016, 5, 1, 0),
        center_longitude: 0.0,
        score,
        true_label: label,
    }
}

fn calibration_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut recs: Vec<PredictionRecord> = (0..500)
        .map(|i| record(i, rng.gen_range(0.6..=1.0), Label::Fl))
        .collect();
    recs.extend((0..5000).map(|i| record(500 + i, rng.gen_range(0.0..=0.4), Label::Nf)));
    let cal = calibrate_threshold_with(&recs, Exec::Sequential).map_err(|e| e.to_string())?;
    ensure(cal.scores.css == 1.0, || format!("css {}", cal.scores.css))?;

    // Oracle: with `score >= t` predicting FL, a grid point is perfect iff it
    // lies in (max NF, min FL]; ties resolve to the smallest such point.
    let max_nf = recs
        .iter()
        .filter(|r| r.true_label == Label::Nf)
        .map(|r| r.score)
        .fold(0.0, f64::max);
    let min_fl = recs
        .iter()
        .filter(|r| r.true_label == Label::Fl)
        .map(|r| r.score)
        .fold(1.0, f64::min);
    let oracle = (1..=99)
        .map(|i| i as f64 / 100.0)
        .find(|&t| t > max_nf && t <= min_fl)
        .ok_or("no separating grid point")?;
    ensure(cal.threshold == oracle, || {
        format!("threshold {} vs oracle {oracle}", cal.threshold)
    })?;

    let pair = [record(0, 0.9, Label::Fl), record(1, 0.1, Label::Nf)];
    let t = calibrate_threshold(&pair).map_err(|e| e.to_string())?;
    ensure(t == 0.11, || format!("two-record example gave {t}"))?;

    ensure((0.41..=0.59).contains(&cal.threshold), || {
        format!(
            "threshold {:.2} outside [0.41, 0.59]: max NF score {max_nf:.5} < 0.40, so 0.40 \
             already separates perfectly and wins the smallest-threshold tie-break \
             (CSS 1, matches oracle; example -> {t:.2})",
            cal.threshold
        )
    })?;
    Ok(format!(
        "recovered {:.2} with CSS 1; example -> {t:.2}",
        cal.threshold
    ))
}

fn golden_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bundles = dir.path().join("bundles");
    let meta = PatchMetadata::new(
        7,
        Some(12000),
        utc(2014, 2, 3, 12),
        10.0,
        utc(2014, 2, 1, 0),
    )
    .map_err(|e| e.to_string())?;

    // ROI covers rows 1..=2, columns 1..=6; the code-1 pixel inside it is masked.
    let golden_flux = FluxRaster::from_rows(&[
        [900.0, 900.0, 900.0, 900.0, 900.0, 900.0, 900.0],
        [5.0, 300.0, -10.0, 25.0, -26.0, 100.0, -400.0],
        [7.0, -300.0, 999.0, 40.0, 256.0, -256.5, 60.0],
        [900.0, 900.0, 900.0, 900.0, 900.0, 900.0, 900.0],
    ])
    .map_err(|e| e.to_string())?;
    let golden_bitmap = ArBitmap::from_rows(&[
        [0u8, 0, 0, 0, 0, 0, 0],
        [0, 34, 34, 33, 34, 34, 34],
        [0, 34, 1, 33, 34, 34, 34],
        [0, 0, 0, 0, 0, 0, 0],
    ])
    .map_err(|e| e.to_string())?;
    write_patch_bundle(
        &bundles.join("a_golden"),
        &golden_flux,
        &golden_bitmap,
        &meta,
    )
    .map_err(|e| e.to_string())?;

    let narrow = FluxRaster::filled(3, 3, 100.0).map_err(|e| e.to_string())?;
    let narrow_bitmap =
        ArBitmap::from_rows(&[[0u8, 34, 0], [0, 34, 0], [0, 33, 0]]).map_err(|e| e.to_string())?;
    write_patch_bundle(&bundles.join("b_narrow"), &narrow, &narrow_bitmap, &meta)
        .map_err(|e| e.to_string())?;
    let empty_bitmap = ArBitmap::filled(3, 3, 1).map_err(|e| e.to_string())?;
    write_patch_bundle(&bundles.join("c_empty"), &narrow, &empty_bitmap, &meta)
        .map_err(|e| e.to_string())?;

    let out = dir.path().join("out");
    let config = RunConfig {
        pipeline: PipelineConfig {
            target_side: 4,
            min_roi_width: 2,
            ..PipelineConfig::default()
        },
        bundles: Some(bundles),
        output: Some(out.clone()),
        ..RunConfig::default()
    };
    batch::run(Command::Preprocess, &config).map_err(|e| e.to_string())?;

    // Hand trace: clamp -> [256 0 0 -26 100 -256 / -256 0 40 256 -256 60];
    // pad to 4 rows (one above, one below); the 4-wide window at column 2 has
    // the largest unsigned flux (994 vs 834 and 678); scale to bytes.
    let mut want = b"P5\n4 4\n255\n".to_vec();
    want.extend_from_slice(&[
        128, 128, 128, 128, //
        128, 115, 177, 0, //
        147, 255, 0, 157, //
        128, 128, 128, 128,
    ]);
    let got = std::fs::read(out.join("images/a_golden.pgm")).map_err(|e| e.to_string())?;
    ensure(got == want, || format!("pgm bytes {got:?}"))?;

    let log =
        std::fs::read_to_string(out.join(batch::PREPROCESS_LOG)).map_err(|e| e.to_string())?;
    let want_log = "patch_id,status,stage,detail\n\
                    a_golden,accepted,,images/a_golden.pgm\n\
                    b_narrow,rejected,size_gate,roi width 1 < min_roi_width 2\n\
                    c_empty,error,roi_extract,bitmap has no active-region pixels (codes 33/34)\n";
    ensure(log == want_log, || format!("log:\n{log}"))?;
    ensure(!out.join("images/b_narrow.pgm").exists(), || {
        "rejected patch emitted".into()
    })?;
    Ok("golden PGM byte-exact; size_gate and roi_extract rejects logged".into())
}

fn run_with(config: &RunConfig, command: Command) -> Result<(), String> {
    batch::run(command, config)
        .map(|_| ())
        .map_err(|e| format!("{}: {e}", command.as_str()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = write_dataset(dir.path(), 120, 8);

    // preprocess and evaluate: 1 worker vs 8.
    let preds = dir.path().join("predictions.csv");
    write_file(
        &preds,
        render_prediction_csv(&predictions(3000, 8)).as_bytes(),
    )
    .map_err(|e| e.to_string())?;
    let mut outs = Vec::new();
    for workers in [1usize, 8] {
        let out = dir.path().join(format!("w{workers}"));
        let config = RunConfig {
            workers,
            threshold: Some(0.46),
            predictions: Some(preds.clone()),
            output: Some(out.clone()),
            ..base.clone()
        };
        run_with(&config, Command::Preprocess)?;
        run_with(&config, Command::Evaluate)?;
        outs.push(snapshot(&out));
    }
    ensure(outs[0].len() > 50, || {
        format!("only {} files", outs[0].len())
    })?;
    ensure(outs[0] == outs[1], || {
        "outputs differ between 1 and 8 workers".into()
    })?;

    // label -> partition -> augment, twice with the same seed, once with another.
    let chain = |name: &str, seed: u64| -> Result<Vec<(std::path::PathBuf, Vec<u8>)>, String> {
        let out = dir.path().join(name);
        let mut config = RunConfig {
            workers: 4,
            output: Some(out.clone()),
            labels: Some(out.join(batch::LABELS_FILE)),
            manifest: Some(out.join(batch::MANIFEST_FILE)),
            augment_seed: seed,
            ..base.clone()
        };
        config.sampling.seed = seed;
        run_with(&config, Command::Label)?;
        run_with(&config, Command::Partition)?;
        run_with(&config, Command::Augment)?;
        Ok(snapshot(&out))
    };
    let a = chain("seed_a", 42)?;
    let b = chain("seed_b", 42)?;
    let c = chain("seed_c", 43)?;
    let noise_files = |s: &[(std::path::PathBuf, Vec<u8>)]| -> usize {
        s.iter()
            .filter(|(p, _)| p.to_string_lossy().contains("bounded_noise"))
            .count()
    };
    ensure(noise_files(&a) > 0, || "no augmented noise variants".into())?;
    ensure(a == b, || {
        "equal seeds gave different augmentation/undersampling".into()
    })?;
    ensure(a != c, || "changing the seed changed nothing".into())?;
    Ok(format!(
        "{} preprocess+evaluate files identical across workers; {} chain files identical per seed",
        outs[0].len(),
        a.len()
    ))
}

fn involutions() -> Outcome {
    let config = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..200 {
        let (h, w) = (rng.gen_range(1..=24), rng.gen_range(1..=24));
        let values = (0..h * w).map(|_| rng.gen_range(-2000.0..2000.0)).collect();
        let r = FluxRaster::new(h, w, values).map_err(|e| e.to_string())?;
        ensure(flip_horizontal(&flip_horizontal(&r)) == r, || {
            format!("case {case}: hflip")
        })?;
        ensure(flip_vertical(&flip_vertical(&r)) == r, || {
            format!("case {case}: vflip")
        })?;
        ensure(invert_polarity(&invert_polarity(&r)) == r, || {
            format!("case {case}: polarity")
        })?;
        let once = clamp_flux(&r, &config);
        ensure(clamp_flux(&once, &config) == once, || {
            format!("case {case}: clamp")
        })?;
    }
    let cap = config.clamp_cap;
    let mut worst = 0i32;
    let mut steps = 0;
    let mut v = -256.0f64;
    while v <= 256.0 {
        ensure(
            clamp_value(clamp_value(v, &config), &config) == clamp_value(v, &config),
            || format!("clamp not idempotent at {v}"),
        )?;
        let gap = (scale_value(-v, cap) as i32 - (255 - scale_value(v, cap) as i32)).abs();
        worst = worst.max(gap);
        ensure(gap <= 1, || format!("antisymmetry gap {gap} at {v}"))?;
        v += 0.25;
        steps += 1;
    }
    Ok(format!(
        "200 rasters; {steps} sweep points, max gap {worst}"
    ))
}

/// Criteria that cannot hold as stated; they still run and still print FAIL,
/// but do not fail the process. See README.
const KNOWN_RED: [&str; 1] = ["calibration_recovery"];

fn main() {
    let criteria: [Criterion; 9] = [
        ("css_table_regression", css_table_regression),
        ("near_limb_css", near_limb_css),
        ("imbalance_ratio", imbalance_ratio),
        ("window_oracle", window_oracle),
        ("metric_properties", metric_properties),
        ("calibration_recovery", calibration_recovery),
        ("golden_end_to_end", golden_end_to_end),
        ("determinism", determinism),
        ("involutions", involutions),
    ];
    // `cargo test -- --list` and filters should not run the suite twice.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = 0;
    let mut documented = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let known = KNOWN_RED.contains(name);
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) if known => {
                documented += 1;
                println!("FAIL {} {name} (documented): {detail}", i + 1);
            }
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {} failed ({documented} documented as unattainable)",
        criteria.len() - failed - documented,
        failed + documented
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
