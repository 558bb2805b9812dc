#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flarebench_core::dataset::Label;
use flarebench_core::evaluate::PredictionRecord;
use flarebench_core::io::{format_timestamp, write_file, write_patch_bundle, RunConfig};
use flarebench_core::raster::{ArBitmap, FluxRaster, PatchMetadata, PipelineConfig};

pub fn utc(y: i32, mo: u32, d: u32, h: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, mo, d, h, 0, 0).unwrap()
}

/// Desk-scale pipeline settings used by the batch fixtures.
pub fn small_pipeline() -> PipelineConfig {
    PipelineConfig {
        target_side: 8,
        min_roi_width: 4,
        ..PipelineConfig::default()
    }
}

/// A random patch whose ROI is a rectangle inset from the border. Every
/// seventh patch gets an ROI too narrow for the gate, every eleventh none.
fn random_patch(rng: &mut ChaCha8Rng, k: usize) -> (FluxRaster, ArBitmap) {
    let h = rng.gen_range(6..=20);
    let w = rng.gen_range(8..=24);
    let values = (0..h * w).map(|_| rng.gen_range(-600.0..600.0)).collect();
    let raster = FluxRaster::new(h, w, values).unwrap();
    let roi_w = if k % 7 == 3 { 2 } else { w - 2 };
    let mut codes = vec![0u8; h * w];
    if k % 11 != 5 {
        for r in 1..h - 1 {
            for c in 1..1 + roi_w {
                codes[r * w + c] = if (r + c) % 5 == 0 { 33 } else { 34 };
            }
        }
        codes[w + 1] = 2;
    }
    (raster, ArBitmap::new(h, w, codes).unwrap())
}

/// Writes `n` bundles and a flare catalog under `root`; returns a config
/// pointing at them with `root/out` as the output directory.
pub fn write_dataset(root: &Path, n: usize, seed: u64) -> RunConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bundles = root.join("bundles");
    let mut catalog = String::from("noaa_ar,start_time,peak_time,end_time,class\n");
    for k in 0..n {
        let harp = 100 + (k / 3) as u32;
        let ar = 11000 + (k / 3) as u32;
        let onset = utc(2013, 1 + (k % 12) as u32, 1, 0);
        let obs = onset + Duration::hours(24 + 12 * (k % 3) as i64);
        let lon = rng.gen_range(-90.0..=90.0f64);
        let meta =
            PatchMetadata::new(harp, Some(ar), obs, (lon * 100.0).round() / 100.0, onset).unwrap();
        let (raster, bitmap) = random_patch(&mut rng, k);
        write_patch_bundle(&bundles.join(format!("p{k:04}")), &raster, &bitmap, &meta).unwrap();

        let class = match k % 6 {
            0 => Some("M1.4"),
            1 => Some("C3.0"),
            2 => Some("B2.1"),
            3 => Some("X1.0"),
            4 => Some("A5.0"),
            _ => None,
        };
        if let Some(class) = class {
            let peak = obs + Duration::hours(rng.gen_range(1..=20));
            let _ = writeln!(
                catalog,
                "{ar},{},{},{},{class}",
                format_timestamp(peak - Duration::minutes(20)),
                format_timestamp(peak),
                format_timestamp(peak + Duration::minutes(30)),
            );
        }
    }
    let catalog_path = root.join("catalog.csv");
    write_file(&catalog_path, catalog.as_bytes()).unwrap();
    RunConfig {
        pipeline: small_pipeline(),
        bundles: Some(bundles),
        catalog: Some(catalog_path),
        output: Some(root.join("out")),
        ..RunConfig::default()
    }
}

/// Scores with some skill: FL tends high, NF tends low.
pub fn predictions(n: usize, seed: u64) -> Vec<PredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let fl = rng.gen_bool(0.1);
            let score: f64 = if fl {
                rng.gen_range(0.3..1.0)
            } else {
                rng.gen_range(0.0..0.6)
            };
            PredictionRecord {
                patch_id: format!("q{i:05}"),
                observation_time: utc(2014, 1, 1, 0) + Duration::hours(i as i64),
                center_longitude: (rng.gen_range(-90.0..=90.0f64) * 10.0).round() / 10.0,
                score: (score * 1e4).round() / 1e4,
                true_label: if fl { Label::Fl } else { Label::Nf },
            }
        })
        .collect()
}

/// Every regular file under `dir`, relative path plus contents, sorted.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
