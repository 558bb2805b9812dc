//! Batch driver behind the `flarebench` subcommands.
//!
//! Per-item work (load, preprocess, augment, score) runs under the configured
//! [`Exec`]; outputs are assembled in a fixed order afterwards so every file is
//! byte-identical for any worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::Duration;

use crate::augment::{expand_fl_record_with, AugmentSettings};
use crate::dataset::{
    assign_partition, build_manifest, dataset_stats, manifest_counts, parse_flare_catalog,
    EventIndex, FlareClass, FlareLabel, GoesLetter, Label, LabeledInstance, PatchRecord,
    Provenance, Split,
};
use crate::evaluate::{
    calibrate_threshold_with, evaluate_longitude_subsets, evaluate_zones, render_report,
    DEFAULT_LONGITUDE_LIMITS,
};
use crate::exec::Exec;
use crate::io::{
    encode_pgm, list_bundles, load_patch_bundle, parse_labels_csv, parse_manifest_csv,
    parse_prediction_csv, parse_report_csv, render_labels_csv, render_manifest_csv, write_file,
    write_patch_bundle, PatchBundle, RunConfig,
};
use crate::raster::{
    process_patch_raster, roi_extract, scale_to_bytes, size_gate, ArBitmap, GateDecision,
    PatchOutcome, Stage,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Preprocess,
    Label,
    Partition,
    Augment,
    Calibrate,
    Evaluate,
    Report,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Preprocess,
        Command::Label,
        Command::Partition,
        Command::Augment,
        Command::Calibrate,
        Command::Evaluate,
        Command::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Preprocess => "preprocess",
            Command::Label => "label",
            Command::Partition => "partition",
            Command::Augment => "augment",
            Command::Calibrate => "calibrate",
            Command::Evaluate => "evaluate",
            Command::Report => "report",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown command {s:?}")))
    }
}

/// What a run produced. `stats` holds small named counters for the summary line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub stats: BTreeMap<String, String>,
}

impl RunSummary {
    fn stat(&mut self, key: &str, value: impl ToString) {
        self.stats.insert(key.to_string(), value.to_string());
    }
}

pub const PREPROCESS_LOG: &str = "preprocess_log.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const LABEL_STATS_FILE: &str = "label_stats.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MANIFEST_COUNTS_FILE: &str = "manifest_counts.csv";
pub const THRESHOLD_FILE: &str = "threshold.txt";
pub const CALIBRATION_FILE: &str = "calibration.csv";
pub const LONGITUDE_REPORT: &str = "longitude_report.csv";
pub const ZONE_REPORT: &str = "zone_report.csv";
pub const PLOT_SERIES_FILE: &str = "plot_series.csv";

fn require<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("`{key}` is not set")))
}

fn csv_safe(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

fn image_path(patch_id: &str) -> String {
    format!("images/{patch_id}.pgm")
}

pub fn run(command: Command, config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let exec = Exec::from_workers(config.workers);
    match command {
        Command::Preprocess => preprocess(config, exec),
        Command::Label => label(config, exec),
        Command::Partition => partition(config),
        Command::Augment => augment(config, exec),
        Command::Calibrate => calibrate(config, exec),
        Command::Evaluate => evaluate(config, exec),
        Command::Report => report(config),
    }
}

enum PreprocessResult {
    Image {
        id: String,
        pgm: Vec<u8>,
    },
    Rejected {
        id: String,
        stage: Stage,
        reason: String,
    },
    Failed {
        id: String,
        stage: &'static str,
        reason: String,
    },
}

fn bundle_id(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn preprocess_one(path: &Path, config: &RunConfig) -> PreprocessResult {
    let id = bundle_id(path);
    let bundle = match load_patch_bundle(path) {
        Ok(b) => b,
        Err(e) => {
            return PreprocessResult::Failed {
                id,
                stage: "load",
                reason: e.to_string(),
            }
        }
    };
    let outcome = process_patch_raster(&bundle.raster, &bundle.bitmap, &config.pipeline)
        .map_err(|e| (Stage::RoiExtract, e))
        .and_then(|o| match o {
            PatchOutcome::Accepted(r) => scale_to_bytes(&r, &config.pipeline)
                .map(PatchOutcome::Accepted)
                .map_err(|e| (Stage::ScaleToBytes, e)),
            PatchOutcome::Rejected { stage, reason } => {
                Ok(PatchOutcome::Rejected { stage, reason })
            }
        });
    match outcome {
        Ok(PatchOutcome::Accepted(img)) => PreprocessResult::Image {
            id,
            pgm: encode_pgm(&img),
        },
        Ok(PatchOutcome::Rejected { stage, reason }) => {
            PreprocessResult::Rejected { id, stage, reason }
        }
        Err((stage, e)) => PreprocessResult::Failed {
            id,
            stage: stage.as_str(),
            reason: e.to_string(),
        },
    }
}

/// Bundles to PGM images plus a per-patch log `patch_id,status,stage,detail`.
fn preprocess(config: &RunConfig, exec: Exec) -> Result<RunSummary> {
    let bundles = list_bundles(require(&config.bundles, "bundles")?)?;
    let out = require(&config.output, "output")?;
    let results = exec.map(&bundles, |p| preprocess_one(p, config));

    let mut log = String::from("patch_id,status,stage,detail\n");
    let mut summary = RunSummary::default();
    let (mut accepted, mut rejected, mut failed) = (0, 0, 0);
    for r in results {
        match r {
            PreprocessResult::Image { id, pgm } => {
                let path = out.join(image_path(&id));
                write_file(&path, &pgm)?;
                let _ = writeln!(log, "{id},accepted,,{}", image_path(&id));
                summary.outputs.push(path);
                accepted += 1;
            }
            PreprocessResult::Rejected { id, stage, reason } => {
                let _ = writeln!(log, "{id},rejected,{stage},{}", csv_safe(&reason));
                rejected += 1;
            }
            PreprocessResult::Failed { id, stage, reason } => {
                let _ = writeln!(log, "{id},error,{stage},{}", csv_safe(&reason));
                failed += 1;
            }
        }
    }
    let log_path = out.join(PREPROCESS_LOG);
    write_file(&log_path, log.as_bytes())?;
    summary.outputs.push(log_path);
    summary.stat("accepted", accepted);
    summary.stat("rejected", rejected);
    summary.stat("failed", failed);
    Ok(summary)
}

/// Bundles that pass ROI extraction and the size gate, labelled and partitioned.
fn label(config: &RunConfig, exec: Exec) -> Result<RunSummary> {
    let bundles = list_bundles(require(&config.bundles, "bundles")?)?;
    let events = parse_flare_catalog(require(&config.catalog, "catalog")?)?;
    let out = require(&config.output, "output")?;
    let index = EventIndex::new(&events);
    let horizon = Duration::hours(config.horizon_hours);

    let labelled = exec.map(&bundles, |path| -> Result<Option<LabeledInstance>> {
        let b = load_patch_bundle(path)?;
        let keep = match roi_extract(&b.raster, &b.bitmap) {
            Ok(roi) => size_gate(&roi, &config.pipeline) == GateDecision::Accept,
            Err(Error::EmptyRoi) => false,
            Err(e) => return Err(e),
        };
        Ok(keep.then(|| LabeledInstance {
            path: image_path(&b.id),
            label: index.label(&b.metadata, horizon),
            partition: assign_partition(b.metadata.harp_onset_time, &config.partition),
            patch_id: b.id,
            metadata: b.metadata,
        }))
    });
    let mut instances = Vec::new();
    for r in labelled {
        if let Some(inst) = r? {
            instances.push(inst);
        }
    }

    let mut summary = RunSummary::default();
    let labels_path = out.join(LABELS_FILE);
    write_file(&labels_path, render_labels_csv(&instances).as_bytes())?;
    summary.outputs.push(labels_path);

    let stats = dataset_stats(instances.iter().map(|i| &i.label));
    let mut text = String::from("class,count\nFQ,");
    let _ = writeln!(text, "{}", stats.quiet);
    for letter in GoesLetter::ALL {
        let _ = writeln!(
            text,
            "{},{}",
            letter.as_char(),
            stats.per_letter[letter as usize]
        );
    }
    let _ = writeln!(text, "NF,{}\nFL,{}", stats.nf, stats.fl);
    let ratio = stats
        .imbalance_ratio()
        .map_or_else(|| "undefined".to_string(), |r| format!("{r:.2}"));
    let _ = writeln!(text, "nf_per_fl,{ratio}");
    let stats_path = out.join(LABEL_STATS_FILE);
    write_file(&stats_path, text.as_bytes())?;
    summary.outputs.push(stats_path);

    summary.stat("instances", instances.len());
    summary.stat("nf", stats.nf);
    summary.stat("fl", stats.fl);
    summary.stat(
        "imbalance",
        stats
            .imbalance_label()
            .unwrap_or_else(|| "undefined".into()),
    );
    Ok(summary)
}

fn partition(config: &RunConfig) -> Result<RunSummary> {
    let labels = parse_labels_csv(require(&config.labels, "labels")?)?;
    let out = require(&config.output, "output")?;
    let rows = build_manifest(&labels, &config.sampling)?;

    let mut summary = RunSummary::default();
    let manifest_path = out.join(MANIFEST_FILE);
    write_file(&manifest_path, render_manifest_csv(&rows).as_bytes())?;
    summary.outputs.push(manifest_path);

    let mut text = String::from("split,label,provenance,count\n");
    for ((split, label, prov), n) in manifest_counts(&rows) {
        let _ = writeln!(text, "{},{label},{prov},{n}", split.as_str());
    }
    let counts_path = out.join(MANIFEST_COUNTS_FILE);
    write_file(&counts_path, text.as_bytes())?;
    summary.outputs.push(counts_path);

    for split in [Split::Train, Split::Validation, Split::Test] {
        summary.stat(
            split.as_str(),
            rows.iter().filter(|r| r.split == split).count(),
        );
    }
    Ok(summary)
}

/// Augmented PGMs (at the manifest's paths) and flux bundles for every
/// original FL training row.
fn augment(config: &RunConfig, exec: Exec) -> Result<RunSummary> {
    let manifest = parse_manifest_csv(require(&config.manifest, "manifest")?)?;
    let bundles_root = require(&config.bundles, "bundles")?;
    let out = require(&config.output, "output")?;
    let settings = AugmentSettings {
        blur_sigma: config.blur_sigma,
        noise_amplitude: config.noise_amplitude,
    };
    let targets: Vec<_> = manifest
        .iter()
        .filter(|r| {
            r.split == Split::Train && r.label == Label::Fl && r.provenance == Provenance::Original
        })
        .collect();
    let wanted: BTreeMap<&str, &str> = manifest
        .iter()
        .filter(|r| matches!(r.provenance, Provenance::Augmented(_)))
        .map(|r| (r.patch_id.as_str(), r.path.as_str()))
        .collect();

    let results = exec.map(&targets, |row| -> Result<Vec<(PatchRecord, Vec<u8>)>> {
        let PatchBundle {
            raster,
            bitmap,
            metadata,
            ..
        } = load_patch_bundle(&bundles_root.join(&row.patch_id))?;
        let processed = match process_patch_raster(&raster, &bitmap, &config.pipeline)? {
            PatchOutcome::Accepted(r) => r,
            PatchOutcome::Rejected { stage, reason } => {
                return Err(Error::Misuse(format!(
                    "{} is in the manifest but fails {stage}: {reason}",
                    row.patch_id
                )))
            }
        };
        let side = processed.height();
        let record = PatchRecord {
            id: row.patch_id.clone(),
            raster: processed,
            bitmap: ArBitmap::filled(side, side, 34)?,
            // manifest rows carry only the binary label
            label: FlareLabel::from_max_class(FlareClass::M1),
            metadata,
            provenance: Provenance::Original,
        };
        expand_fl_record_with(&record, config.augment_seed, &config.pipeline, &settings)?
            .into_iter()
            .map(|v| {
                let pgm = encode_pgm(&scale_to_bytes(&v.raster, &config.pipeline)?);
                Ok((v, pgm))
            })
            .collect()
    });

    let mut summary = RunSummary::default();
    let mut written = 0;
    for r in results {
        for (variant, pgm) in r? {
            let rel = wanted
                .get(variant.id.as_str())
                .map(|p| p.to_string())
                .unwrap_or_else(|| format!("augmented/{}.pgm", variant.id));
            let img_path = out.join(rel);
            write_file(&img_path, &pgm)?;
            let bundle_dir = out.join("augmented_bundles").join(&variant.id);
            write_patch_bundle(
                &bundle_dir,
                &variant.raster,
                &variant.bitmap,
                &variant.metadata,
            )?;
            summary.outputs.push(img_path);
            summary.outputs.push(bundle_dir);
            written += 1;
        }
    }
    summary.stat("fl_originals", targets.len());
    summary.stat("variants", written);
    Ok(summary)
}

fn calibrate(config: &RunConfig, exec: Exec) -> Result<RunSummary> {
    let records = parse_prediction_csv(require(&config.predictions, "predictions")?)?;
    let out = require(&config.output, "output")?;
    let cal = calibrate_threshold_with(&records, exec)?;

    let mut summary = RunSummary::default();
    let path = out.join(THRESHOLD_FILE);
    write_file(
        &path,
        format!("threshold = {:.2}\n", cal.threshold).as_bytes(),
    )?;
    summary.outputs.push(path);

    let mut curve = String::from("threshold,tss,hss,css\n");
    for (t, s) in &cal.curve {
        let _ = writeln!(curve, "{t:.2},{:.6},{:.6},{:.6}", s.tss, s.hss, s.css);
    }
    let path = out.join(CALIBRATION_FILE);
    write_file(&path, curve.as_bytes())?;
    summary.outputs.push(path);

    summary.stat("threshold", format!("{:.2}", cal.threshold));
    summary.stat("css", format!("{:.6}", cal.scores.css));
    Ok(summary)
}

fn evaluate(config: &RunConfig, exec: Exec) -> Result<RunSummary> {
    let records = parse_prediction_csv(require(&config.predictions, "predictions")?)?;
    let out = require(&config.output, "output")?;
    let threshold = config
        .threshold
        .ok_or_else(|| Error::InvalidConfig("`threshold` is not set".into()))?;

    let ranges = evaluate_longitude_subsets(&records, threshold, &DEFAULT_LONGITUDE_LIMITS, exec)?;
    let zones = evaluate_zones(&records, threshold, exec)?;

    let mut summary = RunSummary::default();
    let path = out.join(LONGITUDE_REPORT);
    write_file(&path, render_report(&ranges).as_bytes())?;
    summary.outputs.push(path);
    let path = out.join(ZONE_REPORT);
    write_file(&path, render_report(&zones.zones).as_bytes())?;
    summary.outputs.push(path);

    summary.stat("records", records.len());
    summary.stat("threshold", threshold);
    if let Some(s) = ranges.last().and_then(|r| r.scores) {
        summary.stat("css_all", format!("{:.6}", s.css));
    }
    Ok(summary)
}

/// Reads the two evaluation reports and emits one long-format series file,
/// `series,x,tss,hss,css`, for plotting.
fn report(config: &RunConfig) -> Result<RunSummary> {
    let dir = config
        .reports
        .as_deref()
        .or(config.output.as_deref())
        .ok_or_else(|| Error::InvalidConfig("`reports` is not set".into()))?;
    let out = require(&config.output, "output")?;
    let mut text = String::from("series,x,tss,hss,css\n");
    let mut rows = 0;
    for (series, file) in [("longitude", LONGITUDE_REPORT), ("zone", ZONE_REPORT)] {
        for r in parse_report_csv(&dir.join(file))? {
            let x = r.subset.rsplit('_').next().unwrap_or(&r.subset).to_string();
            let cells = r.scores.map_or_else(
                || ",,".to_string(),
                |[t, h, c]| format!("{t:.6},{h:.6},{c:.6}"),
            );
            let _ = writeln!(text, "{series},{x},{cells}");
            rows += 1;
        }
    }
    let mut summary = RunSummary::default();
    let path = out.join(PLOT_SERIES_FILE);
    write_file(&path, text.as_bytes())?;
    summary.outputs.push(path);
    summary.stat("rows", rows);
    Ok(summary)
}
