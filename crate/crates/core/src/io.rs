//! File formats: patch bundles, PGM images, prediction/label/manifest CSVs,
//! flat key/value config files, and the run configuration.
//!
//! A patch bundle is a directory holding
//!
//! * `meta.txt`  - `key = value` lines (`harp_id`, `noaa_ar`, `observation_time`,
//!   `harp_onset_time`, `center_longitude`, `height`, `width`)
//! * `flux.f32`  - row-major little-endian `f32` flux values
//! * `bitmap.u8` - row-major bitmap codes, one byte each
//!
//! The directory name is the patch id.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};

use crate::dataset::{
    FlareClass, FlareLabel, Label, LabeledInstance, ManifestRow, PartitionScheme, Provenance,
    SamplingPlan, Split,
};
use crate::evaluate::{PredictionRecord, REPORT_HEADER};
use crate::raster::{ArBitmap, FluxRaster, ImagePatch, PatchMetadata, PipelineConfig};
use crate::{Error, Result};

pub const META_FILE: &str = "meta.txt";
pub const FLUX_FILE: &str = "flux.f32";
pub const BITMAP_FILE: &str = "bitmap.u8";

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Accepts RFC 3339 and the naive forms `YYYY-MM-DDTHH:MM[:SS]`,
/// `YYYY-MM-DD HH:MM[:SS]` and `YYYY-MM-DD`, optionally suffixed with `Z` or
/// ` UTC`. Naive times are UTC.
pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    let raw = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Ok(t.with_timezone(&Utc));
    }
    let body = raw
        .strip_suffix(" UTC")
        .or_else(|| raw.strip_suffix('Z'))
        .unwrap_or(raw)
        .trim();
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(body, fmt) {
            return Ok(t.and_utc());
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(body, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    Err(Error::Timestamp(s.to_string()))
}

/// Parses `key = value` lines; `#` starts a comment. Later keys win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| Error::row(i + 1, "line", format!("expected key = value: {line:?}")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn meta_field<'a>(kv: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    kv.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::InvalidMetadata(format!("missing field `{key}`")))
}

fn parse_field<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = meta_field(kv, key)?;
    raw.parse()
        .map_err(|_| Error::InvalidMetadata(format!("field `{key}`: cannot parse {raw:?}")))
}

fn parse_time_field(kv: &BTreeMap<String, String>, key: &str) -> Result<DateTime<Utc>> {
    let raw = meta_field(kv, key)?;
    parse_timestamp(raw)
        .map_err(|_| Error::InvalidMetadata(format!("field `{key}`: unparsable timestamp {raw:?}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchBundle {
    pub id: String,
    pub raster: FluxRaster,
    pub bitmap: ArBitmap,
    pub metadata: PatchMetadata,
}

pub fn load_patch_bundle(dir: &Path) -> Result<PatchBundle> {
    let kv = parse_key_values(&read_text(&dir.join(META_FILE))?)?;
    let height: usize = parse_field(&kv, "height")?;
    let width: usize = parse_field(&kv, "width")?;
    let noaa_ar =
        match meta_field(&kv, "noaa_ar").unwrap_or("") {
            "" | "none" | "NA" => None,
            s => Some(s.parse::<u32>().map_err(|_| {
                Error::InvalidMetadata(format!("field `noaa_ar`: cannot parse {s:?}"))
            })?),
        };
    let metadata = PatchMetadata::new(
        parse_field(&kv, "harp_id")?,
        noaa_ar,
        parse_time_field(&kv, "observation_time")?,
        parse_field(&kv, "center_longitude")?,
        parse_time_field(&kv, "harp_onset_time")?,
    )?;
    let n = height
        .checked_mul(width)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidMetadata(format!("bad dimensions {height}x{width}")))?;

    let flux = read(&dir.join(FLUX_FILE))?;
    if flux.len() != n * 4 {
        return Err(Error::LengthMismatch {
            field: FLUX_FILE.into(),
            expected: n * 4,
            found: flux.len(),
        });
    }
    let values = flux
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let raster = FluxRaster::new(height, width, values)?;

    let codes = read(&dir.join(BITMAP_FILE))?;
    if codes.len() != n {
        return Err(Error::LengthMismatch {
            field: BITMAP_FILE.into(),
            expected: n,
            found: codes.len(),
        });
    }
    let bitmap = ArBitmap::new(height, width, codes)?;
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(PatchBundle {
        id,
        raster,
        bitmap,
        metadata,
    })
}

pub fn render_metadata(meta: &PatchMetadata, height: usize, width: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "harp_id = {}", meta.harp_id);
    let _ = writeln!(
        s,
        "noaa_ar = {}",
        meta.noaa_ar
            .map_or_else(|| "none".to_string(), |a| a.to_string())
    );
    let _ = writeln!(
        s,
        "observation_time = {}",
        format_timestamp(meta.observation_time)
    );
    let _ = writeln!(
        s,
        "harp_onset_time = {}",
        format_timestamp(meta.harp_onset_time)
    );
    let _ = writeln!(s, "center_longitude = {}", meta.center_longitude);
    let _ = writeln!(s, "height = {height}");
    let _ = writeln!(s, "width = {width}");
    s
}

/// Writes a bundle directory. Flux is stored as `f32`.
pub fn write_patch_bundle(
    dir: &Path,
    raster: &FluxRaster,
    bitmap: &ArBitmap,
    meta: &PatchMetadata,
) -> Result<()> {
    if raster.height() != bitmap.height() || raster.width() != bitmap.width() {
        return Err(Error::InvalidPair {
            raster_h: raster.height(),
            raster_w: raster.width(),
            bitmap_h: bitmap.height(),
            bitmap_w: bitmap.width(),
        });
    }
    let meta_text = render_metadata(meta, raster.height(), raster.width());
    write_file(&dir.join(META_FILE), meta_text.as_bytes())?;
    let flux: Vec<u8> = raster
        .values()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    write_file(&dir.join(FLUX_FILE), &flux)?;
    write_file(&dir.join(BITMAP_FILE), bitmap.codes())
}

/// Every subdirectory of `root` holding a `meta.txt`, sorted by name.
pub fn list_bundles(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(META_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Binary PGM (`P5`) with maxval 255.
pub fn encode_pgm(patch: &ImagePatch) -> Vec<u8> {
    let side = patch.side();
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend_from_slice(patch.bytes());
    out
}

pub fn write_image_pgm(patch: &ImagePatch, path: &Path) -> Result<()> {
    write_file(path, &encode_pgm(patch))
}

/// Decodes the `P5` files this crate writes (single-space separated header, no comments).
pub fn decode_pgm(bytes: &[u8]) -> Result<ImagePatch> {
    let bad = |m: &str| Error::ContractViolation(format!("pgm: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("expected P5 with maxval 255"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
    if w != h {
        return Err(bad("image is not square"));
    }
    ImagePatch::new(w, bytes[pos + 1..].to_vec())
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(path: &Path, reader: &mut csv::Reader<&[u8]>, expected: &str) -> Result<()> {
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got.join(",") != expected {
        return Err(Error::row(
            1,
            "header",
            format!("expected {expected:?}, found {:?}", got.join(",")),
        ));
    }
    Ok(())
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

pub const PREDICTION_HEADER: &str = "patch_id,observation_time,center_longitude,true_label,score";

pub fn parse_prediction_csv(path: &Path) -> Result<Vec<PredictionRecord>> {
    parse_prediction_csv_str(path, &read_text(path)?)
}

pub fn parse_prediction_csv_str(path: &Path, text: &str) -> Result<Vec<PredictionRecord>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv_reader(text);
    check_header(path, &mut reader, PREDICTION_HEADER)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = record_line(&rec);
        if rec.len() != 5 {
            return Err(Error::row(
                row,
                "row",
                format!("expected 5 fields, found {}", rec.len()),
            ));
        }
        let observation_time = parse_timestamp(&rec[1]).map_err(|_| {
            Error::row(row, "observation_time", format!("unparsable {:?}", &rec[1]))
        })?;
        let center_longitude: f64 = rec[2].parse().map_err(|_| {
            Error::row(
                row,
                "center_longitude",
                format!("not a number: {:?}", &rec[2]),
            )
        })?;
        if !(0.0..=90.0).contains(&center_longitude.abs()) {
            return Err(Error::row(
                row,
                "center_longitude",
                format!("{center_longitude} outside [-90, 90]"),
            ));
        }
        let true_label = Label::parse(&rec[3]).ok_or_else(|| {
            Error::row(
                row,
                "true_label",
                format!("expected FL or NF, found {:?}", &rec[3]),
            )
        })?;
        let score: f64 = rec[4]
            .parse()
            .map_err(|_| Error::row(row, "score", format!("not a number: {:?}", &rec[4])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::row(row, "score", format!("{score} outside [0, 1]")));
        }
        out.push(PredictionRecord {
            patch_id: rec[0].to_string(),
            observation_time,
            center_longitude,
            score,
            true_label,
        });
    }
    Ok(out)
}

pub fn render_prediction_csv(records: &[PredictionRecord]) -> String {
    let mut s = format!("{PREDICTION_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.patch_id,
            format_timestamp(r.observation_time),
            r.center_longitude,
            r.true_label,
            r.score
        );
    }
    s
}

pub const LABELS_HEADER: &str = "patch_id,harp_id,noaa_ar,observation_time,harp_onset_time,center_longitude,partition,label,max_class,path";

pub fn render_labels_csv(records: &[LabeledInstance]) -> String {
    let mut s = format!("{LABELS_HEADER}\n");
    for r in records {
        let m = &r.metadata;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.patch_id,
            m.harp_id,
            m.noaa_ar.map_or_else(String::new, |a| a.to_string()),
            format_timestamp(m.observation_time),
            format_timestamp(m.harp_onset_time),
            m.center_longitude,
            r.partition,
            r.label.label,
            r.label.max_class,
            r.path
        );
    }
    s
}

pub fn parse_labels_csv(path: &Path) -> Result<Vec<LabeledInstance>> {
    let text = read_text(path)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv_reader(&text);
    check_header(path, &mut reader, LABELS_HEADER)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = record_line(&rec);
        if rec.len() != 10 {
            return Err(Error::row(
                row,
                "row",
                format!("expected 10 fields, found {}", rec.len()),
            ));
        }
        let num = |i: usize, name: &str| -> Result<u32> {
            rec[i]
                .parse()
                .map_err(|_| Error::row(row, name, format!("not an integer: {:?}", &rec[i])))
        };
        let time = |i: usize, name: &str| {
            parse_timestamp(&rec[i])
                .map_err(|_| Error::row(row, name, format!("unparsable {:?}", &rec[i])))
        };
        let noaa_ar = if rec[2].is_empty() {
            None
        } else {
            Some(num(2, "noaa_ar")?)
        };
        let metadata = PatchMetadata::new(
            num(1, "harp_id")?,
            noaa_ar,
            time(3, "observation_time")?,
            rec[5]
                .parse()
                .map_err(|_| Error::row(row, "center_longitude", "not a number"))?,
            time(4, "harp_onset_time")?,
        )
        .map_err(|e| Error::row(row, "metadata", e.to_string()))?;
        let partition = num(6, "partition")?;
        if !(1..=4).contains(&partition) {
            return Err(Error::row(
                row,
                "partition",
                format!("{partition} outside 1..=4"),
            ));
        }
        let label = Label::parse(&rec[7]).ok_or_else(|| {
            Error::row(
                row,
                "label",
                format!("expected FL or NF, found {:?}", &rec[7]),
            )
        })?;
        let max_class = FlareClass::parse(&rec[8])
            .ok_or_else(|| Error::row(row, "max_class", format!("bad class {:?}", &rec[8])))?;
        let flare_label = FlareLabel::from_max_class(max_class);
        if flare_label.label != label {
            return Err(Error::row(
                row,
                "label",
                format!("{label} contradicts max_class {max_class}"),
            ));
        }
        out.push(LabeledInstance {
            patch_id: rec[0].to_string(),
            metadata,
            partition: partition as u8,
            label: flare_label,
            path: rec[9].to_string(),
        });
    }
    Ok(out)
}

pub const MANIFEST_HEADER: &str = "patch_id,harp_id,partition,split,label,provenance,path";

pub fn render_manifest_csv(rows: &[ManifestRow]) -> String {
    let mut s = format!("{MANIFEST_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.patch_id,
            r.harp_id,
            r.partition,
            r.split.as_str(),
            r.label,
            r.provenance.as_str(),
            r.path
        );
    }
    s
}

pub fn parse_manifest_csv(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = read_text(path)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv_reader(&text);
    check_header(path, &mut reader, MANIFEST_HEADER)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = record_line(&rec);
        if rec.len() != 7 {
            return Err(Error::row(
                row,
                "row",
                format!("expected 7 fields, found {}", rec.len()),
            ));
        }
        out.push(ManifestRow {
            patch_id: rec[0].to_string(),
            harp_id: rec[1]
                .parse()
                .map_err(|_| Error::row(row, "harp_id", "not an integer"))?,
            partition: rec[2]
                .parse()
                .map_err(|_| Error::row(row, "partition", "not an integer"))?,
            split: Split::parse(&rec[3])
                .ok_or_else(|| Error::row(row, "split", format!("unknown split {:?}", &rec[3])))?,
            label: Label::parse(&rec[4]).ok_or_else(|| {
                Error::row(
                    row,
                    "label",
                    format!("expected FL or NF, found {:?}", &rec[4]),
                )
            })?,
            provenance: Provenance::parse(&rec[5]).ok_or_else(|| {
                Error::row(
                    row,
                    "provenance",
                    format!("unknown provenance {:?}", &rec[5]),
                )
            })?,
            path: rec[6].to_string(),
        });
    }
    Ok(out)
}

/// One parsed report row; scores are `None` where the report says `undefined`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub subset: String,
    pub counts: [u64; 4],
    pub scores: Option<[f64; 3]>,
}

pub fn parse_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let text = read_text(path)?;
    let mut reader = csv_reader(&text);
    check_header(path, &mut reader, REPORT_HEADER)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = record_line(&rec);
        if rec.len() != 8 {
            return Err(Error::row(
                row,
                "row",
                format!("expected 8 fields, found {}", rec.len()),
            ));
        }
        let mut counts = [0u64; 4];
        for (i, (c, name)) in counts.iter_mut().zip(["tp", "fp", "tn", "fn"]).enumerate() {
            *c = rec[i + 1]
                .parse()
                .map_err(|_| Error::row(row, name, "not an integer"))?;
        }
        let scores = if &rec[5] == "undefined" {
            None
        } else {
            let mut s = [0.0; 3];
            for (i, (v, name)) in s.iter_mut().zip(["tss", "hss", "css"]).enumerate() {
                *v = rec[i + 5]
                    .parse()
                    .map_err(|_| Error::row(row, name, "not a number"))?;
            }
            Some(s)
        };
        out.push(ReportRow {
            subset: rec[0].to_string(),
            counts,
            scores,
        });
    }
    Ok(out)
}

/// Everything a batch run needs. Relative paths in a config file resolve
/// against the file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub partition: PartitionScheme,
    pub sampling: SamplingPlan,
    pub augment_seed: u64,
    pub blur_sigma: f64,
    pub noise_amplitude: f64,
    pub horizon_hours: i64,
    pub workers: usize,
    pub threshold: Option<f64>,
    pub bundles: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pipeline: PipelineConfig::default(),
            partition: PartitionScheme::default(),
            sampling: SamplingPlan::default(),
            augment_seed: 0,
            blur_sigma: crate::augment::DEFAULT_BLUR_SIGMA,
            noise_amplitude: crate::augment::DEFAULT_NOISE_AMPLITUDE,
            horizon_hours: crate::dataset::DEFAULT_HORIZON_HOURS,
            workers: 1,
            threshold: None,
            bundles: None,
            catalog: None,
            labels: None,
            manifest: None,
            predictions: None,
            reports: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&read_text(path)?, base)
    }

    pub fn from_text(text: &str, base: &Path) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let mut c = RunConfig::default();
        let num = |k: &str, v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("{k}: not a number: {v:?}")))
        };
        let int = |k: &str, v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("{k}: not an integer: {v:?}")))
        };
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (k, v) in &kv {
            let v = v.as_str();
            match k.as_str() {
                "clamp_cap" => c.pipeline.clamp_cap = num(k, v)?,
                "zero_band" => c.pipeline.zero_band = num(k, v)?,
                "min_roi_width" => c.pipeline.min_roi_width = int(k, v)? as usize,
                "target_side" => c.pipeline.target_side = int(k, v)? as usize,
                "partition_scheme" => c.partition = PartitionScheme::parse(v)?,
                "fraction_a" => c.sampling.fraction_a = num(k, v)?,
                "fraction_b" => c.sampling.fraction_b = num(k, v)?,
                "fraction_c" => c.sampling.fraction_c = num(k, v)?,
                "fraction_fq" => c.sampling.fraction_fq = num(k, v)?,
                "sampling_seed" => c.sampling.seed = int(k, v)?,
                "augment_seed" => c.augment_seed = int(k, v)?,
                "blur_sigma" => c.blur_sigma = num(k, v)?,
                "noise_amplitude" => c.noise_amplitude = num(k, v)?,
                "horizon_hours" => c.horizon_hours = int(k, v)? as i64,
                "workers" => c.workers = int(k, v)? as usize,
                "threshold" => c.threshold = Some(num(k, v)?),
                "bundles" => c.bundles = Some(path(v)),
                "catalog" => c.catalog = Some(path(v)),
                "labels" => c.labels = Some(path(v)),
                "manifest" => c.manifest = Some(path(v)),
                "predictions" => c.predictions = Some(path(v)),
                "reports" => c.reports = Some(path(v)),
                "output" => c.output = Some(path(v)),
                other => {
                    return Err(Error::InvalidConfig(format!("unknown key `{other}`")));
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.sampling.validate()?;
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        if self.blur_sigma.is_nan()
            || self.blur_sigma <= 0.0
            || self.noise_amplitude.is_nan()
            || self.noise_amplitude <= 0.0
        {
            return Err(Error::InvalidConfig(
                "blur_sigma and noise_amplitude must be > 0".into(),
            ));
        }
        if self.horizon_hours <= 0 {
            return Err(Error::InvalidConfig("horizon_hours must be > 0".into()));
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "threshold {t} outside (0, 1)"
                )));
            }
        }
        Ok(())
    }
}
