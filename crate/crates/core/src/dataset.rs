//! Flare catalog ingestion, 24-hour labelling, onset-keyed partitioning,
//! stratified NF undersampling and the train/validation/test manifest.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{augmented_id, AugmentationKind};
use crate::io::parse_timestamp;
use crate::raster::{ArBitmap, FluxRaster, PatchMetadata};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GoesLetter {
    A,
    B,
    C,
    M,
    X,
}

impl GoesLetter {
    pub const ALL: [GoesLetter; 5] = [
        GoesLetter::A,
        GoesLetter::B,
        GoesLetter::C,
        GoesLetter::M,
        GoesLetter::X,
    ];

    /// Peak flux (W/m^2) at magnitude 1.0.
    pub fn base_flux(self) -> f64 {
        match self {
            GoesLetter::A => 1e-8,
            GoesLetter::B => 1e-7,
            GoesLetter::C => 1e-6,
            GoesLetter::M => 1e-5,
            GoesLetter::X => 1e-4,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            GoesLetter::A => 'A',
            GoesLetter::B => 'B',
            GoesLetter::C => 'C',
            GoesLetter::M => 'M',
            GoesLetter::X => 'X',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        GoesLetter::ALL.into_iter().find(|l| l.as_char() == c)
    }
}

/// GOES class. `Quiet` sorts below every flare; flares compare by letter and
/// then by magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlareClass {
    Quiet,
    Flare {
        letter: GoesLetter,
        /// Magnitude in tenths (M2.2 is 22). Always >= 10.
        tenths: u32,
    },
}

impl FlareClass {
    pub const M1: FlareClass = FlareClass::Flare {
        letter: GoesLetter::M,
        tenths: 10,
    };

    pub fn flare(letter: GoesLetter, tenths: u32) -> Self {
        FlareClass::Flare { letter, tenths }
    }

    pub fn letter(self) -> Option<GoesLetter> {
        match self {
            FlareClass::Quiet => None,
            FlareClass::Flare { letter, .. } => Some(letter),
        }
    }

    pub fn magnitude(self) -> Option<f64> {
        match self {
            FlareClass::Quiet => None,
            FlareClass::Flare { tenths, .. } => Some(tenths as f64 / 10.0),
        }
    }

    pub fn is_major(self) -> bool {
        self >= FlareClass::M1
    }

    /// Parses `M2.2`, `X17`, `C1.55` (truncated to tenths) or `FQ`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("FQ") {
            return Some(FlareClass::Quiet);
        }
        let mut chars = s.chars();
        let letter = GoesLetter::from_char(chars.next()?.to_ascii_uppercase())?;
        let rest = chars.as_str();
        let (int, frac) = rest.split_once('.').unwrap_or((rest, ""));
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let whole: u32 = int.parse().ok()?;
        let tenth = frac.bytes().next().map_or(0, |b| (b - b'0') as u32);
        let tenths = whole.checked_mul(10)?.checked_add(tenth)?;
        (tenths >= 10).then_some(FlareClass::Flare { letter, tenths })
    }
}

impl fmt::Display for FlareClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlareClass::Quiet => f.write_str("FQ"),
            FlareClass::Flare { letter, tenths } => {
                write!(f, "{}{}.{}", letter.as_char(), tenths / 10, tenths % 10)
            }
        }
    }
}

/// Classifies a GOES peak X-ray flux using the decade thresholds
/// 1e-8 (A) through 1e-4 (X) W/m^2.
pub fn classify_peak_flux(peak_flux: f64) -> Result<FlareClass> {
    if !(peak_flux > 0.0 && peak_flux.is_finite()) {
        return Err(Error::Parameter(format!(
            "peak flux must be positive, got {peak_flux}"
        )));
    }
    let Some(letter) = GoesLetter::ALL
        .into_iter()
        .rev()
        .find(|l| peak_flux >= l.base_flux())
    else {
        return Ok(FlareClass::Quiet);
    };
    // The guard absorbs representation error: 2.2e-5 / 1e-5 * 10 is 21.999...
    let mut tenths = (peak_flux / letter.base_flux() * 10.0 + 1e-6).floor() as u32;
    if letter != GoesLetter::X {
        tenths = tenths.min(99);
    }
    Ok(FlareClass::Flare {
        letter,
        tenths: tenths.max(10),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Nf,
    Fl,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nf => "NF",
            Label::Fl => "FL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "NF" => Some(Label::Nf),
            "FL" => Some(Label::Fl),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlareLabel {
    pub label: Label,
    pub max_class: FlareClass,
}

impl FlareLabel {
    pub fn from_max_class(max_class: FlareClass) -> Self {
        FlareLabel {
            label: if max_class.is_major() {
                Label::Fl
            } else {
                Label::Nf
            },
            max_class,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventFlags {
    pub missing_noaa_ar: bool,
    pub below_a: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlareEvent {
    pub noaa_ar: Option<u32>,
    pub start_time: DateTime<Utc>,
    pub peak_time: DateTime<Utc>,
    pub end_time: DateTime<Utc>,
    pub class: FlareClass,
    pub peak_flux: Option<f64>,
    pub flags: EventFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Original,
    Augmented(AugmentationKind),
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Augmented(k) => k.as_str(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "original" {
            Some(Provenance::Original)
        } else {
            AugmentationKind::parse(s).map(Provenance::Augmented)
        }
    }
}

/// A patch with its rasters, metadata and label.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub id: String,
    pub raster: FluxRaster,
    pub bitmap: ArBitmap,
    pub metadata: PatchMetadata,
    pub label: FlareLabel,
    pub provenance: Provenance,
}

pub fn parse_flare_catalog(path: &Path) -> Result<Vec<FlareEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_flare_catalog_str(&text)
}

/// Parses `noaa_ar,start_time,peak_time,end_time,class[,peak_flux]`. The
/// header line is optional. Row numbers in errors are 1-based file lines.
pub fn parse_flare_catalog_str(text: &str) -> Result<Vec<FlareEvent>> {
    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields[0] == "noaa_ar" {
            continue;
        }
        if !(5..=6).contains(&fields.len()) {
            return Err(Error::row(
                row,
                "row",
                format!("expected 5 or 6 fields, found {}", fields.len()),
            ));
        }
        events.push(parse_catalog_row(row, &fields)?);
    }
    Ok(events)
}

fn parse_catalog_row(row: usize, fields: &[&str]) -> Result<FlareEvent> {
    let mut flags = EventFlags::default();
    let noaa_ar =
        match fields[0] {
            "" | "0" | "NA" | "none" => {
                flags.missing_noaa_ar = true;
                None
            }
            s => Some(s.parse::<u32>().map_err(|_| {
                Error::row(row, "noaa_ar", format!("not a positive integer: {s:?}"))
            })?),
        };
    let time = |i: usize, name: &str| {
        parse_timestamp(fields[i])
            .map_err(|_| Error::row(row, name, format!("unparsable timestamp {:?}", fields[i])))
    };
    let start_time = time(1, "start_time")?;
    let peak_time = time(2, "peak_time")?;
    let end_time = time(3, "end_time")?;
    if peak_time < start_time {
        return Err(Error::row(row, "peak_time", "peak before start"));
    }
    if end_time < peak_time {
        return Err(Error::row(row, "end_time", "end before peak"));
    }
    let peak_flux = match fields.get(5).copied().unwrap_or("") {
        "" => None,
        s => {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::row(row, "peak_flux", format!("not a number: {s:?}")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::row(row, "peak_flux", "must be positive"));
            }
            Some(v)
        }
    };
    let class = match (fields[4], peak_flux) {
        ("", Some(flux)) => classify_peak_flux(flux)?,
        ("", None) => return Err(Error::row(row, "class", "missing class and peak_flux")),
        (s, _) => FlareClass::parse(s)
            .ok_or_else(|| Error::row(row, "class", format!("unrecognised class {s:?}")))?,
    };
    if let Some(flux) = peak_flux {
        let from_flux = classify_peak_flux(flux)?;
        if from_flux.letter() != class.letter() {
            return Err(Error::row(
                row,
                "peak_flux",
                format!("{flux:e} W/m^2 is class {from_flux}, row says {class}"),
            ));
        }
    }
    flags.below_a = class == FlareClass::Quiet;
    Ok(FlareEvent {
        noaa_ar,
        start_time,
        peak_time,
        end_time,
        class,
        peak_flux,
        flags,
    })
}

pub const DEFAULT_HORIZON_HOURS: i64 = 24;

/// Labels a patch FL when an event of the same NOAA AR peaking in
/// `(observation_time, observation_time + horizon]` reaches M1.0.
pub fn label_patch(meta: &PatchMetadata, events: &[FlareEvent], horizon: Duration) -> FlareLabel {
    let Some(ar) = meta.noaa_ar else {
        return FlareLabel::from_max_class(FlareClass::Quiet);
    };
    let t0 = meta.observation_time;
    let t1 = t0 + horizon;
    let max_class = events
        .iter()
        .filter(|e| e.noaa_ar == Some(ar) && e.peak_time > t0 && e.peak_time <= t1)
        .map(|e| e.class)
        .max()
        .unwrap_or(FlareClass::Quiet);
    FlareLabel::from_max_class(max_class)
}

/// Events grouped by NOAA AR, for labelling many patches.
#[derive(Debug, Default)]
pub struct EventIndex {
    by_ar: BTreeMap<u32, Vec<FlareEvent>>,
}

impl EventIndex {
    pub fn new(events: &[FlareEvent]) -> Self {
        let mut by_ar: BTreeMap<u32, Vec<FlareEvent>> = BTreeMap::new();
        for e in events {
            if let Some(ar) = e.noaa_ar {
                by_ar.entry(ar).or_default().push(e.clone());
            }
        }
        EventIndex { by_ar }
    }

    pub fn label(&self, meta: &PatchMetadata, horizon: Duration) -> FlareLabel {
        let events = meta
            .noaa_ar
            .and_then(|ar| self.by_ar.get(&ar))
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        label_patch(meta, events, horizon)
    }
}

/// Four disjoint month groups covering the calendar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionScheme {
    groups: [Vec<u32>; 4],
}

impl Default for PartitionScheme {
    fn default() -> Self {
        PartitionScheme {
            groups: [
                vec![1, 2, 3],
                vec![4, 5, 6],
                vec![7, 8, 9],
                vec![10, 11, 12],
            ],
        }
    }
}

impl PartitionScheme {
    pub fn new(groups: [Vec<u32>; 4]) -> Result<Self> {
        let mut seen = HashSet::new();
        for g in &groups {
            for &m in g {
                if !(1..=12).contains(&m) || !seen.insert(m) {
                    return Err(Error::InvalidConfig(format!(
                        "month {m} invalid or repeated in partition scheme"
                    )));
                }
            }
        }
        if seen.len() != 12 {
            return Err(Error::InvalidConfig(
                "partition scheme must cover all twelve months".into(),
            ));
        }
        Ok(PartitionScheme { groups })
    }

    /// Parses `1-3;4-6;7-9;10-12` or `1,2,3;4,5,6;...`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::InvalidConfig(format!(
                "partition scheme needs four groups, got {s:?}"
            )));
        }
        let bad = || Error::InvalidConfig(format!("bad partition scheme {s:?}"));
        let mut groups: [Vec<u32>; 4] = Default::default();
        for (g, part) in groups.iter_mut().zip(parts) {
            for item in part.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if let Some((a, b)) = item.split_once('-') {
                    let a: u32 = a.trim().parse().map_err(|_| bad())?;
                    let b: u32 = b.trim().parse().map_err(|_| bad())?;
                    if a > b {
                        return Err(bad());
                    }
                    g.extend(a..=b);
                } else {
                    g.push(item.parse().map_err(|_| bad())?);
                }
            }
        }
        Self::new(groups)
    }

    pub fn groups(&self) -> &[Vec<u32>; 4] {
        &self.groups
    }

    pub fn partition_of_month(&self, month: u32) -> u8 {
        let idx = self
            .groups
            .iter()
            .position(|g| g.contains(&month))
            .expect("scheme covers every month");
        idx as u8 + 1
    }
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let groups: Vec<String> = self
            .groups
            .iter()
            .map(|g| g.iter().map(u32::to_string).collect::<Vec<_>>().join(","))
            .collect();
        f.write_str(&groups.join(";"))
    }
}

/// Partition id (1..=4) of a HARP series, keyed on its onset month so every
/// record of one series lands in the same partition.
pub fn assign_partition(onset: DateTime<Utc>, scheme: &PartitionScheme) -> u8 {
    scheme.partition_of_month(onset.month())
}

pub fn assign_partition_str(onset: &str, scheme: &PartitionScheme) -> Result<u8> {
    Ok(assign_partition(parse_timestamp(onset)?, scheme))
}

/// NF subclasses used for stratified undersampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NfStratum {
    Quiet,
    A,
    B,
    C,
}

impl NfStratum {
    pub const ALL: [NfStratum; 4] = [NfStratum::Quiet, NfStratum::A, NfStratum::B, NfStratum::C];

    pub fn of(class: FlareClass) -> Option<Self> {
        match class {
            FlareClass::Quiet => Some(NfStratum::Quiet),
            FlareClass::Flare { letter, .. } => match letter {
                GoesLetter::A => Some(NfStratum::A),
                GoesLetter::B => Some(NfStratum::B),
                GoesLetter::C => Some(NfStratum::C),
                GoesLetter::M | GoesLetter::X => None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub fraction_a: f64,
    pub fraction_b: f64,
    pub fraction_c: f64,
    pub fraction_fq: f64,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            fraction_a: 0.30,
            fraction_b: 0.30,
            fraction_c: 0.30,
            fraction_fq: 0.08,
            seed: 0,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("fraction_a", self.fraction_a),
            ("fraction_b", self.fraction_b),
            ("fraction_c", self.fraction_c),
            ("fraction_fq", self.fraction_fq),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidConfig(format!("{name}={f} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn fraction(&self, stratum: NfStratum) -> f64 {
        match stratum {
            NfStratum::Quiet => self.fraction_fq,
            NfStratum::A => self.fraction_a,
            NfStratum::B => self.fraction_b,
            NfStratum::C => self.fraction_c,
        }
    }

    /// `floor(fraction * count)`, robust to products like 0.29 * 100 = 28.999...
    pub fn quota(&self, stratum: NfStratum, count: usize) -> usize {
        let q = (self.fraction(stratum) * count as f64 + 1e-9).floor() as usize;
        q.min(count)
    }
}

/// A patch reduced to what the manifest needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub patch_id: String,
    pub metadata: PatchMetadata,
    pub partition: u8,
    pub label: FlareLabel,
    /// Path of the preprocessed image, relative to the output root.
    pub path: String,
}

/// Selects `floor(fraction * count)` records per NF stratum, uniformly without
/// replacement. Output keeps the input order.
pub fn undersample_nf(
    records: &[LabeledInstance],
    plan: &SamplingPlan,
) -> Result<Vec<LabeledInstance>> {
    undersample_nf_salted(records, plan, 0)
}

fn undersample_nf_salted(
    records: &[LabeledInstance],
    plan: &SamplingPlan,
    salt: u64,
) -> Result<Vec<LabeledInstance>> {
    plan.validate()?;
    let mut strata: BTreeMap<NfStratum, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if r.label.label == Label::Fl {
            return Err(Error::Misuse(format!(
                "FL record {} passed to NF undersampling",
                r.patch_id
            )));
        }
        let stratum = NfStratum::of(r.label.max_class).ok_or_else(|| {
            Error::Misuse(format!(
                "NF record {} carries class {}",
                r.patch_id, r.label.max_class
            ))
        })?;
        strata.entry(stratum).or_default().push(i);
    }
    let mut keep = Vec::new();
    for (stratum, members) in &strata {
        let k = plan.quota(*stratum, members.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(&[plan.seed, salt, *stratum as u64]));
        let picked = rand::seq::index::sample(&mut rng, members.len(), k);
        keep.extend(picked.iter().map(|j| members[j]));
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| records[i].clone()).collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetStats {
    /// Instances per maximum class in the window.
    pub quiet: usize,
    pub per_letter: [usize; 5],
    pub nf: usize,
    pub fl: usize,
}

impl DatasetStats {
    pub fn total(&self) -> usize {
        self.nf + self.fl
    }

    /// NF count over FL count; `None` without FL instances.
    pub fn imbalance_ratio(&self) -> Option<f64> {
        (self.fl > 0).then(|| self.nf as f64 / self.fl as f64)
    }

    /// Ratio rendered as `~1:N` with N rounded to the nearest integer.
    pub fn imbalance_label(&self) -> Option<String> {
        self.imbalance_ratio()
            .map(|r| format!("~1:{}", r.round() as u64))
    }
}

pub fn dataset_stats<'a>(labels: impl IntoIterator<Item = &'a FlareLabel>) -> DatasetStats {
    let mut s = DatasetStats::default();
    for l in labels {
        match l.max_class {
            FlareClass::Quiet => s.quiet += 1,
            FlareClass::Flare { letter, .. } => s.per_letter[letter as usize] += 1,
        }
        match l.label {
            Label::Nf => s.nf += 1,
            Label::Fl => s.fl += 1,
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }

    pub fn of_partition(partition: u8) -> Option<Self> {
        match partition {
            1 | 2 => Some(Split::Train),
            3 => Some(Split::Validation),
            4 => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub patch_id: String,
    pub harp_id: u32,
    pub partition: u8,
    pub split: Split,
    pub label: Label,
    pub provenance: Provenance,
    pub path: String,
}

/// Where augmented images go, relative to the output root.
pub fn augmented_path(patch_id: &str, kind: AugmentationKind) -> String {
    format!("augmented/{}.pgm", augmented_id(patch_id, kind))
}

/// Builds the split manifest. Partitions 1 and 2 form the training set: NF
/// instances are undersampled per partition and every FL instance is followed
/// by its five augmented rows. Partitions 3 and 4 pass through untouched as
/// validation and test. Rows are ordered by partition, then patch id.
pub fn build_manifest(
    records: &[LabeledInstance],
    plan: &SamplingPlan,
) -> Result<Vec<ManifestRow>> {
    plan.validate()?;
    let mut ids = HashSet::new();
    for r in records {
        if !ids.insert(r.patch_id.as_str()) {
            return Err(Error::DuplicateId(r.patch_id.clone()));
        }
        if Split::of_partition(r.partition).is_none() {
            return Err(Error::InvalidConfig(format!(
                "record {} has partition {}, expected 1..=4",
                r.patch_id, r.partition
            )));
        }
    }
    let mut sorted: Vec<&LabeledInstance> = records.iter().collect();
    sorted.sort_by(|a, b| (a.partition, &a.patch_id).cmp(&(b.partition, &b.patch_id)));

    let mut rows = Vec::new();
    for partition in 1..=4u8 {
        let members: Vec<&LabeledInstance> = sorted
            .iter()
            .copied()
            .filter(|r| r.partition == partition)
            .collect();
        let split = Split::of_partition(partition).expect("partition checked above");
        let kept: Vec<&LabeledInstance> = if split == Split::Train {
            let nf: Vec<LabeledInstance> = members
                .iter()
                .filter(|r| r.label.label == Label::Nf)
                .map(|r| (*r).clone())
                .collect();
            let sampled: HashSet<String> = undersample_nf_salted(&nf, plan, partition as u64)?
                .into_iter()
                .map(|r| r.patch_id)
                .collect();
            members
                .into_iter()
                .filter(|r| r.label.label == Label::Fl || sampled.contains(&r.patch_id))
                .collect()
        } else {
            members
        };
        for r in kept {
            let row = |provenance, patch_id: String, path: String| ManifestRow {
                patch_id,
                harp_id: r.metadata.harp_id,
                partition,
                split,
                label: r.label.label,
                provenance,
                path,
            };
            rows.push(row(
                Provenance::Original,
                r.patch_id.clone(),
                r.path.clone(),
            ));
            if split == Split::Train && r.label.label == Label::Fl {
                for kind in AugmentationKind::ALL {
                    rows.push(row(
                        Provenance::Augmented(kind),
                        augmented_id(&r.patch_id, kind),
                        augmented_path(&r.patch_id, kind),
                    ));
                }
            }
        }
    }
    let mut seen = HashSet::new();
    for row in &rows {
        if !seen.insert(row.patch_id.as_str()) {
            return Err(Error::DuplicateId(row.patch_id.clone()));
        }
    }
    Ok(rows)
}

/// Per-split, per-provenance counts of a manifest.
pub fn manifest_counts(rows: &[ManifestRow]) -> BTreeMap<(Split, Label, &'static str), usize> {
    let mut out = BTreeMap::new();
    for r in rows {
        *out.entry((r.split, r.label, r.provenance.as_str()))
            .or_insert(0) += 1;
    }
    out
}

/// Canonical instance id: `h<harp>_<yyyymmddThhmmss>`.
pub fn default_patch_id(meta: &PatchMetadata) -> String {
    format!(
        "h{}_{}",
        meta.harp_id,
        meta.observation_time.format("%Y%m%dT%H%M%S")
    )
}
