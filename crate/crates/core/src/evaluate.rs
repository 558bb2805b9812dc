//! Forecast verification: confusion counts, TSS, HSS and CSS, threshold
//! calibration on a validation set, and longitude-sliced evaluation.

use std::fmt::Write as _;
use std::ops::Add;

use chrono::{DateTime, Utc};

use crate::dataset::Label;
use crate::exec::Exec;
use crate::{Error, Result};

/// One externally produced model output.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub patch_id: String,
    pub observation_time: DateTime<Utc>,
    pub center_longitude: f64,
    pub score: f64,
    pub true_label: Label,
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Parameter(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        if !(0.0..=90.0).contains(&self.center_longitude.abs()) {
            return Err(Error::Parameter(format!(
                "longitude {} outside [-90, 90]",
                self.center_longitude
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    /// Actual positives, `tp + fn`.
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Actual negatives, `tn + fp`.
    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }

    #[inline]
    pub fn record(&mut self, predicted_fl: bool, actual: Label) {
        match (predicted_fl, actual) {
            (true, Label::Fl) => self.tp += 1,
            (true, Label::Nf) => self.fp += 1,
            (false, Label::Nf) => self.tn += 1,
            (false, Label::Fl) => self.fn_ += 1,
        }
    }

    /// Counts a predictor that says FL exactly where this one says NF.
    pub fn with_predictions_swapped(&self) -> Self {
        ConfusionCounts {
            tp: self.fn_,
            fn_: self.tp,
            fp: self.tn,
            tn: self.fp,
        }
    }

    pub fn scores(&self) -> Result<SkillScores> {
        let t = tss(self)?;
        let h = hss(self)?;
        Ok(SkillScores {
            tss: t,
            hss: h,
            css: css(t, h),
        })
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: Self) -> Self {
        merge_counts(self, o)
    }
}

pub fn merge_counts(a: ConfusionCounts, b: ConfusionCounts) -> ConfusionCounts {
    ConfusionCounts {
        tp: a.tp + b.tp,
        tn: a.tn + b.tn,
        fp: a.fp + b.fp,
        fn_: a.fn_ + b.fn_,
    }
}

/// Predicted FL iff `score >= threshold`.
pub fn confusion_counts(records: &[PredictionRecord], threshold: f64) -> ConfusionCounts {
    confusion_counts_with(records, threshold, Exec::Sequential)
}

pub fn confusion_counts_with(
    records: &[PredictionRecord],
    threshold: f64,
    exec: Exec,
) -> ConfusionCounts {
    exec.fold_reduce(
        records,
        ConfusionCounts::default,
        |mut acc, r| {
            acc.record(r.score >= threshold, r.true_label);
            acc
        },
        merge_counts,
    )
}

/// True Skill Statistic: recall minus false-alarm rate.
pub fn tss(c: &ConfusionCounts) -> Result<f64> {
    let (p, n) = (c.positives(), c.negatives());
    if p == 0 || n == 0 {
        return Err(Error::UndefinedScore(format!(
            "TSS needs both classes (P={p}, N={n})"
        )));
    }
    Ok(c.tp as f64 / p as f64 - c.fp as f64 / n as f64)
}

/// Heidke Skill Score.
pub fn hss(c: &ConfusionCounts) -> Result<f64> {
    let (p, n) = (c.positives() as f64, c.negatives() as f64);
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let denom = p * (fn_ + tn) + (tp + fp) * n;
    if denom <= 0.0 {
        return Err(Error::UndefinedScore("HSS denominator is zero".to_string()));
    }
    Ok(2.0 * (tp * tn - fn_ * fp) / denom)
}

/// Composite Skill Score: geometric mean of TSS and HSS, zero when they disagree in sign.
pub fn css(tss: f64, hss: f64) -> f64 {
    let product = tss * hss;
    if product < 0.0 {
        0.0
    } else {
        product.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkillScores {
    pub tss: f64,
    pub hss: f64,
    pub css: f64,
}

/// The calibration grid 0.01, 0.02, ..., 0.99.
pub fn threshold_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    pub scores: SkillScores,
    /// CSS at every grid point, in grid order.
    pub curve: Vec<(f64, SkillScores)>,
}

pub fn calibrate_threshold(validation: &[PredictionRecord]) -> Result<f64> {
    Ok(calibrate_threshold_with(validation, Exec::Sequential)?.threshold)
}

/// Picks the grid threshold maximising CSS, preferring the smallest on ties.
pub fn calibrate_threshold_with(
    validation: &[PredictionRecord],
    exec: Exec,
) -> Result<Calibration> {
    let base = confusion_counts(validation, 0.5);
    if base.positives() == 0 || base.negatives() == 0 {
        return Err(Error::UndefinedScore(format!(
            "calibration needs FL and NF records (FL={}, NF={})",
            base.positives(),
            base.negatives()
        )));
    }
    // Sorting once lets every grid point count with two binary searches.
    let mut fl: Vec<f64> = Vec::new();
    let mut nf: Vec<f64> = Vec::new();
    for r in validation {
        match r.true_label {
            Label::Fl => fl.push(r.score),
            Label::Nf => nf.push(r.score),
        }
    }
    fl.sort_by(f64::total_cmp);
    nf.sort_by(f64::total_cmp);
    let below = |v: &[f64], t: f64| v.partition_point(|&s| s < t) as u64;

    let grid = threshold_grid();
    let curve: Vec<(f64, SkillScores)> = exec
        .map(&grid, |&t| {
            let fn_ = below(&fl, t);
            let tn = below(&nf, t);
            let counts = ConfusionCounts {
                tp: fl.len() as u64 - fn_,
                fn_,
                tn,
                fp: nf.len() as u64 - tn,
            };
            counts.scores().map(|s| (t, s))
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let mut best = curve[0];
    for &(t, s) in &curve[1..] {
        if s.css > best.1.css {
            best = (t, s);
        }
    }
    Ok(Calibration {
        threshold: best.0,
        scores: best.1,
        curve,
    })
}

/// Counts plus scores for one slice of the evaluation set. `scores` is `None`
/// when the slice lacks one of the classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetScores {
    pub name: String,
    pub counts: ConfusionCounts,
    pub scores: Option<SkillScores>,
}

impl SubsetScores {
    fn from_counts(name: String, counts: ConfusionCounts) -> Self {
        SubsetScores {
            name,
            counts,
            scores: counts.scores().ok(),
        }
    }
}

pub const DEFAULT_LONGITUDE_LIMITS: [f64; 5] = [30.0, 45.0, 60.0, 75.0, 90.0];

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "threshold {threshold} outside (0, 1)"
        )))
    }
}

/// Scores over records with `|longitude| <= limit`, one row per limit.
pub fn evaluate_longitude_subsets(
    records: &[PredictionRecord],
    threshold: f64,
    limits: &[f64],
    exec: Exec,
) -> Result<Vec<SubsetScores>> {
    check_threshold(threshold)?;
    let per_limit = exec.fold_reduce(
        records,
        || vec![ConfusionCounts::default(); limits.len()],
        |mut acc, r| {
            let lon = r.center_longitude.abs();
            let fl = r.score >= threshold;
            for (c, &l) in acc.iter_mut().zip(limits) {
                if lon <= l {
                    c.record(fl, r.true_label);
                }
            }
            acc
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x + y).collect(),
    );
    Ok(limits
        .iter()
        .zip(per_limit)
        .map(|(l, c)| SubsetScores::from_counts(format!("within_{l}"), c))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    /// |lon| <= 30
    Central,
    /// 30 < |lon| <= 60
    Middle,
    /// 60 < |lon| <= 90
    NearLimb,
}

impl Zone {
    pub const ALL: [Zone; 3] = [Zone::Central, Zone::Middle, Zone::NearLimb];

    pub fn of_longitude(lon: f64) -> Zone {
        let a = lon.abs();
        if a <= 30.0 {
            Zone::Central
        } else if a <= 60.0 {
            Zone::Middle
        } else {
            Zone::NearLimb
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Zone::Central => "zone_1",
            Zone::Middle => "zone_2",
            Zone::NearLimb => "zone_3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTable {
    pub zones: [SubsetScores; 3],
}

impl ZoneTable {
    pub fn merged_counts(&self) -> ConfusionCounts {
        self.zones
            .iter()
            .fold(ConfusionCounts::default(), |a, z| a + z.counts)
    }
}

pub fn evaluate_zones(
    records: &[PredictionRecord],
    threshold: f64,
    exec: Exec,
) -> Result<ZoneTable> {
    check_threshold(threshold)?;
    let counts = exec.fold_reduce(
        records,
        || [ConfusionCounts::default(); 3],
        |mut acc, r| {
            let z = Zone::of_longitude(r.center_longitude) as usize;
            acc[z].record(r.score >= threshold, r.true_label);
            acc
        },
        |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]],
    );
    Ok(ZoneTable {
        zones: Zone::ALL
            .map(|z| SubsetScores::from_counts(z.name().to_string(), counts[z as usize])),
    })
}

pub const REPORT_HEADER: &str = "subset,tp,fp,tn,fn,tss,hss,css";

/// Renders `subset,tp,fp,tn,fn,tss,hss,css` with six-decimal scores. Undefined
/// scores are written as `undefined`.
pub fn render_report(rows: &[SubsetScores]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let c = r.counts;
        let _ = write!(out, "{},{},{},{},{}", r.name, c.tp, c.fp, c.tn, c.fn_);
        match r.scores {
            Some(s) => {
                let _ = writeln!(out, ",{:.6},{:.6},{:.6}", s.tss, s.hss, s.css);
            }
            None => out.push_str(",undefined,undefined,undefined\n"),
        }
    }
    out
}
