//! Flux-level augmentations for FL-labelled patches.
//!
//! All transforms operate on clamped flux rasters before byte scaling, so
//! polarity inversion is exact negation.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Label, PatchRecord, Provenance};
use crate::raster::{ArBitmap, FluxRaster, PipelineConfig};
use crate::seed;
use crate::{Error, Result};

pub const DEFAULT_BLUR_SIGMA: f64 = 1.0;
pub const DEFAULT_NOISE_AMPLITUDE: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AugmentationKind {
    PolarityInversion,
    GaussianBlur,
    FlipHorizontal,
    FlipVertical,
    BoundedNoise,
}

impl AugmentationKind {
    /// Every kind, in the order variants are emitted.
    pub const ALL: [AugmentationKind; 5] = [
        AugmentationKind::PolarityInversion,
        AugmentationKind::GaussianBlur,
        AugmentationKind::FlipHorizontal,
        AugmentationKind::FlipVertical,
        AugmentationKind::BoundedNoise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AugmentationKind::PolarityInversion => "polarity_inversion",
            AugmentationKind::GaussianBlur => "gaussian_blur",
            AugmentationKind::FlipHorizontal => "flip_horizontal",
            AugmentationKind::FlipVertical => "flip_vertical",
            AugmentationKind::BoundedNoise => "bounded_noise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

pub fn invert_polarity(raster: &FluxRaster) -> FluxRaster {
    raster.map_values(|v| -v)
}

fn flip_rows<T: Copy>(h: usize, w: usize, data: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for r in 0..h {
        out.extend(data[r * w..(r + 1) * w].iter().rev());
    }
    out
}

fn flip_cols<T: Copy>(h: usize, w: usize, data: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for r in (0..h).rev() {
        out.extend_from_slice(&data[r * w..(r + 1) * w]);
    }
    out
}

/// Mirrors across the vertical axis (reverses each row).
pub fn flip_horizontal(raster: &FluxRaster) -> FluxRaster {
    let (h, w) = (raster.height(), raster.width());
    FluxRaster::from_parts_unchecked(h, w, flip_rows(h, w, raster.values()))
}

/// Mirrors across the horizontal axis (reverses row order).
pub fn flip_vertical(raster: &FluxRaster) -> FluxRaster {
    let (h, w) = (raster.height(), raster.width());
    FluxRaster::from_parts_unchecked(h, w, flip_cols(h, w, raster.values()))
}

pub fn flip_bitmap_horizontal(bitmap: &ArBitmap) -> ArBitmap {
    let (h, w) = (bitmap.height(), bitmap.width());
    ArBitmap::from_parts_unchecked(h, w, flip_rows(h, w, bitmap.codes()))
}

pub fn flip_bitmap_vertical(bitmap: &ArBitmap) -> ArBitmap {
    let (h, w) = (bitmap.height(), bitmap.width());
    ArBitmap::from_parts_unchecked(h, w, flip_cols(h, w, bitmap.codes()))
}

/// Normalised 1-D Gaussian of radius `ceil(3 sigma)`, centre at index `radius`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!(
            "blur sigma must be > 0, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Reflects an out-of-range index back into `0..n`, repeating the edge sample.
#[inline]
fn mirror(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian blur with mirrored borders.
pub fn gaussian_blur(raster: &FluxRaster, sigma: f64) -> Result<FluxRaster> {
    let kernel = gaussian_kernel(sigma)?;
    let radius = (kernel.len() / 2) as i64;
    let (h, w) = (raster.height(), raster.width());
    let src = raster.values();

    let mut horiz = vec![0.0; h * w];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for c in 0..w {
            horiz[r * w + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * row[mirror(c as i64 + k as i64 - radius, w)])
                .sum();
        }
    }

    let (lo, hi) = src
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let v: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * horiz[mirror(r as i64 + k as i64 - radius, h) * w + c])
                .sum();
            // rounding in the weights can step one ulp outside the input range
            out[r * w + c] = v.clamp(lo, hi);
        }
    }
    Ok(FluxRaster::from_parts_unchecked(h, w, out))
}

/// Adds independent uniform noise in `[-amplitude, amplitude]` to every pixel,
/// then re-caps at `±clamp_cap`. The zero band is not re-applied.
pub fn add_bounded_noise(
    raster: &FluxRaster,
    amplitude: f64,
    seed: u64,
    config: &PipelineConfig,
) -> Result<FluxRaster> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::Parameter(format!(
            "noise amplitude must be > 0, got {amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-amplitude, amplitude);
    let cap = config.clamp_cap;
    Ok(raster.map_values(|v| (v + dist.sample(&mut rng)).clamp(-cap, cap)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSettings {
    pub blur_sigma: f64,
    pub noise_amplitude: f64,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        AugmentSettings {
            blur_sigma: DEFAULT_BLUR_SIGMA,
            noise_amplitude: DEFAULT_NOISE_AMPLITUDE,
        }
    }
}

/// Seed for the noise variant of one record.
pub fn variant_seed(seed: u64, harp_id: u32, observation_time: i64) -> u64 {
    seed::mix(&[seed, harp_id as u64, observation_time as u64])
}

pub fn augment_raster(
    raster: &FluxRaster,
    kind: AugmentationKind,
    noise_seed: u64,
    config: &PipelineConfig,
    settings: &AugmentSettings,
) -> Result<FluxRaster> {
    match kind {
        AugmentationKind::PolarityInversion => Ok(invert_polarity(raster)),
        AugmentationKind::GaussianBlur => gaussian_blur(raster, settings.blur_sigma),
        AugmentationKind::FlipHorizontal => Ok(flip_horizontal(raster)),
        AugmentationKind::FlipVertical => Ok(flip_vertical(raster)),
        AugmentationKind::BoundedNoise => {
            add_bounded_noise(raster, settings.noise_amplitude, noise_seed, config)
        }
    }
}

pub fn augmented_id(patch_id: &str, kind: AugmentationKind) -> String {
    format!("{patch_id}__{}", kind.as_str())
}

pub fn expand_fl_record(
    record: &PatchRecord,
    seed: u64,
    config: &PipelineConfig,
) -> Result<Vec<PatchRecord>> {
    expand_fl_record_with(record, seed, config, &AugmentSettings::default())
}

/// One variant per [`AugmentationKind`], in [`AugmentationKind::ALL`] order.
pub fn expand_fl_record_with(
    record: &PatchRecord,
    seed: u64,
    config: &PipelineConfig,
    settings: &AugmentSettings,
) -> Result<Vec<PatchRecord>> {
    if record.label.label != Label::Fl {
        return Err(Error::Misuse(format!(
            "only FL records are augmented; {} is NF",
            record.id
        )));
    }
    let noise_seed = variant_seed(
        seed,
        record.metadata.harp_id,
        record.metadata.observation_time.timestamp(),
    );
    AugmentationKind::ALL
        .iter()
        .map(|&kind| {
            let raster = augment_raster(&record.raster, kind, noise_seed, config, settings)?;
            let bitmap = match kind {
                AugmentationKind::FlipHorizontal => flip_bitmap_horizontal(&record.bitmap),
                AugmentationKind::FlipVertical => flip_bitmap_vertical(&record.bitmap),
                _ => record.bitmap.clone(),
            };
            Ok(PatchRecord {
                id: augmented_id(&record.id, kind),
                raster,
                bitmap,
                metadata: record.metadata.clone(),
                label: record.label,
                provenance: Provenance::Augmented(kind),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FlareClass, FlareLabel, GoesLetter};
    use crate::raster::PatchMetadata;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn r(rows: &[&[f64]]) -> FluxRaster {
        FluxRaster::from_rows(rows).unwrap()
    }

    fn record(label: Label) -> PatchRecord {
        let t = Utc.with_ymd_and_hms(2014, 11, 6, 18, 0, 0).unwrap();
        let onset = Utc.with_ymd_and_hms(2014, 11, 1, 0, 0, 0).unwrap();
        let values: Vec<f64> = (0..64).map(|i| (i as f64 * 37.0) % 512.0 - 256.0).collect();
        PatchRecord {
            id: "h4781_t001".into(),
            raster: FluxRaster::new(8, 8, values).unwrap(),
            bitmap: ArBitmap::filled(8, 8, 34).unwrap(),
            metadata: PatchMetadata::new(4781, Some(12205), t, 12.5, onset).unwrap(),
            label: FlareLabel {
                label,
                max_class: match label {
                    Label::Fl => FlareClass::flare(GoesLetter::X, 16),
                    Label::Nf => FlareClass::Quiet,
                },
            },
            provenance: Provenance::Original,
        }
    }

    #[test]
    fn polarity_examples() {
        assert_eq!(invert_polarity(&r(&[&[10.0, -20.0]])), r(&[&[-10.0, 20.0]]));
        let z = FluxRaster::filled(2, 3, 0.0).unwrap();
        assert_eq!(invert_polarity(&z).values(), z.values());
    }

    #[test]
    fn flip_examples() {
        let m = r(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(flip_horizontal(&m), r(&[&[2.0, 1.0], &[4.0, 3.0]]));
        assert_eq!(flip_vertical(&m), r(&[&[3.0, 4.0], &[1.0, 2.0]]));
        let col = r(&[&[1.0], &[2.0], &[3.0]]);
        assert_eq!(flip_horizontal(&col), col);
        let row = r(&[&[1.0, 2.0, 3.0]]);
        assert_eq!(flip_vertical(&row), row);
    }

    #[test]
    fn kernel_is_normalised() {
        let k = gaussian_kernel(1.0).unwrap();
        assert_eq!(k.len(), 7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((k[3] - 0.399_050_279_652_455).abs() < 1e-12);
        assert_eq!(gaussian_kernel(0.4).unwrap().len(), 5);
        assert!(gaussian_kernel(0.0).is_err());
        assert!(gaussian_kernel(-1.0).is_err());
    }

    #[test]
    fn blur_impulse_center() {
        let mut v = vec![0.0; 21 * 21];
        v[10 * 21 + 10] = 100.0;
        let out = gaussian_blur(&FluxRaster::new(21, 21, v).unwrap(), 1.0).unwrap();
        assert!((out.get(10, 10) - 15.924_112_569_070_244).abs() < 1e-9);
        assert!((out.values().iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn blur_constant_is_identity() {
        let c = FluxRaster::filled(5, 3, 123.5).unwrap();
        assert_eq!(gaussian_blur(&c, 1.0).unwrap(), c);
        // radius exceeds the raster: mirroring must wrap repeatedly
        let one = FluxRaster::filled(1, 1, -40.0).unwrap();
        assert_eq!(gaussian_blur(&one, 2.0).unwrap(), one);
    }

    #[test]
    fn blur_rejects_bad_sigma() {
        let c = FluxRaster::filled(2, 2, 1.0).unwrap();
        assert!(matches!(gaussian_blur(&c, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn mirror_indexing() {
        let idx: Vec<usize> = (-4..8).map(|i| mirror(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert!((-5..5).all(|i| mirror(i, 1) == 0));
    }

    #[test]
    fn noise_bounds_and_recap() {
        let cfg = PipelineConfig::default();
        let base = FluxRaster::new(
            4,
            4,
            (0..16)
                .map(|i| [256.0, -256.0, 100.0, 0.0][i % 4])
                .collect(),
        )
        .unwrap();
        let out = add_bounded_noise(&base, 25.0, 7, &cfg).unwrap();
        for (a, b) in base.values().iter().zip(out.values()) {
            assert!((a - b).abs() <= 25.0);
            assert!(b.abs() <= 256.0);
            if *a == 256.0 {
                assert!((231.0..=256.0).contains(b));
            }
        }
        assert_eq!(out, add_bounded_noise(&base, 25.0, 7, &cfg).unwrap());
        assert_ne!(out, add_bounded_noise(&base, 25.0, 8, &cfg).unwrap());
        assert!(add_bounded_noise(&base, 0.0, 7, &cfg).is_err());
    }

    #[test]
    fn noise_keeps_small_perturbations() {
        // values inside the zero band must survive; the band is not re-applied
        let cfg = PipelineConfig::default();
        let z = FluxRaster::filled(16, 16, 0.0).unwrap();
        let out = add_bounded_noise(&z, 25.0, 1, &cfg).unwrap();
        assert!(out.values().iter().filter(|v| **v != 0.0).count() > 200);
    }

    #[test]
    fn expand_produces_five_ordered_variants() {
        let cfg = PipelineConfig::default();
        let rec = record(Label::Fl);
        let vars = expand_fl_record(&rec, 42, &cfg).unwrap();
        assert_eq!(vars.len(), 5);
        let kinds: Vec<_> = vars.iter().map(|v| v.provenance).collect();
        assert_eq!(
            kinds,
            AugmentationKind::ALL.map(Provenance::Augmented).to_vec()
        );
        assert_eq!(vars[0].raster, invert_polarity(&rec.raster));
        assert_eq!(vars[2].raster, flip_horizontal(&rec.raster));
        assert!(vars
            .iter()
            .all(|v| v.label == rec.label && v.metadata == rec.metadata));
        assert_eq!(vars[4].id, "h4781_t001__bounded_noise");
        assert_eq!(vars, expand_fl_record(&rec, 42, &cfg).unwrap());
    }

    #[test]
    fn expand_rejects_nf() {
        let cfg = PipelineConfig::default();
        assert!(matches!(
            expand_fl_record(&record(Label::Nf), 1, &cfg),
            Err(Error::Misuse(_))
        ));
    }

    fn raster_strategy() -> impl Strategy<Value = FluxRaster> {
        (1usize..10, 1usize..10).prop_flat_map(|(h, w)| {
            prop::collection::vec(-256.0f64..=256.0, h * w)
                .prop_map(move |v| FluxRaster::new(h, w, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn involutions_and_commutation(m in raster_strategy()) {
            prop_assert_eq!(invert_polarity(&invert_polarity(&m)), m.clone());
            prop_assert_eq!(flip_horizontal(&flip_horizontal(&m)), m.clone());
            prop_assert_eq!(flip_vertical(&flip_vertical(&m)), m.clone());
            prop_assert_eq!(
                flip_horizontal(&flip_vertical(&m)),
                flip_vertical(&flip_horizontal(&m))
            );
            prop_assert_eq!(
                invert_polarity(&flip_horizontal(&m)),
                flip_horizontal(&invert_polarity(&m))
            );
            prop_assert_eq!(
                invert_polarity(&flip_vertical(&m)),
                flip_vertical(&invert_polarity(&m))
            );
        }

        #[test]
        fn value_preservation(m in raster_strategy()) {
            prop_assert_eq!(invert_polarity(&m).total_unsigned_flux(), m.total_unsigned_flux());
            let sorted = |r: &FluxRaster| {
                let mut v = r.values().to_vec();
                v.sort_by(f64::total_cmp);
                v
            };
            prop_assert_eq!(sorted(&flip_horizontal(&m)), sorted(&m));
            prop_assert_eq!(sorted(&flip_vertical(&m)), sorted(&m));
        }

        #[test]
        fn blur_stays_in_range(m in raster_strategy(), sigma in 0.3f64..3.0) {
            let out = gaussian_blur(&m, sigma).unwrap();
            let lo = m.values().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = m.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!((out.height(), out.width()), (m.height(), m.width()));
            prop_assert!(out.values().iter().all(|v| *v >= lo && *v <= hi));
        }

        #[test]
        fn noise_is_bounded(m in raster_strategy(), seed in any::<u64>()) {
            let cfg = PipelineConfig::default();
            let out = add_bounded_noise(&m, 25.0, seed, &cfg).unwrap();
            for (a, b) in m.values().iter().zip(out.values()) {
                prop_assert!((a - b).abs() <= 25.0 + 1e-12);
                prop_assert!(b.abs() <= 256.0);
            }
        }
    }
}
