//! Raster types and the per-patch preprocessing stages.
//!
//! A patch goes through, in order: bitmap masking and cropping, the ROI width
//! gate, flux clamping, zero padding, max-USFLUX windowing (only when a
//! dimension still exceeds the target side) and linear byte scaling.

use std::fmt;

use chrono::{DateTime, Utc};

use crate::window;
use crate::{Error, Result};

/// Bitmap codes marking pixels inside the active region.
pub const ROI_CODES: [u8; 2] = [33, 34];
/// Every code a SHARP-style bitmap may carry.
pub const VALID_CODES: [u8; 5] = [0, 1, 2, 33, 34];

/// Line-of-sight flux in Gauss, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxRaster {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FluxRaster {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::InvalidRaster(format!(
                "{height}x{width} raster needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRaster(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(FluxRaster {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Builds a raster from nested rows. Panics on ragged input; meant for tests and fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        assert!(
            rows.iter().all(|r| r.as_ref().len() == width),
            "ragged rows"
        );
        let values = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.width..(row + 1) * self.width]
    }

    /// Sum of absolute flux over the whole raster.
    pub fn total_unsigned_flux(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// Copies the `height`x`width` block starting at (`top`, `left`).
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::ContractViolation(format!(
                "crop {height}x{width} at ({top}, {left}) outside {}x{}",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(height * width);
        for r in top..top + height {
            values.extend_from_slice(&self.row(r)[left..left + width]);
        }
        Ok(FluxRaster {
            height,
            width,
            values,
        })
    }

    pub(crate) fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        FluxRaster {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn from_parts_unchecked(height: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        FluxRaster {
            height,
            width,
            values,
        }
    }
}

/// SHARP-style bitmap co-registered with a [`FluxRaster`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArBitmap {
    height: usize,
    width: usize,
    codes: Vec<u8>,
}

impl ArBitmap {
    pub fn new(height: usize, width: usize, codes: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || codes.len() != height * width {
            return Err(Error::InvalidRaster(format!(
                "{height}x{width} bitmap with {} codes",
                codes.len()
            )));
        }
        if let Some((index, &code)) = codes
            .iter()
            .enumerate()
            .find(|(_, c)| !VALID_CODES.contains(c))
        {
            return Err(Error::InvalidCode { code, index });
        }
        Ok(ArBitmap {
            height,
            width,
            codes,
        })
    }

    pub fn filled(height: usize, width: usize, code: u8) -> Result<Self> {
        Self::new(height, width, vec![code; height * width])
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        assert!(
            rows.iter().all(|r| r.as_ref().len() == width),
            "ragged rows"
        );
        let codes = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        Self::new(height, width, codes)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub(crate) fn from_parts_unchecked(height: usize, width: usize, codes: Vec<u8>) -> Self {
        ArBitmap {
            height,
            width,
            codes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchMetadata {
    pub harp_id: u32,
    pub noaa_ar: Option<u32>,
    pub observation_time: DateTime<Utc>,
    pub center_longitude: f64,
    pub harp_onset_time: DateTime<Utc>,
}

impl PatchMetadata {
    pub fn new(
        harp_id: u32,
        noaa_ar: Option<u32>,
        observation_time: DateTime<Utc>,
        center_longitude: f64,
        harp_onset_time: DateTime<Utc>,
    ) -> Result<Self> {
        let meta = PatchMetadata {
            harp_id,
            noaa_ar,
            observation_time,
            center_longitude,
            harp_onset_time,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.harp_id == 0 {
            return Err(Error::InvalidMetadata("harp_id must be positive".into()));
        }
        if self.noaa_ar == Some(0) {
            return Err(Error::InvalidMetadata("noaa_ar must be positive".into()));
        }
        if !(0.0..=90.0).contains(&self.center_longitude.abs()) {
            return Err(Error::InvalidMetadata(format!(
                "center_longitude {} outside [-90, 90]",
                self.center_longitude
            )));
        }
        if self.harp_onset_time > self.observation_time {
            return Err(Error::InvalidMetadata(
                "harp_onset_time is after observation_time".into(),
            ));
        }
        Ok(())
    }
}

/// Square 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePatch {
    side: usize,
    bytes: Vec<u8>,
}

impl ImagePatch {
    pub fn new(side: usize, bytes: Vec<u8>) -> Result<Self> {
        if side == 0 || bytes.len() != side * side {
            return Err(Error::ContractViolation(format!(
                "image of side {side} needs {} bytes, got {}",
                side * side,
                bytes.len()
            )));
        }
        Ok(ImagePatch { side, bytes })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Flux magnitude cap in Gauss.
    pub clamp_cap: f64,
    /// Values with `|v| <= zero_band` are zeroed.
    pub zero_band: f64,
    pub min_roi_width: usize,
    pub target_side: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            clamp_cap: 256.0,
            zero_band: 25.0,
            min_roi_width: 70,
            target_side: 512,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zero_band > 0.0 && self.clamp_cap > self.zero_band && self.clamp_cap.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "need clamp_cap > zero_band > 0, got clamp_cap={} zero_band={}",
                self.clamp_cap, self.zero_band
            )));
        }
        if self.min_roi_width == 0 {
            return Err(Error::InvalidConfig("min_roi_width must be >= 1".into()));
        }
        if self.target_side == 0 {
            return Err(Error::InvalidConfig("target_side must be >= 1".into()));
        }
        Ok(())
    }
}

/// Pipeline stage names, used to tag rejections and errors in logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    RoiExtract,
    SizeGate,
    ClampFlux,
    PadToTarget,
    WindowSelect,
    ScaleToBytes,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::RoiExtract => "roi_extract",
            Stage::SizeGate => "size_gate",
            Stage::ClampFlux => "clamp_flux",
            Stage::PadToTarget => "pad_to_target",
            Stage::WindowSelect => "window_select",
            Stage::ScaleToBytes => "scale_to_bytes",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    Accept,
    Reject,
}

/// Result of running a patch through the pipeline. A rejection is a normal
/// outcome, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum PatchOutcome<T> {
    Accepted(T),
    Rejected { stage: Stage, reason: String },
}

impl<T> PatchOutcome<T> {
    pub fn accepted(self) -> Option<T> {
        match self {
            PatchOutcome::Accepted(v) => Some(v),
            PatchOutcome::Rejected { .. } => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> PatchOutcome<U> {
        match self {
            PatchOutcome::Accepted(v) => PatchOutcome::Accepted(f(v)),
            PatchOutcome::Rejected { stage, reason } => PatchOutcome::Rejected { stage, reason },
        }
    }
}

/// Zeroes every pixel outside the active region and crops to the bounding box
/// of the ROI codes.
pub fn roi_extract(raster: &FluxRaster, bitmap: &ArBitmap) -> Result<FluxRaster> {
    if raster.height != bitmap.height || raster.width != bitmap.width {
        return Err(Error::InvalidPair {
            raster_h: raster.height,
            raster_w: raster.width,
            bitmap_h: bitmap.height,
            bitmap_w: bitmap.width,
        });
    }
    let w = raster.width;
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for (i, code) in bitmap.codes.iter().enumerate() {
        if ROI_CODES.contains(code) {
            let (r, c) = (i / w, i % w);
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
        }
    }
    if r0 == usize::MAX {
        return Err(Error::EmptyRoi);
    }
    let (h, cw) = (r1 - r0 + 1, c1 - c0 + 1);
    let mut values = Vec::with_capacity(h * cw);
    for r in r0..=r1 {
        for c in c0..=c1 {
            let i = r * w + c;
            values.push(if ROI_CODES.contains(&bitmap.codes[i]) {
                raster.values[i]
            } else {
                0.0
            });
        }
    }
    Ok(FluxRaster::from_parts_unchecked(h, cw, values))
}

/// Rejects ROIs narrower than `min_roi_width`. Height is not consulted.
pub fn size_gate(raster: &FluxRaster, config: &PipelineConfig) -> GateDecision {
    if raster.width < config.min_roi_width {
        GateDecision::Reject
    } else {
        GateDecision::Accept
    }
}

#[inline]
pub fn clamp_value(v: f64, config: &PipelineConfig) -> f64 {
    let mag = v.abs();
    if mag <= config.zero_band {
        0.0
    } else if mag > config.clamp_cap {
        config.clamp_cap.copysign(v)
    } else {
        v
    }
}

/// Caps flux at `±clamp_cap` and zeroes the `±zero_band` noise band (inclusive).
pub fn clamp_flux(raster: &FluxRaster, config: &PipelineConfig) -> FluxRaster {
    raster.map_values(|v| clamp_value(v, config))
}

/// Zero-pads each dimension shorter than `target_side`, centring the data with
/// any odd extra row or column on the bottom or right.
pub fn pad_to_target(raster: &FluxRaster, config: &PipelineConfig) -> FluxRaster {
    let side = config.target_side;
    let out_h = raster.height.max(side);
    let out_w = raster.width.max(side);
    if out_h == raster.height && out_w == raster.width {
        return raster.clone();
    }
    let top = (out_h - raster.height) / 2;
    let left = (out_w - raster.width) / 2;
    let mut values = vec![0.0; out_h * out_w];
    for r in 0..raster.height {
        let dst = (top + r) * out_w + left;
        values[dst..dst + raster.width].copy_from_slice(raster.row(r));
    }
    FluxRaster::from_parts_unchecked(out_h, out_w, values)
}

#[inline]
pub fn scale_value(v: f64, clamp_cap: f64) -> u8 {
    let scaled = ((v + clamp_cap) * 255.0 / (2.0 * clamp_cap) + 0.5).floor();
    scaled.clamp(0.0, 255.0) as u8
}

/// Maps `[-clamp_cap, clamp_cap]` linearly onto `0..=255` with round-half-up.
pub fn scale_to_bytes(raster: &FluxRaster, config: &PipelineConfig) -> Result<ImagePatch> {
    if raster.height != raster.width || raster.height != config.target_side {
        return Err(Error::ContractViolation(format!(
            "scale_to_bytes needs a {0}x{0} raster, got {1}x{2}",
            config.target_side, raster.height, raster.width
        )));
    }
    let cap = config.clamp_cap;
    if let Some(i) = raster.values.iter().position(|v| v.abs() > cap) {
        return Err(Error::ContractViolation(format!(
            "value {} at index {i} outside [-{cap}, {cap}]",
            raster.values[i]
        )));
    }
    let bytes = raster.values.iter().map(|&v| scale_value(v, cap)).collect();
    ImagePatch::new(raster.height, bytes)
}

/// Runs every stage up to, but not including, byte scaling. The result is the
/// `target_side`-square clamped flux raster that augmentation works on.
pub fn process_patch_raster(
    raster: &FluxRaster,
    bitmap: &ArBitmap,
    config: &PipelineConfig,
) -> Result<PatchOutcome<FluxRaster>> {
    config.validate()?;
    let roi = roi_extract(raster, bitmap)?;
    if size_gate(&roi, config) == GateDecision::Reject {
        return Ok(PatchOutcome::Rejected {
            stage: Stage::SizeGate,
            reason: format!(
                "roi width {} < min_roi_width {}",
                roi.width, config.min_roi_width
            ),
        });
    }
    let clamped = clamp_flux(&roi, config);
    let padded = pad_to_target(&clamped, config);
    let side = config.target_side;
    let windowed = if padded.height > side || padded.width > side {
        let sel = window::select_max_usflux_window(&padded, side)?;
        padded.crop(sel.top, sel.left, side, side)?
    } else {
        padded
    };
    Ok(PatchOutcome::Accepted(windowed))
}

/// Full pipeline: ROI extraction through byte scaling.
pub fn process_patch(
    raster: &FluxRaster,
    bitmap: &ArBitmap,
    config: &PipelineConfig,
) -> Result<PatchOutcome<ImagePatch>> {
    match process_patch_raster(raster, bitmap, config)? {
        PatchOutcome::Accepted(r) => Ok(PatchOutcome::Accepted(scale_to_bytes(&r, config)?)),
        PatchOutcome::Rejected { stage, reason } => Ok(PatchOutcome::Rejected { stage, reason }),
    }
}
