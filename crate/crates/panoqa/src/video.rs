//! Panorama-pair to moving-camera frame sequences.
//!
//! A panorama plus a viewing condition and a scanpath become an ordered
//! sequence of square viewports, one per sampling instant; the distorted
//! panorama is rendered along the *same* trajectory so the two sequences are
//! pairwise aligned.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scanpath::{resample, Scanpath, ViewingCondition};
use crate::sphere::{default_viewport_side, extract_viewport, EquirectImage, SphericalPoint, ViewportFrame};

/// Conversion knobs: the sampling-rate stride, the device rate it divides,
/// the viewport field of view, and an optional side override.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionConfig {
    /// Stride s ≥ 1 dividing the native rate.
    pub stride: u32,
    /// Native sampling rate of the gaze recorder in Hz.
    pub native_rate: f64,
    /// Viewport field of view in radians.
    pub fov: f64,
    /// Square viewport side in pixels; `None` selects
    /// `round(height · fov / π)` for the converted panorama.
    pub viewport_side: Option<usize>,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        Self {
            stride: 1,
            native_rate: 20.0,
            fov: std::f64::consts::FRAC_PI_3,
            viewport_side: None,
        }
    }
}

impl ConversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride < 1 {
            return Err(Error::invalid("stride must be at least 1"));
        }
        if !(self.native_rate > 0.0 && self.native_rate.is_finite()) {
            return Err(Error::invalid("native rate must be positive"));
        }
        if !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return Err(Error::invalid("field of view must lie in (0, \u{3c0})"));
        }
        if let Some(side) = self.viewport_side {
            if side < 2 {
                return Err(Error::invalid("viewport side must be >= 2"));
            }
        }
        Ok(())
    }

    /// Effective sampling rate: the native rate divided by the stride.
    pub fn sampling_rate(&self) -> f64 {
        self.native_rate / self.stride as f64
    }

    /// Viewport side used for a panorama of the given height.
    pub fn side_for(&self, height: usize) -> usize {
        self.viewport_side
            .unwrap_or_else(|| default_viewport_side(height, self.fov))
    }
}

/// An ordered moving-camera video: the viewports of one viewer's trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<ViewportFrame>,
    rate: f64,
    condition: ViewingCondition,
    scanpath_id: String,
}

impl FrameSequence {
    pub fn frames(&self) -> &[ViewportFrame] {
        &self.frames
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn condition(&self) -> &ViewingCondition {
        &self.condition
    }

    pub fn scanpath_id(&self) -> &str {
        &self.scanpath_id
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Persist as zero-padded `frame_%04d.png` files plus a `sequence.json`
    /// metadata record in `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let wrap_io = |source| Error::Io {
            path: dir.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(wrap_io)?;
        for (k, frame) in self.frames.iter().enumerate() {
            frame.save_png(&dir.join(format!("frame_{k:04}.png")))?;
        }
        let first = self.frames.first();
        let meta = SequenceMeta {
            rate_hz: self.rate,
            frame_count: self.frames.len(),
            fov_rad: first.map(|f| f.fov()).unwrap_or_default(),
            side: first.map(|f| f.side()).unwrap_or_default(),
            starting_point_lon_rad: self.condition.starting_point.lon(),
            starting_point_lat_rad: self.condition.starting_point.lat(),
            exploration_time_sec: self.condition.exploration_time,
            scanpath: self.scanpath_id.clone(),
        };
        let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        let meta_path = dir.join("sequence.json");
        std::fs::write(&meta_path, json).map_err(|source| Error::Io {
            path: meta_path,
            source,
        })
    }
}

/// Metadata stored next to a dumped frame sequence.
#[derive(Debug, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub rate_hz: f64,
    pub frame_count: usize,
    pub fov_rad: f64,
    pub side: usize,
    pub starting_point_lon_rad: f64,
    pub starting_point_lat_rad: f64,
    pub exploration_time_sec: f64,
    pub scanpath: String,
}

/// The per-frame viewport centres of one conversion: the resampled scanpath
/// offsets applied to the starting point.
fn viewport_centers(path: &Scanpath, cfg: &ConversionConfig, condition: &ViewingCondition) -> Result<Vec<SphericalPoint>> {
    let rate = cfg.sampling_rate();
    let resampled = resample(path, rate, condition.exploration_time);
    if resampled.is_empty() {
        return Err(Error::invalid(
            "exploration time is shorter than one frame interval; no frames to extract",
        ));
    }
    Ok(resampled
        .samples()
        .iter()
        .map(|(_, offset)| condition.starting_point.offset_by(*offset))
        .collect())
}

fn extract_all(
    img: &EquirectImage,
    centers: &[SphericalPoint],
    fov: f64,
    side: usize,
) -> Result<Vec<ViewportFrame>> {
    centers
        .par_iter()
        .map(|&c| extract_viewport(img, c, fov, side))
        .collect()
}

/// Convert one panorama into a frame sequence along `path`.
pub fn convert(
    img: &EquirectImage,
    condition: &ViewingCondition,
    path: &Scanpath,
    cfg: &ConversionConfig,
) -> Result<FrameSequence> {
    cfg.validate()?;
    let centers = viewport_centers(path, cfg, condition)?;
    let side = cfg.side_for(img.height());
    let frames = extract_all(img, &centers, cfg.fov, side)?;
    Ok(FrameSequence {
        frames,
        rate: cfg.sampling_rate(),
        condition: condition.clone(),
        scanpath_id: path.label().to_string(),
    })
}

/// Convert a reference/distorted pair along one shared trajectory. The two
/// sequences use identical centres, fov, side and rate, so frame k of one
/// aligns with frame k of the other.
pub fn convert_pair(
    reference: &EquirectImage,
    distorted: &EquirectImage,
    condition: &ViewingCondition,
    path: &Scanpath,
    cfg: &ConversionConfig,
) -> Result<(FrameSequence, FrameSequence)> {
    cfg.validate()?;
    check_same_dims(reference, distorted)?;
    let centers = viewport_centers(path, cfg, condition)?;
    let side = cfg.side_for(reference.height());
    let ref_frames = extract_all(reference, &centers, cfg.fov, side)?;
    let dist_frames = extract_all(distorted, &centers, cfg.fov, side)?;
    let make = |frames| FrameSequence {
        frames,
        rate: cfg.sampling_rate(),
        condition: condition.clone(),
        scanpath_id: path.label().to_string(),
    };
    Ok((make(ref_frames), make(dist_frames)))
}

/// Streaming variant of [`convert_pair`]: render each aligned frame pair,
/// apply `op`, and collect the results in frame order without keeping the
/// frames. Frame extraction runs in parallel; `op` must be pure.
pub fn map_frame_pairs<T, F>(
    reference: &EquirectImage,
    distorted: &EquirectImage,
    condition: &ViewingCondition,
    path: &Scanpath,
    cfg: &ConversionConfig,
    op: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &ViewportFrame, &ViewportFrame) -> Result<T> + Sync,
{
    cfg.validate()?;
    check_same_dims(reference, distorted)?;
    let centers = viewport_centers(path, cfg, condition)?;
    let side = cfg.side_for(reference.height());
    centers
        .par_iter()
        .enumerate()
        .map(|(k, &c)| {
            let rf = extract_viewport(reference, c, cfg.fov, side)?;
            let df = extract_viewport(distorted, c, cfg.fov, side)?;
            op(k, &rf, &df)
        })
        .collect()
}

fn check_same_dims(a: &EquirectImage, b: &EquirectImage) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}x{}", a.width(), a.height(), a.channels()),
            right: format!("{}x{}x{}", b.width(), b.height(), b.channels()),
        });
    }
    Ok(())
}
