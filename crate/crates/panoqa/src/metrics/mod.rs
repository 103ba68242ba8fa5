//! Full-reference frame-level quality metrics.
//!
//! PSNR, SSIM and NLPD operate on aligned luma viewport frames (Eq.-style
//! per-frame scoring); WS-PSNR and S-PSNR are whole-panorama baselines that
//! compensate for the equirectangular oversampling in the plane and on the
//! sphere respectively. Externally computed per-frame scores (deep metrics
//! and the like) enter through the `frame_index,score` CSV seam.

mod nlpd;
mod ssim;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

pub use nlpd::{feasible_levels, nlpd, nlpd_with_levels};
pub use ssim::ssim;

use crate::error::{Error, Result};
use crate::sphere::{pixel_to_sphere, sphere_to_pixel, wrap_longitude, EquirectImage, SphericalPoint, ViewportFrame};
use crate::video::FrameSequence;

/// Peak signal value of the 8-bit pixel domain.
pub const PEAK: f64 = 255.0;

/// Cap substituted for infinite PSNR on identical inputs; also the upper
/// clamp, so score series stay finite for pooling.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Default sphere sample count for S-PSNR.
pub const S_PSNR_DEFAULT_SAMPLES: usize = 1 << 15;

/// Whether larger values of a metric mean better quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    HigherBetter,
    LowerBetter,
}

/// Name, polarity and (optional) value range of a quality metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDescriptor {
    pub name: String,
    pub polarity: Polarity,
    pub range: Option<(f64, f64)>,
}

impl MetricDescriptor {
    pub fn new(name: impl Into<String>, polarity: Polarity, range: Option<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            polarity,
            range,
        }
    }

    /// Descriptor for externally computed scores with a caller-declared
    /// polarity.
    pub fn external(name: impl Into<String>, polarity: Polarity) -> Self {
        Self::new(name, polarity, None)
    }
}

/// The natively implemented frame-level metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMetric {
    Psnr,
    Ssim,
    Nlpd,
}

impl FrameMetric {
    pub fn descriptor(self) -> MetricDescriptor {
        match self {
            FrameMetric::Psnr => {
                MetricDescriptor::new("psnr", Polarity::HigherBetter, Some((0.0, PSNR_CAP_DB)))
            }
            FrameMetric::Ssim => MetricDescriptor::new("ssim", Polarity::HigherBetter, Some((-1.0, 1.0))),
            FrameMetric::Nlpd => MetricDescriptor::new("nlpd", Polarity::LowerBetter, None),
        }
    }

    /// Score one aligned frame pair (luma inputs required).
    pub fn score(self, reference: &ViewportFrame, distorted: &ViewportFrame) -> Result<f64> {
        match self {
            FrameMetric::Psnr => psnr(reference, distorted),
            FrameMetric::Ssim => ssim(reference, distorted),
            FrameMetric::Nlpd => nlpd(reference, distorted),
        }
    }
}

fn require_luma(frame: &ViewportFrame, metric: &str) -> Result<()> {
    if frame.channels() != 1 {
        return Err(Error::invalid(format!("{metric} requires luma frames")));
    }
    Ok(())
}

fn check_frame_dims(x: &ViewportFrame, y: &ViewportFrame) -> Result<()> {
    if x.side() != y.side() || x.channels() != y.channels() {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}x{}", x.side(), x.side(), x.channels()),
            right: format!("{}x{}x{}", y.side(), y.side(), y.channels()),
        });
    }
    Ok(())
}

fn mse_to_psnr(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Peak signal-to-noise ratio in dB over luma frames, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr(x: &ViewportFrame, y: &ViewportFrame) -> Result<f64> {
    require_luma(x, "psnr")?;
    check_frame_dims(x, y)?;
    let mse = x
        .pixels()
        .iter()
        .zip(y.pixels())
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum::<f64>()
        / x.pixels().len() as f64;
    Ok(mse_to_psnr(mse))
}

/// PSNR over the equirectangular plane with per-row cos(latitude) weights,
/// compensating for the oversampling away from the equator. RGB inputs are
/// collapsed to luma first.
pub fn ws_psnr(reference: &EquirectImage, distorted: &EquirectImage) -> Result<f64> {
    if reference.width() != distorted.width()
        || reference.height() != distorted.height()
        || reference.channels() != distorted.channels()
    {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", reference.width(), reference.height()),
            right: format!("{}x{}", distorted.width(), distorted.height()),
        });
    }
    let x = reference.to_luma();
    let y = distorted.to_luma();
    let (w, h) = (x.width(), x.height());
    let mut weighted_err = 0.0;
    let mut weight_sum = 0.0;
    for v in 0..h {
        let weight = pixel_to_sphere(0, v, w, h).lat().cos();
        let row_x = &x.pixels()[v * w..(v + 1) * w];
        let row_y = &y.pixels()[v * w..(v + 1) * w];
        let row_err: f64 = row_x
            .iter()
            .zip(row_y)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum();
        weighted_err += weight * row_err;
        weight_sum += weight * w as f64;
    }
    Ok(mse_to_psnr(weighted_err / weight_sum))
}

/// Near-uniform sphere points: the canonical Fibonacci lattice (midpoint z
/// spacing, golden-angle longitudes). Deterministic, no jitter.
pub fn fibonacci_lattice(count: usize) -> Vec<SphericalPoint> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            SphericalPoint::new(wrap_longitude(golden_angle * i as f64), z.asin())
        })
        .collect()
}

/// PSNR over a deterministic near-uniform sampling of the sphere: both
/// images are evaluated bilinearly at the lattice points and the squared
/// differences averaged. RGB inputs are collapsed to luma first.
pub fn s_psnr(reference: &EquirectImage, distorted: &EquirectImage, n_samples: usize) -> Result<f64> {
    if reference.width() != distorted.width()
        || reference.height() != distorted.height()
        || reference.channels() != distorted.channels()
    {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", reference.width(), reference.height()),
            right: format!("{}x{}", distorted.width(), distorted.height()),
        });
    }
    if n_samples < 100 {
        return Err(Error::invalid("s-psnr needs at least 100 sphere samples"));
    }
    let x = reference.to_luma();
    let y = distorted.to_luma();
    let (w, h) = (x.width(), x.height());
    let sq_err: f64 = fibonacci_lattice(n_samples)
        .iter()
        .map(|&p| {
            let (u, v) = sphere_to_pixel(p, w, h);
            let d = x.sample_bilinear_luma(u + 0.5, v + 0.5) - y.sample_bilinear_luma(u + 0.5, v + 0.5);
            d * d
        })
        .sum();
    Ok(mse_to_psnr(sq_err / n_samples as f64))
}

/// An ordered series of per-frame quality values for one viewer.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScoreSeries {
    scores: Vec<f64>,
    metric: MetricDescriptor,
    rate: f64,
}

impl FrameScoreSeries {
    pub fn new(scores: Vec<f64>, metric: MetricDescriptor, rate: f64) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("frame score series"));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite frame score {bad}")));
        }
        Ok(Self { scores, metric, rate })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn metric(&self) -> &MetricDescriptor {
        &self.metric
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Serialize as `frame_index,score` CSV; exact round-trip through
    /// [`load_frame_scores`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_index,score\n");
        for (i, s) in self.scores.iter().enumerate() {
            let _ = writeln!(out, "{i},{s}");
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Score every aligned frame pair of two sequences. Frames are scored in
/// parallel but the series preserves frame order; RGB sequences are
/// collapsed to luma per frame.
pub fn score_frames(
    references: &FrameSequence,
    distorted: &FrameSequence,
    metric: FrameMetric,
) -> Result<FrameScoreSeries> {
    if references.len() != distorted.len() {
        return Err(Error::DimensionMismatch {
            left: format!("{} frames", references.len()),
            right: format!("{} frames", distorted.len()),
        });
    }
    if references.is_empty() {
        return Err(Error::Empty("frame sequence"));
    }
    let scores: Vec<f64> = references
        .frames()
        .par_iter()
        .zip(distorted.frames().par_iter())
        .map(|(rf, df)| {
            if rf.channels() == 1 {
                metric.score(rf, df)
            } else {
                metric.score(&rf.to_luma(), &df.to_luma())
            }
        })
        .collect::<Result<_>>()?;
    FrameScoreSeries::new(scores, metric.descriptor(), references.rate())
}

/// Load externally computed frame scores from `frame_index,score` CSV.
/// Indices must be contiguous from zero; gaps, duplicates and non-finite
/// values are parse errors naming the offending row.
pub fn load_frame_scores(path: &Path, metric: MetricDescriptor, rate: f64) -> Result<FrameScoreSeries> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r').trim() == "frame_index,score" => {}
        Some((_, header)) => {
            return Err(Error::parse(
                path,
                1,
                format!("expected header `frame_index,score`, found `{}`", header.trim()),
            ))
        }
        None => return Err(Error::parse(path, 1, "empty file")),
    }
    let mut scores = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (index_field, score_field) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, line_no, "expected `frame_index,score`"))?;
        let index: usize = index_field
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad frame index `{index_field}`")))?;
        if index != scores.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("frame index {index} out of order (expected {})", scores.len()),
            ));
        }
        let score: f64 = score_field
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad score `{score_field}`")))?;
        if !score.is_finite() {
            return Err(Error::parse(path, line_no, "non-finite score"));
        }
        scores.push(score);
    }
    if scores.is_empty() {
        return Err(Error::parse(path, 1, "no scores after header"));
    }
    FrameScoreSeries::new(scores, metric, rate)
}
