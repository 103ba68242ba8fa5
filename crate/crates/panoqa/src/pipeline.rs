//! End-to-end assessment of one panorama pair: downsample, convert along
//! each configured viewer's trajectory, score frames, pool over time and
//! average across viewers.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::metrics::{
    s_psnr, ws_psnr, FrameMetric, FrameScoreSeries, MetricDescriptor, Polarity,
    S_PSNR_DEFAULT_SAMPLES,
};
use crate::pooling::{aggregate_viewers, pool, PoolingConfig, QualityScore};
use crate::scanpath::{
    brownian_latitude_variant, default_scanpath, rotation_scanpath, GazeModelConfig, Scanpath,
    ViewingCondition,
};
use crate::sphere::{downsample, EquirectImage, SphericalPoint};
use crate::video::{map_frame_pairs, ConversionConfig};

/// Which trajectory drives viewport extraction.
#[derive(Debug, Clone, PartialEq)]
pub enum ScanpathSource {
    /// Equatorial sweep (the default model).
    Default,
    /// Counterclockwise full rotation along the equator.
    Rotation,
    /// Default sweep with a Brownian walk on the latitude; per-viewer walks
    /// are seeded with `seed + viewer_index`.
    Brownian { sigma: f64 },
    /// A recorded trajectory shared by all viewers.
    Recorded(Scanpath),
}

/// Quality model selector.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricChoice {
    /// Viewport-video model on a native frame metric.
    Frame(FrameMetric),
    /// Plane-domain baseline with cos(latitude) weighting.
    WsPsnr,
    /// Sphere-domain baseline on a uniform lattice.
    SPsnr { samples: usize },
}

impl MetricChoice {
    pub fn descriptor(&self) -> MetricDescriptor {
        match self {
            MetricChoice::Frame(metric) => metric.descriptor(),
            MetricChoice::WsPsnr => MetricDescriptor::new("ws-psnr", Polarity::HigherBetter, None),
            MetricChoice::SPsnr { .. } => {
                MetricDescriptor::new("s-psnr", Polarity::HigherBetter, None)
            }
        }
    }

    pub fn default_s_psnr() -> Self {
        MetricChoice::SPsnr {
            samples: S_PSNR_DEFAULT_SAMPLES,
        }
    }
}

/// Everything needed to run one assessment.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub conversion: ConversionConfig,
    pub pooling: PoolingConfig,
    pub gaze: GazeModelConfig,
    /// One pooled score is produced per starting point ("viewer").
    pub starting_points: Vec<SphericalPoint>,
    pub exploration_time: f64,
    pub scanpath: ScanpathSource,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            conversion: ConversionConfig::default(),
            pooling: PoolingConfig::default(),
            gaze: GazeModelConfig::default(),
            starting_points: default_starting_points(),
            exploration_time: 15.0,
            scanpath: ScanpathSource::Default,
            seed: 0,
        }
    }
}

/// The four equatorial starting points used when no recorded conditions are
/// available.
pub fn default_starting_points() -> Vec<SphericalPoint> {
    vec![
        SphericalPoint::new(-FRAC_PI_2, 0.0),
        SphericalPoint::new(0.0, 0.0),
        SphericalPoint::new(FRAC_PI_2, 0.0),
        SphericalPoint::new(PI, 0.0),
    ]
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.conversion.validate()?;
        self.pooling.validate()?;
        self.gaze.validate()?;
        if self.starting_points.is_empty() {
            return Err(Error::Empty("starting points"));
        }
        if !(self.exploration_time.is_finite() && self.exploration_time > 0.0) {
            return Err(Error::invalid("exploration time must be positive"));
        }
        Ok(())
    }

    fn scanpath_for_viewer(&self, viewer: usize) -> Scanpath {
        let rate = self.conversion.sampling_rate();
        match &self.scanpath {
            ScanpathSource::Default => default_scanpath(self.exploration_time, &self.gaze, rate),
            ScanpathSource::Rotation => rotation_scanpath(self.exploration_time, rate),
            ScanpathSource::Brownian { sigma } => brownian_latitude_variant(
                &default_scanpath(self.exploration_time, &self.gaze, rate),
                *sigma,
                self.seed.wrapping_add(viewer as u64),
            ),
            ScanpathSource::Recorded(path) => path.clone(),
        }
    }
}

/// Result of assessing one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    /// Cross-viewer average (the model's quality estimate).
    pub score: QualityScore,
    pub per_viewer: Vec<QualityScore>,
    /// Per-frame series per viewer; empty for the whole-panorama baselines.
    pub per_frame: Vec<FrameScoreSeries>,
}

/// Assess one reference/distorted pair with the configured model.
///
/// Both panoramas are collapsed to luma and downsampled before scoring.
/// For frame metrics each starting point becomes one viewer: the pair is
/// converted along that viewer's trajectory (frames are scored as they are
/// extracted, never materialized as whole sequences), pooled over time, and
/// the viewer scores averaged.
pub fn assess_pair(
    reference: &EquirectImage,
    distorted: &EquirectImage,
    metric: &MetricChoice,
    cfg: &PipelineConfig,
) -> Result<Assessment> {
    cfg.validate()?;
    if reference.width() != distorted.width() || reference.height() != distorted.height() {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", reference.width(), reference.height()),
            right: format!("{}x{}", distorted.width(), distorted.height()),
        });
    }
    let ref_img = downsample(&reference.to_luma());
    let dist_img = downsample(&distorted.to_luma());

    match metric {
        MetricChoice::WsPsnr => {
            let value = ws_psnr(&ref_img, &dist_img)?;
            let score = QualityScore {
                value,
                metric: metric.descriptor(),
                viewer_count: 1,
            };
            Ok(Assessment {
                per_viewer: vec![score.clone()],
                per_frame: Vec::new(),
                score,
            })
        }
        MetricChoice::SPsnr { samples } => {
            let value = s_psnr(&ref_img, &dist_img, *samples)?;
            let score = QualityScore {
                value,
                metric: metric.descriptor(),
                viewer_count: 1,
            };
            Ok(Assessment {
                per_viewer: vec![score.clone()],
                per_frame: Vec::new(),
                score,
            })
        }
        MetricChoice::Frame(frame_metric) => {
            let rate = cfg.conversion.sampling_rate();
            let mut per_viewer = Vec::with_capacity(cfg.starting_points.len());
            let mut per_frame = Vec::with_capacity(cfg.starting_points.len());
            for (viewer, &start) in cfg.starting_points.iter().enumerate() {
                let path = cfg.scanpath_for_viewer(viewer);
                let condition = ViewingCondition::new(start, cfg.exploration_time)?;
                let scores = map_frame_pairs(
                    &ref_img,
                    &dist_img,
                    &condition,
                    &path,
                    &cfg.conversion,
                    |_, rf, df| frame_metric.score(rf, df),
                )?;
                let series = FrameScoreSeries::new(scores, frame_metric.descriptor(), rate)?;
                per_viewer.push(pool(&series, &cfg.pooling)?);
                per_frame.push(series);
            }
            let score = aggregate_viewers(&per_viewer)?;
            Ok(Assessment {
                score,
                per_viewer,
                per_frame,
            })
        }
    }
}
