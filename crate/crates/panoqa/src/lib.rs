//! Full-reference quality assessment of 360° panoramas.
//!
//! A panorama pair (reference and distorted equirectangular images) is turned
//! into a pair of aligned moving-camera videos by sampling rectilinear
//! viewports along a gaze scanpath, each frame pair is scored with a 2D
//! full-reference metric, the per-frame scores are pooled over time, and the
//! per-viewer results are averaged into a single quality value. A small
//! statistics module benchmarks such models against subjective ratings.
//!
//! The crate is organised along that pipeline:
//!
//! * [`sphere`] — equirectangular ↔ sphere conversions, bilinear sampling
//!   with seam wrap-around, viewport extraction, resolution preprocessing;
//! * [`scanpath`] — viewing conditions and gaze trajectories, generated or
//!   loaded from CSV recordings;
//! * [`video`] — panorama-to-frame-sequence conversion;
//! * [`metrics`] — PSNR, SSIM and the normalized Laplacian pyramid distance
//!   on viewport frames, plus the plane/sphere baselines WS-PSNR and S-PSNR
//!   and a CSV seam for externally computed frame scores;
//! * [`pooling`] — temporal pooling (hysteresis model and five simpler
//!   strategies) and cross-viewer aggregation;
//! * [`eval`] — logistic mapping, PLCC, SRCC and the residual-variance
//!   F-test;
//! * [`pipeline`] / [`benchmark`] — pipeline composition and dataset runs.

pub mod benchmark;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod pipeline;
pub mod pooling;
pub mod scanpath;
pub mod sphere;
pub mod video;

pub use error::{Error, Result};
