//! Equirectangular ↔ sphere geometry.
//!
//! Coordinate conventions used throughout the crate:
//!
//! * Longitude φ is east-positive in (−π, π], latitude θ is north-positive in
//!   [−π/2, π/2].
//! * Pixel (u, v) of a W×H equirectangular image is centred at
//!   φ = ((u + 0.5)/W)·2π − π, θ = π/2 − ((v + 0.5)/H)·π, so row 0 touches
//!   the north pole and column 0 the −π meridian.
//! * [`sphere_to_pixel`] returns *index-space* coordinates (the centre of
//!   pixel `i` is at coordinate `i`); [`EquirectImage::sample_bilinear`]
//!   takes *texel-space* coordinates (centre of pixel `i` at `i + 0.5`).
//!   The two differ by the 0.5 offset and nothing else.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// ITU-R BT.601 weights used when collapsing RGB to a single luma plane.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Wrap a longitude into (−π, π].
pub fn wrap_longitude(lon: f64) -> f64 {
    if lon > -PI && lon <= PI {
        return lon; // already in range, keep the exact bits
    }
    let r = (lon + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    lon: f64,
    lat: f64,
}

impl SphericalPoint {
    /// Build a point, wrapping the longitude into (−π, π] and clamping the
    /// latitude to [−π/2, π/2].
    pub fn new(lon: f64, lat: f64) -> Self {
        Self {
            lon: wrap_longitude(lon),
            lat: lat.clamp(-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn lon(self) -> f64 {
        self.lon
    }

    pub fn lat(self) -> f64 {
        self.lat
    }

    /// Component-wise offset: longitudes add modulo 2π, latitudes add and
    /// clamp at the poles.
    pub fn offset_by(self, offset: SphericalPoint) -> SphericalPoint {
        SphericalPoint::new(self.lon + offset.lon, self.lat + offset.lat)
    }
}

/// Map an equirectangular pixel index to the sphere (pixel-centre convention).
///
/// Panics if the index is outside the grid.
pub fn pixel_to_sphere(u: usize, v: usize, width: usize, height: usize) -> SphericalPoint {
    assert!(
        u < width && v < height,
        "pixel index ({u}, {v}) outside {width}x{height} grid"
    );
    let lon = (u as f64 + 0.5) / width as f64 * TAU - PI;
    let lat = FRAC_PI_2 - (v as f64 + 0.5) / height as f64 * PI;
    SphericalPoint::new(lon, lat)
}

/// Exact algebraic inverse of [`pixel_to_sphere`]. The returned coordinates
/// are continuous; `u` is interpreted modulo the width, `v` may fall outside
/// [0, H−1] near the poles and is clamped when sampling.
pub fn sphere_to_pixel(p: SphericalPoint, width: usize, height: usize) -> (f64, f64) {
    let u = (p.lon() + PI) / TAU * width as f64 - 0.5;
    let v = (FRAC_PI_2 - p.lat()) / PI * height as f64 - 0.5;
    (u, v)
}

/// Default square viewport side for a panorama of the given height:
/// `round(height · fov / π)`, never below 2.
pub fn default_viewport_side(height: usize, fov: f64) -> usize {
    (height as f64 * fov / PI).round().max(2.0) as usize
}

/// Bilinear taps shared by all channels of one sample position.
struct Taps {
    c0: usize,
    c1: usize,
    fu: f64,
    r0: usize,
    r1: usize,
    fv: f64,
}

/// An equirectangular panorama with pixel values stored at floating
/// precision in [0, 255], interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl EquirectImage {
    /// Build an image from raw samples, validating the value domain.
    /// A width that is not twice the height is tolerated with a warning —
    /// such inputs cover less than the full sphere but still sample fine.
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be nonzero"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "channel count must be 1 (luma) or 3 (RGB), got {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "pixel buffer holds {} values, expected {}",
                pixels.len(),
                width * height * channels
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 255.0) {
            return Err(Error::invalid(format!(
                "pixel value {bad} outside the finite [0, 255] domain"
            )));
        }
        let img = Self::from_parts(width, height, channels, pixels);
        if !img.is_full_sphere() {
            log::warn!("equirect image is {width}x{height}; expected width = 2 x height for a full sphere");
        }
        Ok(img)
    }

    /// Internal constructor for buffers produced by the crate itself
    /// (resampling can overshoot 255 by an ulp, which `new` would reject).
    pub(crate) fn from_parts(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            pixels,
        }
    }

    /// Decode an 8-bit grayscale or RGB PNG; values are widened to f64.
    /// Alpha channels are dropped, higher bit depths are rejected.
    pub fn from_png(path: &Path) -> Result<Self> {
        let decoded = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let (width, height, channels, pixels) = match decoded_kind(&decoded) {
            1 => {
                let img = decoded.to_luma8();
                let (w, h) = img.dimensions();
                let px = img.pixels().map(|p| p.0[0] as f64).collect::<Vec<_>>();
                (w as usize, h as usize, 1, px)
            }
            3 => {
                let img = decoded.to_rgb8();
                let (w, h) = img.dimensions();
                let px = img
                    .pixels()
                    .flat_map(|p| p.0.iter().map(|&c| c as f64))
                    .collect::<Vec<_>>();
                (w as usize, h as usize, 3, px)
            }
            _ => {
                return Err(Error::invalid(format!(
                    "{}: only 8-bit grayscale or RGB PNG input is supported",
                    path.display()
                )))
            }
        };
        Self::new(width, height, channels, pixels)
    }

    /// Write as an 8-bit PNG, rounding and clamping samples.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_png_impl(path, self.width, self.height, self.channels, &self.pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn is_full_sphere(&self) -> bool {
        self.width == 2 * self.height
    }

    /// The channel values of one pixel.
    pub fn pixel(&self, u: usize, v: usize) -> &[f64] {
        let start = (v * self.width + u) * self.channels;
        &self.pixels[start..start + self.channels]
    }

    /// Mean over all samples (all channels pooled).
    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Collapse RGB to luma with BT.601 weights; luma images pass through.
    pub fn to_luma(&self) -> EquirectImage {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|rgb| LUMA_WEIGHTS[0] * rgb[0] + LUMA_WEIGHTS[1] * rgb[1] + LUMA_WEIGHTS[2] * rgb[2])
            .collect();
        EquirectImage::from_parts(self.width, self.height, 1, pixels)
    }

    fn taps(&self, u: f64, v: f64, col_shift: i64) -> Taps {
        let w = self.width as i64;
        let h = self.height as i64;
        let x = u - 0.5;
        let xf = x.floor();
        let fu = x - xf;
        let i0 = xf as i64 + col_shift;
        let c0 = i0.rem_euclid(w) as usize;
        let c1 = (i0 + 1).rem_euclid(w) as usize;
        let y = v - 0.5;
        let yf = y.floor();
        let fv = y - yf;
        let j0 = yf as i64;
        let r0 = j0.clamp(0, h - 1) as usize;
        let r1 = (j0 + 1).clamp(0, h - 1) as usize;
        Taps { c0, c1, fu, r0, r1, fv }
    }

    fn sample_taps(&self, t: &Taps, channel: usize) -> f64 {
        let idx = |row: usize, col: usize| (row * self.width + col) * self.channels + channel;
        let p00 = self.pixels[idx(t.r0, t.c0)];
        let p01 = self.pixels[idx(t.r0, t.c1)];
        let p10 = self.pixels[idx(t.r1, t.c0)];
        let p11 = self.pixels[idx(t.r1, t.c1)];
        // Two-stage lerp: exact on constants and at pixel centres.
        let top = p00 + t.fu * (p01 - p00);
        let bottom = p10 + t.fu * (p11 - p10);
        top + t.fv * (bottom - top)
    }

    /// Bilinear sample at texel coordinates (centre of pixel (i, j) at
    /// (i + 0.5, j + 0.5)). The horizontal coordinate wraps around the seam;
    /// the vertical coordinate clamps to the pole rows. Returns one value
    /// per channel.
    ///
    /// Panics on non-finite coordinates.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Vec<f64> {
        assert!(u.is_finite() && v.is_finite(), "non-finite sample coordinate");
        let taps = self.taps(u, v, 0);
        (0..self.channels).map(|c| self.sample_taps(&taps, c)).collect()
    }

    /// Single-channel fast path of [`sample_bilinear`] for luma images.
    pub fn sample_bilinear_luma(&self, u: f64, v: f64) -> f64 {
        assert!(self.channels == 1, "sample_bilinear_luma requires a luma image");
        assert!(u.is_finite() && v.is_finite(), "non-finite sample coordinate");
        let taps = self.taps(u, v, 0);
        self.sample_taps(&taps, 0)
    }
}

fn decoded_kind(img: &image::DynamicImage) -> usize {
    use image::DynamicImage::*;
    match img {
        ImageLuma8(_) | ImageLumaA8(_) => 1,
        ImageRgb8(_) | ImageRgba8(_) => 3,
        _ => 0,
    }
}

fn save_png_impl(path: &Path, width: usize, height: usize, channels: usize, pixels: &[f64]) -> Result<()> {
    let wrap_io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(wrap_io)?;
        }
    }
    let bytes: Vec<u8> = pixels.iter().map(|&p| p.round().clamp(0.0, 255.0) as u8).collect();
    let color = if channels == 1 {
        image::ColorType::L8
    } else {
        image::ColorType::Rgb8
    };
    image::save_buffer_with_format(
        path,
        &bytes,
        width as u32,
        height as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// One square rectilinear viewport rendered from a panorama.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewportFrame {
    side: usize,
    center: SphericalPoint,
    fov: f64,
    channels: usize,
    pixels: Vec<f64>,
}

impl ViewportFrame {
    pub fn new(
        side: usize,
        center: SphericalPoint,
        fov: f64,
        channels: usize,
        pixels: Vec<f64>,
    ) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid(format!("viewport side must be >= 2, got {side}")));
        }
        if !(fov > 0.0 && fov < PI) {
            return Err(Error::invalid(format!(
                "field of view must lie in (0, \u{3c0}), got {fov} rad"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid("channel count must be 1 or 3"));
        }
        if pixels.len() != side * side * channels {
            return Err(Error::invalid("pixel buffer does not match side x side x channels"));
        }
        Ok(Self {
            side,
            center,
            fov,
            channels,
            pixels,
        })
    }

    /// Convenience constructor for a luma frame with default framing
    /// metadata; handy for building metric test inputs.
    pub fn from_luma(side: usize, pixels: Vec<f64>) -> Result<Self> {
        Self::new(side, SphericalPoint::new(0.0, 0.0), PI / 3.0, 1, pixels)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn center(&self) -> SphericalPoint {
        self.center
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn to_luma(&self) -> ViewportFrame {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|rgb| LUMA_WEIGHTS[0] * rgb[0] + LUMA_WEIGHTS[1] * rgb[1] + LUMA_WEIGHTS[2] * rgb[2])
            .collect();
        ViewportFrame {
            side: self.side,
            center: self.center,
            fov: self.fov,
            channels: 1,
            pixels,
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_png_impl(path, self.side, self.side, self.channels, &self.pixels)
    }
}

/// Render a square rectilinear (gnomonic) viewport.
///
/// The output grid is tangent to the unit sphere at `center`, spans
/// [−tan(fov/2), tan(fov/2)] along both tangent axes at pixel centres, and
/// its "up" axis follows the local meridian (no roll). Pixel values are
/// fetched with wrap/clamp bilinear sampling.
///
/// The centre longitude enters the sampler as a column offset split into an
/// integer part (applied to tap indices in integer arithmetic) and a
/// fractional remainder, so shifting the centre by a whole number of columns
/// relocates the sampling grid without perturbing the interpolation weights.
pub fn extract_viewport(
    img: &EquirectImage,
    center: SphericalPoint,
    fov: f64,
    side: usize,
) -> Result<ViewportFrame> {
    if !(fov > 0.0 && fov < PI) {
        return Err(Error::invalid(format!(
            "field of view must lie in (0, \u{3c0}), got {fov} rad"
        )));
    }
    if side < 2 {
        return Err(Error::invalid(format!("viewport side must be >= 2, got {side}")));
    }

    let half_extent = (fov / 2.0).tan();
    let (sin_lat, cos_lat) = center.lat().sin_cos();
    let w = img.width() as f64;
    let h = img.height() as f64;
    let col_offset = center.lon() / TAU * w;
    let col_shift_f = col_offset.round();
    let col_frac = col_offset - col_shift_f; // exact: |col_frac| <= 0.5
    let col_shift = col_shift_f as i64;
    let channels = img.channels();

    let mut pixels = vec![0.0; side * side * channels];
    pixels
        .par_chunks_mut(side * channels)
        .enumerate()
        .for_each(|(row, out_row)| {
            let y = (1.0 - 2.0 * (row as f64 + 0.5) / side as f64) * half_extent;
            // Pitch of the tangent plane point (x, y, 1) to the centre
            // latitude; only y enters, so hoist per row.
            let dy = y * cos_lat + sin_lat;
            let dz = cos_lat - y * sin_lat;
            for col in 0..side {
                let x = (2.0 * (col as f64 + 0.5) / side as f64 - 1.0) * half_extent;
                let lon_rel = x.atan2(dz);
                let lat = dy.atan2(x.hypot(dz));
                let u = (lon_rel + PI) / TAU * w + col_frac;
                let v = (FRAC_PI_2 - lat) / PI * h;
                let taps = img.taps(u, v, col_shift);
                for c in 0..channels {
                    out_row[col * channels + c] = img.sample_taps(&taps, c);
                }
            }
        });

    Ok(ViewportFrame {
        side,
        center,
        fov,
        channels,
        pixels,
    })
}

/// Reduce a panorama so its shorter side is at most 1024 pixels.
///
/// Images already within range pass through unchanged. Larger images are
/// box-filtered by the smallest integer factor that brings the shorter side
/// to 1024 or below; when the dimensions do not divide evenly the image is
/// first cropped by at most factor − 1 pixels on the right/bottom.
pub fn downsample(img: &EquirectImage) -> EquirectImage {
    let short = img.width().min(img.height());
    if short <= 1024 {
        return img.clone();
    }
    let factor = short.div_ceil(1024);
    let new_w = img.width() / factor;
    let new_h = img.height() / factor;
    let channels = img.channels();
    let norm = 1.0 / (factor * factor) as f64;

    let mut pixels = vec![0.0; new_w * new_h * channels];
    pixels
        .par_chunks_mut(new_w * channels)
        .enumerate()
        .for_each(|(oy, out_row)| {
            for ox in 0..new_w {
                for c in 0..channels {
                    let mut acc = 0.0;
                    for dy in 0..factor {
                        let row = oy * factor + dy;
                        for dx in 0..factor {
                            let col = ox * factor + dx;
                            acc += img.pixels[(row * img.width + col) * channels + c];
                        }
                    }
                    out_row[ox * channels + c] = acc * norm;
                }
            }
        });

    EquirectImage::from_parts(new_w, new_h, channels, pixels)
}
