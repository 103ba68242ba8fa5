//! Structural similarity over luma frames.
//!
//! The standard single-scale formulation: an 11×11 Gaussian window with
//! σ = 1.5, K₁ = 0.01, K₂ = 0.03 on the 8-bit dynamic range, aggregated as
//! the plain mean of the local SSIM map over the valid region (no boundary
//! padding).

use crate::error::{Error, Result};
use crate::sphere::ViewportFrame;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const L: f64 = 255.0;

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, slot) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *slot = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
        sum += *slot;
    }
    for slot in &mut k {
        *slot /= sum;
    }
    k
}

/// Separable valid-mode Gaussian filter: rows then columns.
fn filter_valid(src: &[f64], width: usize, height: usize, kernel: &[f64; WINDOW]) -> Vec<f64> {
    let out_w = width - WINDOW + 1;
    let out_h = height - WINDOW + 1;
    let mut rows = vec![0.0; out_w * height];
    for y in 0..height {
        for x in 0..out_w {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                acc += k * src[y * width + x + t];
            }
            rows[y * out_w + x] = acc;
        }
    }
    let mut out = vec![0.0; out_w * out_h];
    for y in 0..out_h {
        for x in 0..out_w {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                acc += k * rows[(y + t) * out_w + x];
            }
            out[y * out_w + x] = acc;
        }
    }
    out
}

pub(crate) fn ssim_plane(x: &[f64], y: &[f64], width: usize, height: usize) -> Result<f64> {
    if width < WINDOW || height < WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs frames of at least {WINDOW}x{WINDOW}, got {width}x{height}"
        )));
    }
    let kernel = gaussian_kernel();
    let n = x.len();
    let mut xx = vec![0.0; n];
    let mut yy = vec![0.0; n];
    let mut xy = vec![0.0; n];
    for i in 0..n {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    let mu_x = filter_valid(x, width, height, &kernel);
    let mu_y = filter_valid(y, width, height, &kernel);
    let sxx = filter_valid(&xx, width, height, &kernel);
    let syy = filter_valid(&yy, width, height, &kernel);
    let sxy = filter_valid(&xy, width, height, &kernel);

    let c1 = (K1 * L) * (K1 * L);
    let c2 = (K2 * L) * (K2 * L);
    let mut acc = 0.0;
    for i in 0..mu_x.len() {
        let var_x = sxx[i] - mu_x[i] * mu_x[i];
        let var_y = syy[i] - mu_y[i] * mu_y[i];
        let cov = sxy[i] - mu_x[i] * mu_y[i];
        let num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
        let den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (var_x + var_y + c2);
        acc += num / den;
    }
    Ok(acc / mu_x.len() as f64)
}

/// Mean local SSIM between two luma frames.
pub fn ssim(x: &ViewportFrame, y: &ViewportFrame) -> Result<f64> {
    if x.channels() != 1 || y.channels() != 1 {
        return Err(Error::invalid("ssim requires luma frames"));
    }
    if x.side() != y.side() {
        return Err(Error::DimensionMismatch {
            left: format!("{0}x{0}", x.side()),
            right: format!("{0}x{0}", y.side()),
        });
    }
    ssim_plane(x.pixels(), y.pixels(), x.side(), x.side())
}
