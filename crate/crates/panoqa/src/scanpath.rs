//! Viewing conditions and gaze scanpaths.
//!
//! A scanpath is a time-stamped trajectory of gaze *offsets* relative to the
//! starting point, so every path begins at the origin. Paths are either
//! generated (equatorial sweep, full rotation, Brownian-latitude variant) or
//! loaded from recorded head-movement CSVs.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::sphere::{wrap_longitude, SphericalPoint};

/// Where a viewer starts and how long they explore.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewingCondition {
    pub starting_point: SphericalPoint,
    pub exploration_time: f64,
}

impl ViewingCondition {
    pub fn new(starting_point: SphericalPoint, exploration_time: f64) -> Result<Self> {
        if !(exploration_time.is_finite() && exploration_time > 0.0) {
            return Err(Error::invalid(format!(
                "exploration time must be finite and positive, got {exploration_time}"
            )));
        }
        Ok(Self {
            starting_point,
            exploration_time,
        })
    }
}

/// Gaze model parameters: sweep velocity and the native sampling rate of the
/// recording device.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeModelConfig {
    /// Sweep speed in radians per second (default 24°/s).
    pub velocity: f64,
    /// Native sampling rate of recorded trajectories in Hz (default 20).
    pub native_rate: f64,
}

impl Default for GazeModelConfig {
    fn default() -> Self {
        Self {
            velocity: 24f64.to_radians(),
            native_rate: 20.0,
        }
    }
}

impl GazeModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.velocity > 0.0 && self.velocity.is_finite()) {
            return Err(Error::invalid("gaze velocity must be positive"));
        }
        if !(self.native_rate > 0.0 && self.native_rate.is_finite()) {
            return Err(Error::invalid("native sampling rate must be positive"));
        }
        Ok(())
    }
}

const SCANPATH_HEADER: &str = "t_sec,lon_rad,lat_rad";

/// A time-stamped gaze trajectory relative to the starting point.
///
/// Invariants: at least one sample, strictly increasing timestamps starting
/// at zero, first offset at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Scanpath {
    samples: Vec<(f64, SphericalPoint)>,
    label: String,
}

impl Scanpath {
    pub fn from_samples(samples: Vec<(f64, SphericalPoint)>, label: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("scanpath has no samples"));
        }
        if samples[0].0 != 0.0 {
            return Err(Error::invalid("scanpath must start at t = 0"));
        }
        let origin = samples[0].1;
        if origin.lon() != 0.0 || origin.lat() != 0.0 {
            return Err(Error::invalid("scanpath offsets must start at (0, 0)"));
        }
        for pair in samples.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::invalid(format!(
                    "scanpath timestamps must be strictly increasing ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        Ok(Self {
            samples,
            label: label.into(),
        })
    }

    pub(crate) fn from_parts(samples: Vec<(f64, SphericalPoint)>, label: String) -> Self {
        Self { samples, label }
    }

    pub fn samples(&self) -> &[(f64, SphericalPoint)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Serialize as `t_sec,lon_rad,lat_rad` CSV. Values round-trip exactly
    /// through [`load_scanpath`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SCANPATH_HEADER);
        out.push('\n');
        for (t, p) in &self.samples {
            let _ = writeln!(out, "{},{},{}", t, p.lon(), p.lat());
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

/// Longitude of the default equatorial sweep at time `t`: out to −π/2 over
/// the first quarter, across to +π/2 over the middle half, and back to the
/// start over the last quarter (at velocity `v` the turning points are only
/// reached when v·T/4 = π/2; the formula is applied as stated otherwise).
pub fn default_longitude_at(t: f64, exploration_time: f64, velocity: f64) -> f64 {
    let quarter = exploration_time / 4.0;
    if t <= quarter {
        -velocity * t
    } else if t <= 3.0 * quarter {
        -FRAC_PI_2 + velocity * (t - quarter)
    } else {
        FRAC_PI_2 - velocity * (t - 3.0 * quarter)
    }
}

fn sample_times(rate: f64, exploration_time: f64) -> impl Iterator<Item = f64> {
    let count = (rate * exploration_time).floor() as usize;
    (0..count).map(move |k| k as f64 / rate)
}

/// The default scanpath: an equatorial sweep sampled at `rate` Hz for
/// `floor(rate · T)` samples.
pub fn default_scanpath(exploration_time: f64, cfg: &GazeModelConfig, rate: f64) -> Scanpath {
    let samples = sample_times(rate, exploration_time)
        .map(|t| {
            let lon = default_longitude_at(t, exploration_time, cfg.velocity);
            (t, SphericalPoint::new(lon, 0.0))
        })
        .collect();
    Scanpath::from_parts(samples, "default".into())
}

/// Counterclockwise rotation along the equator covering a full turn in `T`.
pub fn rotation_scanpath(exploration_time: f64, rate: f64) -> Scanpath {
    let samples = sample_times(rate, exploration_time)
        .map(|t| {
            let lon = TAU * (t / exploration_time);
            (t, SphericalPoint::new(lon, 0.0))
        })
        .collect();
    Scanpath::from_parts(samples, "rotation".into())
}

/// Replace the latitudes of `base` with a seeded Brownian walk:
/// θ₀ = 0, θ_k = clamp(θ_{k−1} + N(0, σ²), ±π/2). Longitudes are untouched.
/// With σ = 0 the walk stays at the equator, so equatorial bases (the
/// generated paths) come back bit-identical.
pub fn brownian_latitude_variant(base: &Scanpath, sigma: f64, seed: u64) -> Scanpath {
    assert!(sigma >= 0.0, "walk step deviation must be nonnegative");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("nonnegative sigma");
    let mut lat = 0.0f64;
    let samples = base
        .samples()
        .iter()
        .enumerate()
        .map(|(k, (t, p))| {
            if k > 0 {
                lat = (lat + normal.sample(&mut rng)).clamp(-FRAC_PI_2, FRAC_PI_2);
            }
            (*t, SphericalPoint::new(p.lon(), lat))
        })
        .collect();
    Scanpath::from_parts(samples, format!("brownian(sigma={sigma},seed={seed})"))
}

/// Load a recorded trajectory from `t_sec,lon_rad,lat_rad` CSV.
///
/// Timestamps are shifted so the first sample sits at t = 0 and offsets are
/// taken relative to the first sample, so the loaded path starts at the
/// origin like every other scanpath.
pub fn load_scanpath(path: &Path) -> Result<Scanpath> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r').trim() == SCANPATH_HEADER => {}
        Some((_, header)) => {
            return Err(Error::parse(
                path,
                1,
                format!("expected header `{SCANPATH_HEADER}`, found `{}`", header.trim()),
            ))
        }
        None => return Err(Error::parse(path, 1, "empty file")),
    }

    let mut raw: Vec<(f64, f64, f64)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 comma-separated fields, found {}", fields.len()),
            ));
        }
        let mut parsed = [0.0f64; 3];
        for (slot, field) in parsed.iter_mut().zip(&fields) {
            *slot = field.trim().parse::<f64>().map_err(|_| {
                Error::parse(path, line_no, format!("`{}` is not a number", field.trim()))
            })?;
            if !slot.is_finite() {
                return Err(Error::parse(path, line_no, "non-finite value"));
            }
        }
        if let Some(&(prev_t, _, _)) = raw.last() {
            if parsed[0] <= prev_t {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("timestamp {} does not increase past {}", parsed[0], prev_t),
                ));
            }
        }
        raw.push((parsed[0], parsed[1], parsed[2]));
    }
    if raw.is_empty() {
        return Err(Error::parse(path, 1, "no samples after header"));
    }

    let (t0, lon0, lat0) = raw[0];
    let samples = raw
        .iter()
        .map(|&(t, lon, lat)| {
            (
                t - t0,
                SphericalPoint::new(wrap_longitude(lon - lon0), lat - lat0),
            )
        })
        .collect();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recorded".into());
    Ok(Scanpath::from_parts(samples, label))
}

/// Resample a scanpath at `rate` Hz over `[0, T)`.
///
/// Longitude interpolates along the shortest arc (so trajectories crossing
/// the ±π seam do not sweep the long way round), latitude linearly. Queries
/// at recorded timestamps reproduce the recorded samples exactly; queries
/// past the final sample hold the final offset.
pub fn resample(path: &Scanpath, rate: f64, exploration_time: f64) -> Scanpath {
    let samples = path.samples();
    let mut seg = 0usize;
    let out = sample_times(rate, exploration_time)
        .map(|t| {
            while seg + 1 < samples.len() && samples[seg + 1].0 <= t {
                seg += 1;
            }
            let p = if seg + 1 >= samples.len() || t <= samples[seg].0 {
                samples[seg].1
            } else {
                let (t0, p0) = samples[seg];
                let (t1, p1) = samples[seg + 1];
                let frac = (t - t0) / (t1 - t0);
                let delta_lon = wrap_longitude(p1.lon() - p0.lon());
                let lon = wrap_longitude(p0.lon() + frac * delta_lon);
                let lat = p0.lat() + frac * (p1.lat() - p0.lat());
                SphericalPoint::new(lon, lat)
            };
            (t, p)
        })
        .collect();
    Scanpath::from_parts(out, path.label.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn default_cfg() -> GazeModelConfig {
        GazeModelConfig::default()
    }

    #[test]
    fn default_scanpath_hits_the_turning_points() {
        let v = default_cfg().velocity;
        assert_eq!(default_longitude_at(0.0, 15.0, v), 0.0);
        assert!((default_longitude_at(3.75, 15.0, v) + FRAC_PI_2).abs() < 1e-12);
        assert!((default_longitude_at(11.25, 15.0, v) - FRAC_PI_2).abs() < 1e-12);
        assert!(default_longitude_at(15.0, 15.0, v).abs() < 1e-12);
    }

    #[test]
    fn default_scanpath_sample_count_and_flat_latitude() {
        let path = default_scanpath(15.0, &default_cfg(), 20.0);
        assert_eq!(path.len(), 300);
        assert!(path.samples().iter().all(|(_, p)| p.lat() == 0.0));
        assert_eq!(path.samples()[0].0, 0.0);
    }

    #[test]
    fn default_scanpath_velocity_bound() {
        let cfg = default_cfg();
        let path = default_scanpath(15.0, &cfg, 20.0);
        for pair in path.samples().windows(2) {
            let dt = pair[1].0 - pair[0].0;
            let dphi = (pair[1].1.lon() - pair[0].1.lon()).abs();
            assert!(dphi <= cfg.velocity * dt + 1e-12);
        }
    }

    #[test]
    fn default_scanpath_is_time_symmetric_for_default_parameters() {
        // With v·T/4 = π/2 the sweep satisfies φ(T/2 + s) = −φ(T/2 − s).
        let path = default_scanpath(15.0, &default_cfg(), 20.0);
        let samples = path.samples();
        let mid = 150;
        for m in 0..=149 {
            let fwd = samples[mid + m].1.lon();
            let bwd = samples[mid - m].1.lon();
            assert!((fwd + bwd).abs() < 1e-9, "m={m}: {fwd} vs {bwd}");
        }
    }

    #[test]
    fn rotation_scanpath_reaches_the_antipode_midway() {
        let path = rotation_scanpath(15.0, 20.0);
        assert_eq!(path.len(), 300);
        assert_eq!(path.samples()[0].1.lon(), 0.0);
        assert_eq!(path.samples()[150].1.lon(), PI);
    }

    #[test]
    fn brownian_with_zero_sigma_is_identity_on_equatorial_bases() {
        let base = default_scanpath(15.0, &default_cfg(), 20.0);
        let out = brownian_latitude_variant(&base, 0.0, 7);
        assert_eq!(out.samples(), base.samples());
    }

    #[test]
    fn brownian_is_deterministic_per_seed_and_varies_across_seeds() {
        let base = default_scanpath(15.0, &default_cfg(), 20.0);
        let sigma = 1f64.to_radians();
        let a = brownian_latitude_variant(&base, sigma, 1);
        let b = brownian_latitude_variant(&base, sigma, 1);
        let c = brownian_latitude_variant(&base, sigma, 2);
        assert_eq!(a.samples(), b.samples());
        assert!(a.samples().iter().zip(c.samples()).any(|(x, y)| x.1.lat() != y.1.lat()));
        // The walk starts at the origin and stays within the pole clamp.
        assert_eq!(a.samples()[0].1.lat(), 0.0);
        assert!(a.samples().iter().all(|(_, p)| p.lat().abs() <= FRAC_PI_2));
    }

    #[test]
    fn load_normalizes_to_the_first_sample() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("hm.csv");
        std::fs::write(&file, "t_sec,lon_rad,lat_rad\n0.0,0.1,0.0\n0.05,0.2,0.0\n").unwrap();
        let path = load_scanpath(&file).unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path.samples()[0].0, 0.0);
        assert_eq!(path.samples()[0].1, SphericalPoint::new(0.0, 0.0));
        assert!((path.samples()[1].0 - 0.05).abs() < 1e-15);
        assert!((path.samples()[1].1.lon() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn load_accepts_single_sample_and_crlf() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("one.csv");
        std::fs::write(&file, "t_sec,lon_rad,lat_rad\r\n3.0,1.5,0.2\r\n").unwrap();
        let path = load_scanpath(&file).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path.samples()[0], (0.0, SphericalPoint::new(0.0, 0.0)));
    }

    #[test]
    fn load_rejects_decreasing_timestamps_naming_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.csv");
        std::fs::write(&file, "t_sec,lon_rad,lat_rad\n0.0,0.0,0.0\n0.2,0.1,0.0\n0.1,0.2,0.0\n").unwrap();
        let err = load_scanpath(&file).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":4:"), "{msg}");
    }

    #[test]
    fn load_rejects_garbage_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.csv");
        std::fs::write(&file, "t_sec,lon_rad,lat_rad\n0.0,abc,0.0\n").unwrap();
        assert!(load_scanpath(&file).is_err());
        std::fs::write(&file, "t_sec,lon_rad,lat_rad\n").unwrap();
        assert!(load_scanpath(&file).is_err());
        std::fs::write(&file, "wrong,header,here\n0,0,0\n").unwrap();
        assert!(load_scanpath(&file).is_err());
    }

    #[test]
    fn save_then_load_round_trips_exactly() {
        let base = default_scanpath(15.0, &default_cfg(), 20.0);
        let noisy = brownian_latitude_variant(&base, 0.02, 3);
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("path.csv");
        noisy.save_csv(&file).unwrap();
        let back = load_scanpath(&file).unwrap();
        assert_eq!(back.len(), noisy.len());
        for (a, b) in noisy.samples().iter().zip(back.samples()) {
            assert!((a.0 - b.0).abs() < 1e-9);
            assert!((a.1.lon() - b.1.lon()).abs() < 1e-9);
            assert!((a.1.lat() - b.1.lat()).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_reproduces_knots_exactly() {
        let base = default_scanpath(15.0, &default_cfg(), 20.0);
        let again = resample(&base, 20.0, 15.0);
        assert_eq!(base.samples(), again.samples());
    }

    #[test]
    fn resample_interpolates_linearly_between_samples() {
        let path = Scanpath::from_samples(
            vec![
                (0.0, SphericalPoint::new(0.0, 0.0)),
                (1.0, SphericalPoint::new(0.2, 0.4)),
            ],
            "test",
        )
        .unwrap();
        let out = resample(&path, 2.0, 1.0);
        assert_eq!(out.len(), 2);
        let mid = out.samples()[1].1;
        assert!((mid.lon() - 0.1).abs() < 1e-15);
        assert!((mid.lat() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn resample_holds_the_last_offset_past_the_end() {
        let path = Scanpath::from_samples(
            vec![
                (0.0, SphericalPoint::new(0.0, 0.0)),
                (0.5, SphericalPoint::new(0.3, -0.1)),
            ],
            "test",
        )
        .unwrap();
        let out = resample(&path, 1.0, 5.0);
        assert_eq!(out.len(), 5);
        for (t, p) in &out.samples()[1..] {
            assert!(*t >= 0.5 || (p.lon() - 0.3).abs() < 1e-12);
            assert_eq!((p.lon(), p.lat()), (0.3, -0.1));
        }
    }

    #[test]
    fn resample_takes_the_short_arc_across_the_seam() {
        let path = Scanpath::from_samples(
            vec![
                (0.0, SphericalPoint::new(0.0, 0.0)),
                (1.0, SphericalPoint::new(3.0, 0.0)),
                (2.0, SphericalPoint::new(-3.0, 0.0)),
            ],
            "test",
        )
        .unwrap();
        // Jumping 3.0 → −3.0 crosses the seam: the short arc spans 2π − 6,
        // so the midpoint sits at wrap(3.0 + (2π − 6)/2) ≈ ±π ∓ ...
        let out = resample(&path, 2.0, 2.0);
        let mid = out.samples()[3].1.lon(); // t = 1.5
        let expect = wrap_longitude(3.0 + (TAU - 6.0) / 2.0);
        assert!((mid - expect).abs() < 1e-12, "{mid} vs {expect}");
    }

    #[test]
    fn generated_paths_start_at_the_origin() {
        for path in [
            default_scanpath(5.0, &default_cfg(), 20.0),
            rotation_scanpath(5.0, 20.0),
        ] {
            let (t, p) = path.samples()[0];
            assert_eq!((t, p.lon(), p.lat()), (0.0, 0.0, 0.0));
        }
    }
}
