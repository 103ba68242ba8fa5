//! Temporal pooling of frame scores and cross-viewer aggregation.
//!
//! The default strategy is the temporal hysteresis model: at each frame a
//! pessimistic *memory* of the recent past (the minimum score over the
//! trailing window) is blended with a worst-case-weighted *current* view of
//! the near future (scores sorted ascending, weighted by the descending half
//! of a Gaussian), and the blended per-frame values are averaged. Five
//! simpler strategies cover the usual ablations.
//!
//! Every strategy operates on higher-is-better scores; lower-is-better
//! series are negated on the way in and the result negated back, so the
//! "intolerance to poor quality" semantics carry over unchanged.

use crate::error::{Error, Result};
use crate::metrics::{FrameScoreSeries, MetricDescriptor, Polarity};

/// Available temporal pooling strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolingStrategy {
    /// Memory/current hysteresis model (the default).
    Hysteresis,
    ArithmeticMean,
    HarmonicMean,
    /// Weighted mean with the ascending half of a Gaussian over frame index:
    /// late frames weigh most (recency).
    GaussianAscending,
    /// Generalized power mean with exponent `minkowski_p`.
    Minkowski,
    /// Mean of the worst `percentile_q` fraction of scores.
    Percentile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolingConfig {
    pub strategy: PoolingStrategy,
    /// Memory duration K in frames.
    pub memory_frames: usize,
    /// Memory/current blend weight α.
    pub alpha: f64,
    pub minkowski_p: f64,
    pub percentile_q: f64,
    /// Take the hysteresis memory minimum over previous *memory components*
    /// instead of previous raw scores. Off by default: the raw-score window
    /// lets memory recover once a dip leaves the window, while the strict
    /// variant turns memory into a running minimum.
    pub strict_memory: bool,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        Self {
            strategy: PoolingStrategy::Hysteresis,
            memory_frames: 20,
            alpha: 0.8,
            minkowski_p: 2.0,
            percentile_q: 0.10,
            strict_memory: false,
        }
    }
}

impl PoolingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory_frames < 1 {
            return Err(Error::invalid("memory duration K must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha must lie in [0, 1]"));
        }
        if !(self.minkowski_p > 0.0) {
            return Err(Error::invalid("minkowski exponent must be positive"));
        }
        if !(self.percentile_q > 0.0 && self.percentile_q <= 1.0) {
            return Err(Error::invalid("percentile fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// One pooled quality value.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityScore {
    pub value: f64,
    pub metric: MetricDescriptor,
    pub viewer_count: usize,
}

/// Gaussian window weights over offsets 0..=len−1 with the hysteresis σ of
/// (2K − 1)/12, renormalized to unit sum (windows truncate at sequence
/// boundaries).
fn half_gaussian_weights(len: usize, memory_frames: usize) -> Vec<f64> {
    let sigma = (2.0 * memory_frames as f64 - 1.0) / 12.0;
    let mut weights: Vec<f64> = (0..len)
        .map(|t| {
            let d = t as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    weights
}

fn window_min(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Hysteresis pooling on a higher-is-better series.
fn pool_hysteresis(scores: &[f64], cfg: &PoolingConfig) -> f64 {
    let n = scores.len();
    let k = cfg.memory_frames;

    // Memory: the first frame keeps its own score, later frames take the
    // minimum over the trailing window (raw scores by default, previous
    // memory components in strict mode).
    let mut memory = vec![0.0; n];
    memory[0] = scores[0];
    for j in 1..n {
        let lo = j.saturating_sub(k);
        memory[j] = if cfg.strict_memory {
            window_min(&memory[lo..j])
        } else {
            window_min(&scores[lo..j])
        };
    }

    // Current: sort the leading window ascending and weight the worst
    // scores most (descending Gaussian half, renormalized under truncation).
    let full_weights = half_gaussian_weights(k + 1, k);
    let full_sum: f64 = full_weights.iter().sum(); // 1 up to rounding
    let mut combined_sum = 0.0;
    let mut window: Vec<f64> = Vec::with_capacity(k + 1);
    for j in 0..n {
        let hi = (j + k).min(n - 1);
        window.clear();
        window.extend_from_slice(&scores[j..=hi]);
        window.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        let current = if window.len() == full_weights.len() {
            window
                .iter()
                .zip(&full_weights)
                .map(|(v, w)| v * w)
                .sum::<f64>()
                / full_sum
        } else {
            let partial = &full_weights[..window.len()];
            let partial_sum: f64 = partial.iter().sum();
            window.iter().zip(partial).map(|(v, w)| v * w).sum::<f64>() / partial_sum
        };
        combined_sum += cfg.alpha * memory[j] + (1.0 - cfg.alpha) * current;
    }
    combined_sum / n as f64
}

fn pool_gaussian_ascending(scores: &[f64], cfg: &PoolingConfig) -> f64 {
    // Ascending half over frame index: weight maximal at the last frame.
    let descending = half_gaussian_weights(scores.len(), cfg.memory_frames);
    let dot: f64 = scores
        .iter()
        .rev()
        .zip(&descending)
        .map(|(v, w)| v * w)
        .sum();
    dot
}

fn pool_minkowski(scores: &[f64], p: f64) -> f64 {
    let mean_pow = scores.iter().map(|s| s.powf(p)).sum::<f64>() / scores.len() as f64;
    mean_pow.powf(1.0 / p)
}

fn pool_percentile(scores: &[f64], q: f64) -> f64 {
    let n = scores.len();
    let take = ((q * n as f64).ceil() as usize).clamp(1, n);
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    sorted[..take].iter().sum::<f64>() / take as f64
}

/// Collapse a frame score series into one per-viewer quality value.
pub fn pool(series: &FrameScoreSeries, cfg: &PoolingConfig) -> Result<QualityScore> {
    cfg.validate()?;
    if series.is_empty() {
        return Err(Error::Empty("frame score series"));
    }
    if cfg.strategy == PoolingStrategy::HarmonicMean {
        if let Some(bad) = series.scores().iter().find(|s| **s <= 0.0) {
            return Err(Error::Degenerate(format!(
                "harmonic mean needs strictly positive scores, found {bad}"
            )));
        }
    }

    let higher = series.metric().polarity == Polarity::HigherBetter;
    let oriented: Vec<f64> = if higher {
        series.scores().to_vec()
    } else {
        series.scores().iter().map(|s| -s).collect()
    };

    let pooled = match cfg.strategy {
        PoolingStrategy::Hysteresis => pool_hysteresis(&oriented, cfg),
        PoolingStrategy::ArithmeticMean => oriented.iter().sum::<f64>() / oriented.len() as f64,
        PoolingStrategy::HarmonicMean => {
            oriented.len() as f64 / oriented.iter().map(|s| 1.0 / s).sum::<f64>()
        }
        PoolingStrategy::GaussianAscending => pool_gaussian_ascending(&oriented, cfg),
        PoolingStrategy::Minkowski => pool_minkowski(&oriented, cfg.minkowski_p),
        PoolingStrategy::Percentile => pool_percentile(&oriented, cfg.percentile_q),
    };

    Ok(QualityScore {
        value: if higher { pooled } else { -pooled },
        metric: series.metric().clone(),
        viewer_count: 1,
    })
}

/// Average per-viewer quality values (all of the same metric) into the
/// final score.
pub fn aggregate_viewers(scores: &[QualityScore]) -> Result<QualityScore> {
    let first = scores.first().ok_or(Error::Empty("viewer scores"))?;
    if scores.iter().any(|s| s.metric != first.metric) {
        return Err(Error::invalid("cannot aggregate scores of different metrics"));
    }
    let value = scores.iter().map(|s| s.value).sum::<f64>() / scores.len() as f64;
    Ok(QualityScore {
        value,
        metric: first.metric.clone(),
        viewer_count: scores.iter().map(|s| s.viewer_count).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FrameMetric;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn series(scores: Vec<f64>) -> FrameScoreSeries {
        FrameScoreSeries::new(scores, FrameMetric::Psnr.descriptor(), 20.0).unwrap()
    }

    fn lower_better_series(scores: Vec<f64>) -> FrameScoreSeries {
        FrameScoreSeries::new(scores, FrameMetric::Nlpd.descriptor(), 20.0).unwrap()
    }

    fn cfg(strategy: PoolingStrategy) -> PoolingConfig {
        PoolingConfig {
            strategy,
            ..PoolingConfig::default()
        }
    }

    const ALL: [PoolingStrategy; 6] = [
        PoolingStrategy::Hysteresis,
        PoolingStrategy::ArithmeticMean,
        PoolingStrategy::HarmonicMean,
        PoolingStrategy::GaussianAscending,
        PoolingStrategy::Minkowski,
        PoolingStrategy::Percentile,
    ];

    #[test]
    fn every_strategy_is_idempotent_on_constants() {
        let s = series(vec![42.25; 50]);
        for strategy in ALL {
            let got = pool(&s, &cfg(strategy)).unwrap().value;
            assert!((got - 42.25).abs() < 1e-12, "{strategy:?}: {got}");
        }
    }

    #[test]
    fn hysteresis_drags_the_score_below_the_mean_after_a_dip() {
        let mut scores = vec![5.0; 50];
        scores[1] = 1.0;
        let s = series(scores.clone());
        let hysteresis = pool(&s, &cfg(PoolingStrategy::Hysteresis)).unwrap().value;
        let mean = pool(&s, &cfg(PoolingStrategy::ArithmeticMean)).unwrap().value;
        assert!(hysteresis < mean, "{hysteresis} vs {mean}");
    }

    #[test]
    fn percentile_takes_the_worst_fraction() {
        let s = series((1..=10).map(f64::from).collect());
        let got = pool(&s, &cfg(PoolingStrategy::Percentile)).unwrap().value;
        assert_eq!(got, 1.0);

        let mut c = cfg(PoolingStrategy::Percentile);
        c.percentile_q = 0.3;
        let got = pool(&s, &c).unwrap().value;
        assert_eq!(got, 2.0); // mean of {1, 2, 3}

        // Lower-is-better: the worst scores are the largest.
        let s = lower_better_series((1..=10).map(f64::from).collect());
        let got = pool(&s, &cfg(PoolingStrategy::Percentile)).unwrap().value;
        assert_eq!(got, 10.0);
    }

    #[test]
    fn harmonic_mean_matches_the_formula_and_rejects_nonpositive() {
        let s = series(vec![2.0, 4.0, 4.0]);
        let got = pool(&s, &cfg(PoolingStrategy::HarmonicMean)).unwrap().value;
        assert!((got - 3.0 / (0.5 + 0.25 + 0.25)).abs() < 1e-12);

        let bad = series(vec![2.0, 0.0, 4.0]);
        assert!(pool(&bad, &cfg(PoolingStrategy::HarmonicMean)).is_err());
    }

    #[test]
    fn minkowski_is_the_power_mean() {
        let s = series(vec![3.0, 4.0]);
        let got = pool(&s, &cfg(PoolingStrategy::Minkowski)).unwrap().value;
        assert!((got - (12.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_ascending_weights_late_frames_most() {
        let mut early_good = vec![5.0; 60];
        let mut late_good = vec![1.0; 60];
        for j in 30..60 {
            early_good[j] = 1.0;
            late_good[j] = 5.0;
        }
        let a = pool(&series(early_good), &cfg(PoolingStrategy::GaussianAscending)).unwrap();
        let b = pool(&series(late_good), &cfg(PoolingStrategy::GaussianAscending)).unwrap();
        assert!(b.value > a.value);
        assert!(b.value > 4.99, "{}", b.value); // essentially the tail value
    }

    #[test]
    fn hysteresis_is_order_sensitive() {
        let ramp_up: Vec<f64> = (0..40).map(|j| if j < 20 { 1.0 } else { 5.0 }).collect();
        let ramp_down: Vec<f64> = ramp_up.iter().rev().copied().collect();
        let up = pool(&series(ramp_up), &cfg(PoolingStrategy::Hysteresis)).unwrap().value;
        let down = pool(&series(ramp_down), &cfg(PoolingStrategy::Hysteresis)).unwrap().value;
        assert!(up != down, "{up} vs {down}");
    }

    #[test]
    fn strict_memory_never_recovers_within_reach_of_a_dip() {
        let mut scores = vec![5.0; 100];
        scores[1] = 1.0;
        let s = series(scores);
        let mut strict = cfg(PoolingStrategy::Hysteresis);
        strict.strict_memory = true;
        let relaxed = pool(&s, &cfg(PoolingStrategy::Hysteresis)).unwrap().value;
        let pinned = pool(&s, &strict).unwrap().value;
        // The running-minimum variant keeps the dip in memory forever, the
        // windowed variant lets it expire.
        assert!(pinned < relaxed, "{pinned} vs {relaxed}");
    }

    #[test]
    fn polarity_negation_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let scores: Vec<f64> = (0..120).map(|_| rng.random_range(0.01..2.0)).collect();
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        for strategy in [
            PoolingStrategy::Hysteresis,
            PoolingStrategy::ArithmeticMean,
            PoolingStrategy::GaussianAscending,
            PoolingStrategy::Percentile,
        ] {
            let low = pool(&lower_better_series(scores.clone()), &cfg(strategy)).unwrap();
            let high = pool(&series(negated.clone()), &cfg(strategy)).unwrap();
            assert_eq!(low.value, -high.value, "{strategy:?}");
        }
    }

    #[test]
    fn aggregate_averages_and_counts_viewers() {
        let metric = FrameMetric::Psnr.descriptor();
        let score = |v: f64| QualityScore {
            value: v,
            metric: metric.clone(),
            viewer_count: 1,
        };
        let single = aggregate_viewers(&[score(40.0)]).unwrap();
        assert_eq!(single.value, 40.0);
        let pair = aggregate_viewers(&[score(40.0), score(44.0)]).unwrap();
        assert_eq!(pair.value, 42.0);
        assert_eq!(pair.viewer_count, 2);
        let swapped = aggregate_viewers(&[score(44.0), score(40.0)]).unwrap();
        assert_eq!(swapped.value, pair.value);

        let mut other = score(1.0);
        other.metric = FrameMetric::Nlpd.descriptor();
        assert!(aggregate_viewers(&[score(40.0), other]).is_err());
        assert!(aggregate_viewers(&[]).is_err());
    }

    /// Literal transcription of the hysteresis recurrences, kept free of any
    /// implementation code: explicit windows, a fresh Gaussian per window,
    /// naive normalization.
    pub(crate) fn hysteresis_reference(scores: &[f64], k: usize, alpha: f64) -> f64 {
        let n = scores.len();
        let sigma = (2.0 * k as f64 - 1.0) / 12.0;
        let mut adjusted = Vec::with_capacity(n);
        for j in 1..=n {
            // memory component, Eq. 5 with the raw-score window
            let memory = if j == 1 {
                scores[0]
            } else {
                let lo = if j > k { j - k } else { 1 };
                let mut m = f64::INFINITY;
                for t in lo..=(j - 1) {
                    m = m.min(scores[t - 1]);
                }
                m
            };
            // current component, Eqs. 6-7
            let hi = (j + k).min(n);
            let mut window: Vec<f64> = (j..=hi).map(|t| scores[t - 1]).collect();
            window.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut weights: Vec<f64> = (0..window.len())
                .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
                .collect();
            let wsum: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= wsum;
            }
            let current: f64 = window.iter().zip(&weights).map(|(v, w)| v * w).sum();
            adjusted.push(alpha * memory + (1.0 - alpha) * current);
        }
        adjusted.iter().sum::<f64>() / n as f64
    }

    #[test]
    fn hysteresis_matches_the_literal_transcription() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(1..400);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..60.0)).collect();
            let s = series(scores.clone());
            let got = pool(&s, &cfg(PoolingStrategy::Hysteresis)).unwrap().value;
            let want = hysteresis_reference(&scores, 20, 0.8);
            assert!((got - want).abs() < 1e-9, "n={n}: {got} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn bounded_and_shift_equivariant(
            raw in proptest::collection::vec(0.0f64..100.0, 1..120),
            shift in -50.0f64..50.0,
        ) {
            let s = series(raw.clone());
            let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for strategy in [
                PoolingStrategy::Hysteresis,
                PoolingStrategy::ArithmeticMean,
                PoolingStrategy::GaussianAscending,
                PoolingStrategy::Percentile,
            ] {
                let got = pool(&s, &cfg(strategy)).unwrap().value;
                prop_assert!(got >= lo - 1e-9 && got <= hi + 1e-9, "{strategy:?}");
            }
            // Hysteresis commutes with constant shifts.
            let shifted: Vec<f64> = raw.iter().map(|v| v + shift).collect();
            let a = pool(&series(shifted), &cfg(PoolingStrategy::Hysteresis)).unwrap().value;
            let b = pool(&s, &cfg(PoolingStrategy::Hysteresis)).unwrap().value + shift;
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
