//! Model-versus-human statistics: the four-parameter logistic mapping,
//! PLCC, SRCC and the residual-variance F-test.

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

/// Parameters of `f(Q) = (β₁ − β₂) / (1 + exp(−(Q − β₃)/|β₄|)) + β₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
}

impl LogisticParams {
    pub fn new(beta1: f64, beta2: f64, beta3: f64, beta4: f64) -> Result<Self> {
        if beta4 == 0.0 || !beta4.is_finite() {
            return Err(Error::invalid("beta4 must be finite and nonzero"));
        }
        Ok(Self {
            beta1,
            beta2,
            beta3,
            beta4,
        })
    }

    pub fn evaluate(&self, q: f64) -> f64 {
        let z = (q - self.beta3) / self.beta4.abs();
        (self.beta1 - self.beta2) * sigmoid(z) + self.beta2
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn check_paired(pred: &[f64], mos: &[f64], min_len: usize) -> Result<()> {
    if pred.len() != mos.len() {
        return Err(Error::DimensionMismatch {
            left: format!("{} predictions", pred.len()),
            right: format!("{} ratings", mos.len()),
        });
    }
    if pred.len() < min_len {
        return Err(Error::invalid(format!(
            "need at least {min_len} paired samples, got {}",
            pred.len()
        )));
    }
    if pred.iter().chain(mos).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    Ok(())
}

fn sum_squared_residuals(params: &LogisticParams, pred: &[f64], mos: &[f64]) -> f64 {
    pred.iter()
        .zip(mos)
        .map(|(&q, &m)| {
            let r = m - params.evaluate(q);
            r * r
        })
        .sum()
}

/// One damped Gauss–Newton (Levenberg–Marquardt) descent from `start`.
/// Only improving steps are accepted, so the returned parameters never fit
/// worse than the start.
fn levenberg_marquardt(start: LogisticParams, pred: &[f64], mos: &[f64]) -> LogisticParams {
    let mut params = start;
    let mut ssr = sum_squared_residuals(&params, pred, mos);
    let mut lambda = 1e-3;

    for _ in 0..300 {
        // Normal equations J^T J and J^T r for the current parameters.
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        let amp = params.beta1 - params.beta2;
        let b4 = params.beta4.abs();
        for (&q, &m) in pred.iter().zip(mos) {
            let z = (q - params.beta3) / b4;
            let s = sigmoid(z);
            let ds = s * (1.0 - s);
            let row = [
                s,
                1.0 - s,
                -amp * ds / b4,
                -amp * ds * (q - params.beta3) * params.beta4.signum() / (params.beta4 * params.beta4),
            ];
            let r = m - params.evaluate(q);
            for i in 0..4 {
                jtr[i] += row[i] * r;
                for j in 0..4 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }

        let mut improved = false;
        for _ in 0..25 {
            // Marquardt scaling keeps the step roughly invariant to affine
            // reparameterizations of the abscissa.
            let mut a = jtj;
            for i in 0..4 {
                a[i][i] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(step) = solve4(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = LogisticParams {
                beta1: params.beta1 + step[0],
                beta2: params.beta2 + step[1],
                beta3: params.beta3 + step[2],
                beta4: params.beta4 + step[3],
            };
            if candidate.beta4 == 0.0 || !candidate.beta4.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let candidate_ssr = sum_squared_residuals(&candidate, pred, mos);
            if candidate_ssr.is_finite() && candidate_ssr < ssr {
                let gain = ssr - candidate_ssr;
                params = candidate;
                ssr = candidate_ssr;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if gain <= 1e-17 * (1.0 + ssr) {
                    return params;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    params
}

/// Gaussian elimination with partial pivoting for the 4×4 normal equations.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot_row = (col..4).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for col in (0..4).rev() {
        let mut acc = b[col];
        for k in col + 1..4 {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Nelder–Mead polish for plateaus the damped Gauss–Newton cannot cross.
fn nelder_mead(start: LogisticParams, pred: &[f64], mos: &[f64], evals: usize) -> LogisticParams {
    let f = |p: &[f64; 4]| -> f64 {
        if p[3] == 0.0 {
            return f64::INFINITY;
        }
        let params = LogisticParams {
            beta1: p[0],
            beta2: p[1],
            beta3: p[2],
            beta4: p[3],
        };
        sum_squared_residuals(&params, pred, mos)
    };
    let x0 = [start.beta1, start.beta2, start.beta3, start.beta4];
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    simplex.push((x0, f(&x0)));
    for i in 0..4 {
        let mut x = x0;
        let step = if x[i].abs() > 1e-6 { 0.1 * x[i] } else { 0.1 };
        x[i] += step;
        simplex.push((x, f(&x)));
    }

    let mut used = 5;
    while used < evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let centroid = {
            let mut c = [0.0; 4];
            for (x, _) in &simplex[..4] {
                for i in 0..4 {
                    c[i] += x[i] / 4.0;
                }
            }
            c
        };
        let worst = simplex[4];
        let reflect = std::array::from_fn(|i| centroid[i] + (centroid[i] - worst.0[i]));
        let fr = f(&reflect);
        used += 1;
        if fr < simplex[0].1 {
            let expand = std::array::from_fn(|i| centroid[i] + 2.0 * (centroid[i] - worst.0[i]));
            let fe = f(&expand);
            used += 1;
            simplex[4] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[3].1 {
            simplex[4] = (reflect, fr);
        } else {
            let contract = std::array::from_fn(|i| centroid[i] + 0.5 * (worst.0[i] - centroid[i]));
            let fc = f(&contract);
            used += 1;
            if fc < worst.1 {
                simplex[4] = (contract, fc);
            } else {
                let best = simplex[0].0;
                for entry in &mut simplex[1..] {
                    let shrunk = std::array::from_fn(|i| best[i] + 0.5 * (entry.0[i] - best[i]));
                    *entry = (shrunk, f(&shrunk));
                    used += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let best = simplex[0].0;
    LogisticParams {
        beta1: best[0],
        beta2: best[1],
        beta3: best[2],
        beta4: best[3],
    }
}

/// Least-squares fit of the four-parameter logistic to (pred, mos) pairs.
///
/// Initialized at β₁ = max(mos), β₂ = min(mos), β₃ = mean(pred),
/// β₄ = std(pred); a second start with β₁/β₂ swapped covers decreasing
/// relations. The returned parameters never fit worse than the
/// initialization. Parameters themselves are not identifiable (the fit is
/// symmetric under (β₁, β₂) exchange with a sign flip), the fitted curve is
/// the contract.
pub fn fit_logistic(pred: &[f64], mos: &[f64]) -> Result<LogisticParams> {
    check_paired(pred, mos, 5)?;
    if sample_variance(pred) == 0.0 {
        return Err(Error::Degenerate("predictions have zero variance".into()));
    }

    let hi = mos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = mos.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = sample_variance(pred).sqrt();
    let center = mean(pred);

    let mut best: Option<LogisticParams> = None;
    let mut best_ssr = f64::INFINITY;
    for (b1, b2) in [(hi, lo), (lo, hi)] {
        let start = LogisticParams {
            beta1: b1,
            beta2: b2,
            beta3: center,
            beta4: spread,
        };
        let coarse = levenberg_marquardt(start, pred, mos);
        let polished = nelder_mead(coarse, pred, mos, 400);
        let refined = levenberg_marquardt(polished, pred, mos);
        let candidate = [coarse, polished, refined]
            .into_iter()
            .min_by(|a, b| {
                sum_squared_residuals(a, pred, mos)
                    .partial_cmp(&sum_squared_residuals(b, pred, mos))
                    .unwrap()
            })
            .unwrap();
        let ssr = sum_squared_residuals(&candidate, pred, mos);
        if ssr < best_ssr {
            best_ssr = ssr;
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Pearson linear correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, 2)?;
    let mx = mean(x);
    let my = mean(y);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Degenerate("zero variance in correlation input".into()));
    }
    Ok(cov / (vx * vy).sqrt())
}

/// PLCC: Pearson correlation between logistic-mapped predictions and the
/// subjective ratings, signed by the direction of the fitted mapping so an
/// anti-correlated predictor reports a negative coefficient.
///
/// With fewer than five pairs the logistic stage is skipped (four
/// parameters cannot be fit) and the raw Pearson coefficient is returned.
pub fn plcc(pred: &[f64], mos: &[f64]) -> Result<f64> {
    check_paired(pred, mos, 3)?;
    if sample_variance(pred) == 0.0 || sample_variance(mos) == 0.0 {
        return Err(Error::Degenerate("zero variance in PLCC input".into()));
    }
    if pred.len() < 5 {
        return Ok(pearson(pred, mos)?);
    }
    let params = fit_logistic(pred, mos)?;
    let mapped: Vec<f64> = pred.iter().map(|&q| params.evaluate(q)).collect();
    let direction = pearson(pred, &mapped)?;
    let corr = pearson(&mapped, mos)?;
    Ok(direction.signum() * corr)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // Ties share the average of the ranks they span (1-based).
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &idx in &order[start..=end] {
            ranks[idx] = rank;
        }
        start = end + 1;
    }
    ranks
}

/// SRCC: Pearson correlation of average-ranked data (ties get averaged
/// ranks). Exactly ±1 under strictly monotone relations.
pub fn srcc(pred: &[f64], mos: &[f64]) -> Result<f64> {
    check_paired(pred, mos, 3)?;
    let rx = average_ranks(pred);
    let ry = average_ranks(mos);
    pearson(&rx, &ry)
}

/// Outcome of the residual-variance comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FTestVerdict {
    ABetter,
    BBetter,
    Indistinguishable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTestOutcome {
    /// var(a) / var(b); 1 when both variances vanish.
    pub statistic: f64,
    pub verdict: FTestVerdict,
}

/// Two-sided F-test on the ratio of residual variances. The model with the
/// significantly lower residual variance wins; otherwise the two are
/// statistically indistinguishable at the given confidence.
pub fn f_test(residuals_a: &[f64], residuals_b: &[f64], confidence: f64) -> Result<FTestOutcome> {
    if residuals_a.len() < 3 || residuals_b.len() < 3 {
        return Err(Error::invalid("each residual set needs at least 3 entries"));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::invalid("confidence must lie in (0, 1)"));
    }
    let va = sample_variance(residuals_a);
    let vb = sample_variance(residuals_b);
    if va == 0.0 && vb == 0.0 {
        return Ok(FTestOutcome {
            statistic: 1.0,
            verdict: FTestVerdict::Indistinguishable,
        });
    }
    if vb == 0.0 {
        return Ok(FTestOutcome {
            statistic: f64::INFINITY,
            verdict: FTestVerdict::BBetter,
        });
    }
    let statistic = va / vb;
    let dist = FisherSnedecor::new((residuals_a.len() - 1) as f64, (residuals_b.len() - 1) as f64)
        .map_err(|e| Error::invalid(format!("F distribution: {e}")))?;
    let cdf = dist.cdf(statistic);
    let p = 2.0 * cdf.min(1.0 - cdf);
    let verdict = if p < 1.0 - confidence {
        if va < vb {
            FTestVerdict::ABetter
        } else {
            FTestVerdict::BBetter
        }
    } else {
        FTestVerdict::Indistinguishable
    };
    Ok(FTestOutcome { statistic, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn logistic_fit_recovers_a_noiseless_curve() {
        let truth = LogisticParams::new(5.0, 1.0, 30.0, 5.0).unwrap();
        let pred: Vec<f64> = (0..50).map(|i| 10.0 + i as f64 * (40.0 / 49.0)).collect();
        let mos: Vec<f64> = pred.iter().map(|&q| truth.evaluate(q)).collect();
        let fitted = fit_logistic(&pred, &mos).unwrap();
        let rms = (sum_squared_residuals(&fitted, &pred, &mos) / pred.len() as f64).sqrt();
        assert!(rms <= 1e-6, "rms {rms}");
    }

    #[test]
    fn logistic_fit_approximates_the_diagonal() {
        let pred: Vec<f64> = (0..60).map(|i| i as f64 / 2.0).collect();
        let fitted = fit_logistic(&pred, &pred).unwrap();
        let rms = (sum_squared_residuals(&fitted, &pred, &pred) / pred.len() as f64).sqrt();
        let range = 29.5;
        assert!(rms <= 0.01 * range, "rms {rms}");
    }

    #[test]
    fn logistic_fit_never_fits_worse_than_its_initialization() {
        let mut r = rng(21);
        let pred: Vec<f64> = (0..40).map(|_| r.random_range(0.0..50.0)).collect();
        let mos: Vec<f64> = pred
            .iter()
            .map(|&q| 4.0 / (1.0 + (-0.2 * (q - 25.0)).exp()) + 1.0 + r.random_range(-0.3..0.3))
            .collect();
        let hi = mos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = mos.iter().cloned().fold(f64::INFINITY, f64::min);
        let init = LogisticParams {
            beta1: hi,
            beta2: lo,
            beta3: mean(&pred),
            beta4: sample_variance(&pred).sqrt(),
        };
        let fitted = fit_logistic(&pred, &mos).unwrap();
        assert!(
            sum_squared_residuals(&fitted, &pred, &mos)
                <= sum_squared_residuals(&init, &pred, &mos)
        );
    }

    #[test]
    fn logistic_fit_rejects_constant_predictions() {
        let pred = vec![3.0; 10];
        let mos: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(matches!(fit_logistic(&pred, &mos), Err(Error::Degenerate(_))));
    }

    #[test]
    fn plcc_is_one_for_affine_relations() {
        let pred: Vec<f64> = (0..50).map(|i| i as f64 * 0.7 - 3.0).collect();
        let mos: Vec<f64> = pred.iter().map(|&p| 2.0 * p + 3.0).collect();
        let got = plcc(&pred, &mos).unwrap();
        assert!((got - 1.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn plcc_is_minus_one_for_negated_predictions() {
        let pred: Vec<f64> = (0..50).map(|i| i as f64 * 0.5).collect();
        let mos: Vec<f64> = pred.iter().map(|&p| -p).collect();
        let got = plcc(&pred, &mos).unwrap();
        assert!((got + 1.0).abs() < 1e-6, "{got}");
    }

    #[test]
    fn plcc_is_small_for_independent_data() {
        let mut r = rng(33);
        let pred: Vec<f64> = (0..1000).map(|_| r.random_range(0.0..1.0)).collect();
        let mos: Vec<f64> = (0..1000).map(|_| r.random_range(0.0..1.0)).collect();
        let got = plcc(&pred, &mos).unwrap();
        assert!(got.abs() < 0.1, "{got}");
    }

    #[test]
    fn plcc_is_invariant_to_affine_prediction_rescaling() {
        let mut r = rng(34);
        let pred: Vec<f64> = (0..80).map(|_| r.random_range(0.0..10.0)).collect();
        let mos: Vec<f64> = pred
            .iter()
            .map(|&p| 3.0 / (1.0 + (-0.8 * (p - 5.0)).exp()) + 1.0 + r.random_range(-0.2..0.2))
            .collect();
        let a = plcc(&pred, &mos).unwrap();
        let rescaled: Vec<f64> = pred.iter().map(|&p| 3.0 * p - 7.0).collect();
        let b = plcc(&rescaled, &mos).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn plcc_rejects_degenerate_variance() {
        assert!(plcc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(plcc(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn srcc_is_exactly_one_under_monotone_transforms() {
        let mut r = rng(35);
        let mos: Vec<f64> = (0..100).map(|_| r.random_range(1.0..5.0)).collect();
        let exp_pred: Vec<f64> = mos.iter().map(|&m| m.exp()).collect();
        let cube_pred: Vec<f64> = mos.iter().map(|&m| m * m * m).collect();
        assert_eq!(srcc(&exp_pred, &mos).unwrap(), 1.0);
        assert_eq!(srcc(&cube_pred, &mos).unwrap(), 1.0);
    }

    #[test]
    fn srcc_is_exactly_minus_one_for_reversed_order() {
        let mos = [1.0, 2.0, 3.0, 4.0, 5.0];
        let pred = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(srcc(&pred, &mos).unwrap(), -1.0);
    }

    #[test]
    fn srcc_averages_tied_ranks() {
        let got = srcc(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((got - 0.9487).abs() < 1e-4, "{got}");
        let exact = 4.5 / (4.5f64 * 5.0).sqrt();
        assert!((got - exact).abs() < 1e-12);
    }

    #[test]
    fn f_test_separates_clearly_different_variances() {
        let mut r = rng(36);
        let narrow = Normal::new(0.0, 1.0).unwrap();
        let wide = Normal::new(0.0, 3.0).unwrap();
        let a: Vec<f64> = (0..200).map(|_| narrow.sample(&mut r)).collect();
        let b: Vec<f64> = (0..200).map(|_| wide.sample(&mut r)).collect();
        let out = f_test(&a, &b, 0.95).unwrap();
        assert_eq!(out.verdict, FTestVerdict::ABetter);
        assert!(out.statistic < 1.0);
        let flipped = f_test(&b, &a, 0.95).unwrap();
        assert_eq!(flipped.verdict, FTestVerdict::BBetter);
    }

    #[test]
    fn f_test_on_the_same_set_is_indistinguishable() {
        let a = [0.1, -0.2, 0.3, -0.4, 0.15];
        let out = f_test(&a, &a, 0.95).unwrap();
        assert_eq!(out.verdict, FTestVerdict::Indistinguishable);
        assert_eq!(out.statistic, 1.0);
    }

    #[test]
    fn f_test_tiny_samples_are_inconclusive() {
        // Variance ratio 2 with three samples each: the two-sided critical
        // region for (2, 2) degrees of freedom is far wider.
        let a = [0.0, 1.0, 2.0];
        let b: Vec<f64> = a.iter().map(|x| x * 2.0f64.sqrt()).collect();
        let out = f_test(&a, &b, 0.95).unwrap();
        assert_eq!(out.verdict, FTestVerdict::Indistinguishable);
    }

    #[test]
    fn f_test_never_declares_the_same_winner_both_ways() {
        let mut r = rng(37);
        for trial in 0..20 {
            let sa = r.random_range(0.5..2.0);
            let sb = r.random_range(0.5..2.0);
            let na = Normal::new(0.0, sa).unwrap();
            let nb = Normal::new(0.0, sb).unwrap();
            let a: Vec<f64> = (0..50).map(|_| na.sample(&mut r)).collect();
            let b: Vec<f64> = (0..50).map(|_| nb.sample(&mut r)).collect();
            let ab = f_test(&a, &b, 0.95).unwrap().verdict;
            let ba = f_test(&b, &a, 0.95).unwrap().verdict;
            match (ab, ba) {
                (FTestVerdict::ABetter, FTestVerdict::BBetter)
                | (FTestVerdict::BBetter, FTestVerdict::ABetter)
                | (FTestVerdict::Indistinguishable, FTestVerdict::Indistinguishable) => {}
                other => panic!("trial {trial}: inconsistent verdict pair {other:?}"),
            }
        }
    }

    #[test]
    fn zero_variance_residuals_win_outright() {
        let flat = [0.5, 0.5, 0.5, 0.5];
        let spread = [0.0, 1.0, -1.0, 0.5];
        assert_eq!(f_test(&flat, &spread, 0.95).unwrap().verdict, FTestVerdict::ABetter);
        assert_eq!(f_test(&spread, &flat, 0.95).unwrap().verdict, FTestVerdict::BBetter);
        assert_eq!(
            f_test(&flat, &flat, 0.95).unwrap().verdict,
            FTestVerdict::Indistinguishable
        );
    }
}
