use std::ops::Range;

use serde::Serialize;

use crate::consensus::{consensus_all, Ensemble, WeightKernel};
use crate::objectives::MinimizerSet;
use crate::{dist_sq, Error, Result};

/// Least-squares fit of `y = slope x + intercept`, where for each particle
/// `x = |v - V*(v)|^2` and `y = |v_alpha(v) - V*(v)|^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRegression {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `max_i (y_i - slope x_i - intercept)`.
    pub max_residual: f64,
    /// Set when the `x` values have no spread; slope is then 0 and the
    /// intercept is the mean of `y`.
    pub degenerate: bool,
}

struct Ols {
    slope: f64,
    intercept: f64,
    r2: f64,
    degenerate: bool,
}

fn ols(x: &[f64], y: &[f64]) -> Ols {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let scale = x.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(f64::MIN_POSITIVE);
    if sxx <= (n * f64::EPSILON * scale).powi(2) {
        return Ols {
            slope: 0.0,
            intercept: my,
            r2: if syy == 0.0 { 1.0 } else { 0.0 },
            degenerate: true,
        };
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ols {
        slope,
        intercept,
        r2,
        degenerate: false,
    }
}

pub fn consensus_gap_stats(
    ens: &Ensemble,
    kernel: &WeightKernel,
    alpha: f64,
    f_min: f64,
    set: &MinimizerSet,
) -> Result<GapRegression> {
    if ens.n() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: ens.n(),
        });
    }
    let c = consensus_all(ens, kernel, alpha, f_min)?;
    let mut x = Vec::with_capacity(ens.n());
    let mut y = Vec::with_capacity(ens.n());
    for (v, cv) in ens.points().zip(c.chunks_exact(ens.dim())) {
        let star = set.nearest(v).point;
        x.push(dist_sq(v, &star));
        y.push(dist_sq(cv, &star));
    }
    let fit = ols(&x, &y);
    let max_residual = x
        .iter()
        .zip(&y)
        .map(|(a, b)| b - fit.slope * a - fit.intercept)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GapRegression {
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        max_residual,
        degenerate: fit.degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// Negative slope of `ln(values)` against time.
    pub rate: f64,
    pub r2: f64,
    /// Fitted `ln(values)` at `t = 0`.
    pub log_intercept: f64,
}

/// Fits `values ~ C e^{-rate t}` by least squares on `ln(values)` over the
/// index `window`.
pub fn fit_exponential_rate(times: &[f64], values: &[f64], window: Range<usize>) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    if window.end > values.len() || window.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: window.end.min(values.len()).saturating_sub(window.start),
        });
    }
    let t = &times[window.clone()];
    let mut logs = Vec::with_capacity(window.len());
    for i in window {
        let v = values[i];
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveValue { index: i, value: v });
        }
        logs.push(v.ln());
    }
    let fit = ols(t, &logs);
    Ok(RateFit {
        rate: -fit.slope,
        r2: fit.r2,
        log_intercept: fit.intercept,
    })
}

/// Leading index range over which `values` stays at or above
/// `ratio * values[0]`.
pub fn decay_window(values: &[f64], ratio: f64) -> Range<usize> {
    let Some(&v0) = values.first() else {
        return 0..0;
    };
    let end = values.iter().position(|&v| !(v >= ratio * v0)).unwrap_or(values.len());
    0..end
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::make_builtin;
    use serde_json::json;

    #[test]
    fn exact_exponential() {
        let t: Vec<f64> = (0..=5).map(f64::from).collect();
        let v: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let fit = fit_exponential_rate(&t, &v, 0..6).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series() {
        let t = [0.0, 1.0, 2.0];
        let fit = fit_exponential_rate(&t, &[3.0; 3], 0..3).unwrap();
        assert_eq!(fit.rate, 0.0);
        assert_eq!(fit.r2, 1.0);
    }

    #[test]
    fn offset_exponential() {
        let t: Vec<f64> = (0..=30).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| (-t).exp() + 0.01).collect();
        let fit = fit_exponential_rate(&t, &v, 0..t.len()).unwrap();
        // closed-form OLS of ln(v) on t
        let n = t.len() as f64;
        let (mt, ml) = (t.iter().sum::<f64>() / n, v.iter().map(|x| x.ln()).sum::<f64>() / n);
        let num: f64 = t.iter().zip(&v).map(|(a, b)| (a - mt) * (b.ln() - ml)).sum();
        let den: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
        assert!((fit.rate + num / den).abs() < 1e-12);
        assert!(fit.rate > 0.8 && fit.rate < 1.0, "{}", fit.rate);
    }

    #[test]
    fn non_positive_rejected() {
        let err = fit_exponential_rate(&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0], 0..3).unwrap_err();
        assert!(matches!(err, Error::NonPositiveValue { index: 1, .. }));
    }

    #[test]
    fn window_stops_below_ratio() {
        let v = [10.0, 5.0, 1.0, 0.009, 0.02];
        assert_eq!(decay_window(&v, 1e-3), 0..3);
        assert_eq!(decay_window(&v, 1e-4), 0..5);
        assert_eq!(decay_window(&v, 0.2), 0..2);
        assert_eq!(decay_window(&[1.0, 0.0], 1e-3), 0..1);
    }

    #[test]
    fn gap_stats_degenerate_at_minimizer() {
        let obj = make_builtin("symmetric_double_well", &json!({})).unwrap();
        let ens = Ensemble::evaluated(1, vec![1.0; 5], &obj).unwrap();
        let set = obj.minimizers().unwrap();
        let reg = consensus_gap_stats(&ens, &WeightKernel::StandardGibbs, 10.0, 0.0, set).unwrap();
        assert!(reg.degenerate);
        assert_eq!((reg.slope, reg.intercept), (0.0, 0.0));
        let few = Ensemble::evaluated(1, vec![1.0; 2], &obj).unwrap();
        assert!(matches!(
            consensus_gap_stats(&few, &WeightKernel::StandardGibbs, 1.0, 0.0, set),
            Err(Error::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn gap_stats_matches_direct_computation() {
        let obj = make_builtin("symmetric_double_well", &json!({})).unwrap();
        let set = obj.minimizers().unwrap().clone();
        let xs: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let ens = Ensemble::evaluated(1, xs.clone(), &obj).unwrap();
        let k = WeightKernel::AdaptiveProduct {
            kappa_scale: 0.1,
            theta: 4.0,
        };
        let reg = consensus_gap_stats(&ens, &k, 20.0, 0.0, &set).unwrap();
        let c = consensus_all(&ens, &k, 20.0, 0.0).unwrap();
        let pairs: Vec<(f64, f64)> = xs
            .iter()
            .zip(&c)
            .map(|(v, cv)| {
                let s = set.nearest(&[*v]).point[0];
                ((v - s).powi(2), (cv - s).powi(2))
            })
            .collect();
        let n = pairs.len() as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        assert!((reg.slope - sxy / sxx).abs() < 1e-10);
        assert!((reg.intercept - (my - sxy / sxx * mx)).abs() < 1e-10);
    }

    #[test]
    fn gibbs_on_symmetric_double_well_has_large_intercept() {
        let obj = make_builtin("symmetric_double_well", &json!({})).unwrap();
        let xs: Vec<f64> = (1..=20).flat_map(|i| [i as f64 * 0.1, -(i as f64) * 0.1]).collect();
        let ens = Ensemble::evaluated(1, xs, &obj).unwrap();
        let reg =
            consensus_gap_stats(&ens, &WeightKernel::StandardGibbs, 10.0, 0.0, obj.minimizers().unwrap()).unwrap();
        // consensus sits at 0, a unit away from both minimizers
        assert!(reg.intercept > 0.5, "{reg:?}");
    }
}
