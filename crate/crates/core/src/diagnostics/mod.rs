//! Quantitative checks on ensembles and series.

mod laplace;
mod regression;
mod wasserstein;

pub use laplace::{
    laplace_bound_check, two_region_laplace_check, FarField, LaplaceCheckInput, LaplaceReport, TwoRegionInput,
    TwoRegionReport,
};
pub use regression::{consensus_gap_stats, decay_window, fit_exponential_rate, GapRegression, RateFit};
pub use wasserstein::{empirical_cdf, wasserstein1_1d};

use rand::Rng;
use serde::Serialize;

use crate::consensus::{consensus_all, Ensemble, Exponent, WeightKernel};
use crate::objectives::{MinimizerSet, ObjectiveSpec};
use crate::rng::{uniform_in_ball, Purpose, StreamKey};
use crate::{dist_sq, Error, Point, Result};

/// Mean squared distance of the particles to the minimizer set.
pub fn v_functional(ens: &Ensemble, set: &MinimizerSet) -> f64 {
    let total: f64 = ens.points().map(|p| set.distance(p).powi(2)).sum();
    total / ens.n() as f64
}

/// The compactly supported bump `1 + (tau-1) s^tau - tau s^(tau-1)`, `s = |v|/r`.
pub fn phi_test(v: &[f64], r: f64, tau: u32) -> Result<f64> {
    if tau < 3 {
        return Err(Error::invalid("tau", format!("must be >= 3, got {tau}")));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid("r", format!("must be > 0, got {r}")));
    }
    Ok(phi_unchecked(crate::norm(v) / r, tau))
}

fn phi_unchecked(s: f64, tau: u32) -> f64 {
    if s > 1.0 {
        return 0.0;
    }
    let t = tau as i32;
    (1.0 + (t - 1) as f64 * s.powi(t) - t as f64 * s.powi(t - 1)).clamp(0.0, 1.0)
}

/// `(1/N) sum_i phi(V^i - w)` for an anchor `w`.
fn phi_mass<'a>(points: impl Iterator<Item = &'a [f64]>, w: &[f64], r: f64, tau: u32) -> (f64, usize) {
    let mut total = 0.0;
    let mut n = 0;
    for p in points {
        total += phi_unchecked(dist_sq(p, w).sqrt() / r, tau);
        n += 1;
    }
    (total, n)
}

/// Anchor points discretizing the minimizer set: each component's anchor
/// followed by `per_component` boundary points. Larger counts extend the
/// list, never reorder it.
pub fn set_anchors(set: &MinimizerSet, per_component: usize) -> Vec<Point> {
    use crate::objectives::ConvexComponent as C;
    let key = StreamKey::new(0x5eed_a11c);
    let mut out = Vec::new();
    for (ci, c) in set.components().iter().enumerate() {
        out.push(c.anchor());
        if matches!(c, C::Singleton(_)) {
            continue;
        }
        let mut rng = key.stream(Purpose::Anchors, ci as u64, 0);
        for _ in 0..per_component {
            match c {
                C::Ball { center, radius } => {
                    let dir = uniform_in_ball(&mut rng, &vec![0.0; center.len()], 1.0);
                    let n = crate::norm(&dir).max(f64::MIN_POSITIVE);
                    out.push(center.iter().zip(&dir).map(|(c, u)| c + radius * u / n).collect());
                }
                C::Box { lower, upper } => {
                    let mut p: Point = lower
                        .iter()
                        .zip(upper)
                        .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                        .collect();
                    let axis = rng.random_range(0..p.len());
                    p[axis] = if rng.random::<bool>() { upper[axis] } else { lower[axis] };
                    out.push(p);
                }
                C::Singleton(_) => unreachable!(),
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallMass {
    /// Smallest anchor mass found.
    pub value: f64,
    /// Anchor achieving it.
    pub anchor: Point,
}

/// Discretized `inf_{w in V*} (1/N) sum_i phi_r^tau(V^i - w)` over [`set_anchors`].
pub fn ball_mass_lower(
    ens: &Ensemble,
    set: &MinimizerSet,
    r: f64,
    tau: u32,
    anchor_density: usize,
) -> Result<BallMass> {
    phi_test(&[0.0], r, tau)?;
    let mut best = BallMass {
        value: f64::INFINITY,
        anchor: Vec::new(),
    };
    for a in set_anchors(set, anchor_density) {
        let (total, n) = phi_mass(ens.points(), &a, r, tau);
        let m = total / n as f64;
        if m < best.value {
            best = BallMass { value: m, anchor: a };
        }
    }
    Ok(best)
}

/// Proxy for the initial concentration functional: the mean squared distance
/// of each particle to its own consensus point.
pub fn estimate_v0(ens: &Ensemble, kernel: &WeightKernel, alpha: f64, f_min: f64) -> Result<f64> {
    let c = consensus_all(ens, kernel, alpha, f_min)?;
    let d = ens.dim();
    let total: f64 = ens.points().zip(c.chunks_exact(d)).map(|(p, c)| dist_sq(p, c)).sum();
    Ok(total / ens.n() as f64)
}

/// Horizon `(2 / c_exp) ln(max(v0, 2 eps) / (2 eps))` after which the
/// concentration functional is expected below `eps`.
pub fn horizon(v0: f64, c_exp: f64, eps: f64) -> Result<f64> {
    if !(c_exp > 0.0 && eps > 0.0) {
        return Err(Error::invalid("c_exp/eps", "must both be > 0"));
    }
    Ok(2.0 / c_exp * (v0.max(2.0 * eps) / (2.0 * eps)).ln())
}

/// Outcome of sampling the near-minimizer inequality
/// `A(w,v) - A(V*(v),v) >= |w - V*(v)|^2 - slack` for the adaptive kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationReport {
    pub pairs: usize,
    pub slack: f64,
    pub violations: usize,
    /// Largest amount by which the right side exceeded the left.
    pub max_violation: f64,
}

/// `2 (2 kappa_scale / ell^2)^(1/(p-1))`.
pub fn localization_slack(kappa_scale: f64, ell: f64, p: f64) -> Result<f64> {
    if p <= 1.0 {
        return Err(Error::DegenerateExponent);
    }
    Ok(2.0 * (2.0 * kappa_scale / (ell * ell)).powf(1.0 / (p - 1.0)))
}

/// Samples `(w, v)` pairs uniformly in a ball around the minimizer set and
/// counts violations beyond `tol`.
pub fn localization_check(
    obj: &ObjectiveSpec,
    kappa_scale: f64,
    theta: f64,
    n_pairs: usize,
    radius: f64,
    seed: u64,
    tol: f64,
) -> Result<LocalizationReport> {
    let set = obj.minimizers().ok_or(Error::MissingMinimizerSet)?;
    let slack = localization_slack(kappa_scale, obj.ell, obj.p)?;
    let kernel = WeightKernel::AdaptiveProduct { kappa_scale, theta };
    kernel.validate()?;
    let (lo, hi) = set.bounds();
    let center: Point = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let reach = 0.5 * crate::dist(&lo, &hi) + radius;
    let mut rng = StreamKey::new(seed).stream(Purpose::Sampling, 0, 0);
    let mut report = LocalizationReport {
        pairs: n_pairs,
        slack,
        violations: 0,
        max_violation: 0.0,
    };
    for _ in 0..n_pairs {
        let w = uniform_in_ball(&mut rng, &center, reach);
        let v = uniform_in_ball(&mut rng, &center, reach);
        let a = set.nearest(&v).point;
        let (fw, fv, fa) = (obj.evaluate(&w)?, obj.evaluate(&v)?, obj.evaluate(&a)?);
        let lhs = kernel.pairwise(fw, fv, &w, &v, obj.f_min) - kernel.pairwise(fa, fv, &a, &v, obj.f_min);
        let rhs = dist_sq(&w, &a) - slack;
        let excess = rhs - lhs;
        if excess > tol {
            report.violations += 1;
        }
        report.max_violation = report.max_violation.max(excess);
    }
    Ok(report)
}
