//! Sample-based falsifiers for the growth and regularity hypotheses.
//!
//! They can only report violations they find; a clean report is not a proof.

use super::ObjectiveSpec;
use crate::rng::{uniform_in_ball, Purpose, StreamKey};
use crate::{dist, norm, Error, Point, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LowerReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `ell * dist^p - (f - f_min)` seen, clamped at 0.
    pub max_violation: f64,
    pub worst_sample: Option<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperReport {
    pub pairs: usize,
    pub growth_violations: usize,
    pub lipschitz_violations: usize,
    pub max_growth_violation: f64,
    pub max_lipschitz_violation: f64,
    pub worst_growth: Option<Point>,
    pub worst_lipschitz: Option<(Point, Point)>,
}

fn exceeds(lhs: f64, rhs: f64) -> Option<f64> {
    let excess = lhs - rhs;
    (excess > 1e-12 * rhs.abs().max(1.0)).then_some(excess)
}

fn sampling_ball(obj: &ObjectiveSpec, radius: f64) -> (Point, f64) {
    match obj.minimizers() {
        Some(set) => {
            let (lo, hi) = set.bounds();
            let center: Point = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
            (center, 0.5 * dist(&lo, &hi) + radius)
        }
        None => (vec![0.0; obj.dim()], radius),
    }
}

/// Looks for points where `f(w) - f_min >= ell * dist(w, V*)^p` fails.
///
/// Samples are uniform in a ball enclosing the minimizer set's bounding box,
/// `radius` beyond it.
pub fn check_assumption_lower(obj: &ObjectiveSpec, n_samples: usize, radius: f64, seed: u64) -> Result<LowerReport> {
    let set = obj.minimizers().ok_or(Error::MissingMinimizerSet)?;
    let (center, r) = sampling_ball(obj, radius);
    let mut rng = StreamKey::new(seed).stream(Purpose::Sampling, 0, 0);
    let mut report = LowerReport {
        samples: n_samples,
        violations: 0,
        max_violation: 0.0,
        worst_sample: None,
    };
    for _ in 0..n_samples {
        let w = uniform_in_ball(&mut rng, &center, r);
        let gap = obj.evaluate(&w)? - obj.f_min;
        let bound = obj.ell * set.distance(&w).powf(obj.p);
        if let Some(excess) = exceeds(bound, gap) {
            report.violations += 1;
            if excess > report.max_violation {
                report.max_violation = excess;
                report.worst_sample = Some(w);
            }
        }
    }
    Ok(report)
}

/// Looks for violations of `f(w) - f_min <= L (1 + |w|^2)` and
/// `|f(v) - f(w)| <= L (|w| + |v| + 1) |v - w|` on random pairs.
pub fn check_assumption_upper(obj: &ObjectiveSpec, n_pairs: usize, radius: f64, seed: u64) -> Result<UpperReport> {
    let (center, r) = sampling_ball(obj, radius);
    let mut rng = StreamKey::new(seed).stream(Purpose::Sampling, 1, 0);
    let l = obj.lipschitz;
    let mut report = UpperReport {
        pairs: n_pairs,
        growth_violations: 0,
        lipschitz_violations: 0,
        max_growth_violation: 0.0,
        max_lipschitz_violation: 0.0,
        worst_growth: None,
        worst_lipschitz: None,
    };
    for _ in 0..n_pairs {
        let w = uniform_in_ball(&mut rng, &center, r);
        let v = uniform_in_ball(&mut rng, &center, r);
        let (fw, fv) = (obj.evaluate(&w)?, obj.evaluate(&v)?);
        let nw = norm(&w);
        if let Some(excess) = exceeds(fw - obj.f_min, l * (1.0 + nw * nw)) {
            report.growth_violations += 1;
            if excess > report.max_growth_violation {
                report.max_growth_violation = excess;
                report.worst_growth = Some(w.clone());
            }
        }
        let bound = l * (nw + norm(&v) + 1.0) * dist(&v, &w);
        if let Some(excess) = exceeds((fv - fw).abs(), bound) {
            report.lipschitz_violations += 1;
            if excess > report.max_lipschitz_violation {
                report.max_lipschitz_violation = excess;
                report.worst_lipschitz = Some((w, v));
            }
        }
    }
    Ok(report)
}
