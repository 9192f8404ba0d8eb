//! Weight kernels and the stabilized consensus point.
//!
//! For a particle at `v` the consensus point is the Gibbs-weighted mean
//! `sum_i w_i V^i / sum_i w_i` with `w_i = exp(-alpha (A(V^i, v) - min_j A(V^j, v)))`.
//! Subtracting the row minimum keeps the largest weight at exactly one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::objectives::{MinimizerSet, ObjectiveSpec};
use crate::{dist_sq, Error, Point, Result};

/// Choice of weight exponent `A(w, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKernel {
    /// `A(w, v) = f(w)`: one shared consensus point.
    StandardGibbs,
    /// `A(w, v) = f(w) + |v - w|^2 / theta`.
    Polarized { theta: f64 },
    /// `A(w, v) = (f(w) - f_min)(f(v) + theta) / kappa_scale + |v - w|^2`.
    AdaptiveProduct { kappa_scale: f64, theta: f64 },
}

impl WeightKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightKernel::StandardGibbs => Ok(()),
            WeightKernel::Polarized { theta } => {
                if theta.is_finite() && theta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("theta", format!("must be > 0, got {theta}")))
                }
            }
            WeightKernel::AdaptiveProduct { kappa_scale, theta } => {
                if !(kappa_scale.is_finite() && kappa_scale > 0.0) {
                    return Err(Error::invalid("kappa_scale", format!("must be > 0, got {kappa_scale}")));
                }
                if !theta.is_finite() {
                    return Err(Error::invalid("theta", "must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Smallest `theta` for which the concentration guarantee applies:
    /// `ell * diam(V*)^p - f_min`. Returns `None` for other kernels.
    pub fn theta_floor(&self, obj: &ObjectiveSpec) -> Option<f64> {
        match self {
            WeightKernel::AdaptiveProduct { .. } => obj
                .minimizers()
                .map(|set: &MinimizerSet| obj.ell * set.diameter().powf(obj.p) - obj.f_min),
            _ => None,
        }
    }

    /// Logs a warning when `theta` is below [`WeightKernel::theta_floor`].
    pub fn check_against(&self, obj: &ObjectiveSpec) -> bool {
        match (self, self.theta_floor(obj)) {
            (WeightKernel::AdaptiveProduct { theta, .. }, Some(floor)) if *theta < floor => {
                log::warn!("theta = {theta} is below ell * diam^p - f_min = {floor}");
                false
            }
            _ => true,
        }
    }
}

/// Exponent of the Gibbs weight, split into a part that varies with the
/// weighted particle `w` and a part that depends on `v` alone.
///
/// Only [`Exponent::pairwise`] enters the consensus point: any function of `v`
/// alone cancels between numerator and denominator, so it is never
/// materialized.
pub trait Exponent: Sync {
    fn pairwise(&self, f_w: f64, f_v: f64, w: &[f64], v: &[f64], f_min: f64) -> f64;

    fn row_offset(&self, _f_v: f64, _v: &[f64], _f_min: f64) -> f64 {
        0.0
    }

    /// True when the pairwise part ignores `v`, so a single consensus point
    /// serves every particle.
    fn is_shared(&self) -> bool {
        false
    }

    fn full(&self, f_w: f64, f_v: f64, w: &[f64], v: &[f64], f_min: f64) -> f64 {
        self.row_offset(f_v, v, f_min) + self.pairwise(f_w, f_v, w, v, f_min)
    }

    /// Pairwise exponents of every particle against `v`; `positions` is
    /// row-major with rows of `v.len()`. Overrides must agree bitwise with
    /// [`Exponent::pairwise`].
    fn pairwise_row(&self, f: &[f64], positions: &[f64], v: &[f64], f_v: f64, f_min: f64, out: &mut [f64]) {
        for ((slot, w), f_w) in out.iter_mut().zip(positions.chunks_exact(v.len())).zip(f) {
            *slot = self.pairwise(*f_w, f_v, w, v, f_min);
        }
    }
}

impl Exponent for WeightKernel {
    #[inline]
    fn pairwise(&self, f_w: f64, f_v: f64, w: &[f64], v: &[f64], f_min: f64) -> f64 {
        match *self {
            WeightKernel::StandardGibbs => f_w,
            WeightKernel::Polarized { theta } => f_w + dist_sq(v, w) / theta,
            WeightKernel::AdaptiveProduct { kappa_scale, theta } => {
                (f_w - f_min) * (f_v + theta) / kappa_scale + dist_sq(v, w)
            }
        }
    }

    fn is_shared(&self) -> bool {
        matches!(self, WeightKernel::StandardGibbs)
    }

    fn pairwise_row(&self, f: &[f64], positions: &[f64], v: &[f64], f_v: f64, f_min: f64, out: &mut [f64]) {
        let rows = positions.chunks_exact(v.len());
        match *self {
            WeightKernel::StandardGibbs => out.copy_from_slice(f),
            WeightKernel::Polarized { theta } => {
                for ((slot, w), f_w) in out.iter_mut().zip(rows).zip(f) {
                    *slot = f_w + dist_sq(v, w) / theta;
                }
            }
            WeightKernel::AdaptiveProduct { kappa_scale, theta } => {
                let scale = f_v + theta;
                for ((slot, w), f_w) in out.iter_mut().zip(rows).zip(f) {
                    *slot = (f_w - f_min) * scale / kappa_scale + dist_sq(v, w);
                }
            }
        }
    }
}

/// `A(w, v)` for a kernel.
pub fn exponent(kernel: &WeightKernel, f_w: f64, f_v: f64, w: &[f64], v: &[f64], f_min: f64) -> f64 {
    kernel.full(f_w, f_v, w, v, f_min)
}

/// Particle positions with a cache of objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    positions: Vec<f64>,
    f_values: Vec<f64>,
    fresh: bool,
    pub step_index: usize,
    evaluations: u64,
}

impl Ensemble {
    /// Builds an ensemble from row-major positions; the cache starts stale.
    pub fn new(dim: usize, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 || positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(Error::invalid(
                "positions",
                format!("{} coordinates do not form points of dimension {dim}", positions.len()),
            ));
        }
        if let Some(k) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid("positions", format!("coordinate {k} is not finite")));
        }
        let n = positions.len() / dim;
        Ok(Self {
            dim,
            positions,
            f_values: vec![f64::NAN; n],
            fresh: false,
            step_index: 0,
            evaluations: 0,
        })
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.len());
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        Self::new(dim, points.concat())
    }

    /// Builds an ensemble whose cache is filled from `obj`.
    pub fn evaluated(dim: usize, positions: Vec<f64>, obj: &ObjectiveSpec) -> Result<Self> {
        let mut e = Self::new(dim, positions)?;
        e.refresh(obj)?;
        Ok(e)
    }

    pub fn n(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_values
    }

    pub fn is_fresh(&self) -> bool {
        self.fresh
    }

    /// Objective evaluations spent on this ensemble so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Replaces the positions and marks the cache stale.
    pub fn set_positions(&mut self, positions: Vec<f64>) -> Result<()> {
        if positions.len() != self.positions.len() {
            return Err(Error::DimensionMismatch {
                expected: self.positions.len(),
                got: positions.len(),
            });
        }
        self.positions = positions;
        self.fresh = false;
        Ok(())
    }

    /// Evaluates the objective at every particle.
    pub fn refresh(&mut self, obj: &ObjectiveSpec) -> Result<()> {
        if obj.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: obj.dim(),
                got: self.dim,
            });
        }
        let values = self
            .positions
            .par_chunks_exact(self.dim)
            .map(|p| obj.evaluate(p))
            .collect::<Result<Vec<_>>>()?;
        self.evaluations += values.len() as u64;
        self.f_values = values;
        self.fresh = true;
        Ok(())
    }

    pub fn mean(&self) -> Point {
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            for (a, x) in m.iter_mut().zip(p) {
                *a += x;
            }
        }
        let n = self.n() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Rows handed to one worker at a time.
const ROW_BLOCK: usize = 32;

struct Scratch {
    a: Vec<f64>,
    acc: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, d: usize) -> Self {
        Self {
            a: vec![0.0; n],
            acc: vec![0.0; d],
            lo: vec![0.0; d],
            hi: vec![0.0; d],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn consensus_into<K: Exponent + ?Sized>(
    ens: &Ensemble,
    kernel: &K,
    alpha: f64,
    f_min: f64,
    v: &[f64],
    f_v: f64,
    scratch: &mut Scratch,
    out: &mut [f64],
) -> Result<()> {
    let n = ens.n();
    let f = ens.f_values();
    kernel.pairwise_row(f, ens.positions(), v, f_v, f_min, &mut scratch.a);
    let mut best = 0;
    let mut min_a = f64::INFINITY;
    for (i, &a) in scratch.a.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::NonFiniteObjective {
                point: ens.point(i).to_vec(),
                value: a,
            });
        }
        if a < min_a {
            min_a = a;
            best = i;
        }
    }
    // Weighted mean of offsets from the heaviest particle: coincident
    // particles reproduce their position exactly.
    let anchor = ens.point(best);
    scratch.acc.iter_mut().for_each(|x| *x = 0.0);
    scratch.lo.copy_from_slice(anchor);
    scratch.hi.copy_from_slice(anchor);
    let mut total = 0.0;
    for i in 0..n {
        let t = alpha * (scratch.a[i] - min_a);
        // exp underflows to exactly zero past this point
        if t > 746.0 {
            continue;
        }
        let w = (-t).exp();
        total += w;
        let p = ens.point(i);
        for k in 0..p.len() {
            scratch.acc[k] += w * (p[k] - anchor[k]);
            scratch.lo[k] = scratch.lo[k].min(p[k]);
            scratch.hi[k] = scratch.hi[k].max(p[k]);
        }
    }
    for k in 0..out.len() {
        out[k] = (anchor[k] + scratch.acc[k] / total).clamp(scratch.lo[k], scratch.hi[k]);
    }
    Ok(())
}

fn check_ready(ens: &Ensemble, v: &[f64]) -> Result<()> {
    if !ens.is_fresh() {
        return Err(Error::StaleCache);
    }
    if v.len() != ens.dim() {
        return Err(Error::DimensionMismatch {
            expected: ens.dim(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Consensus point seen from a particle at `v` with objective value `f_v`.
///
/// The result lies in the bounding box of the particles with non-zero weight.
pub fn consensus_point<K: Exponent + ?Sized>(
    ens: &Ensemble,
    kernel: &K,
    alpha: f64,
    f_min: f64,
    v: &[f64],
    f_v: f64,
) -> Result<Point> {
    check_ready(ens, v)?;
    let mut out = vec![0.0; ens.dim()];
    let mut scratch = Scratch::new(ens.n(), ens.dim());
    consensus_into(ens, kernel, alpha, f_min, v, f_v, &mut scratch, &mut out)?;
    Ok(out)
}

/// Consensus points for every particle, row-major `N x d`.
///
/// Shared kernels compute one point and broadcast it. Otherwise rows are
/// processed in blocks across the rayon pool; each row is summed in particle
/// order, so the result does not depend on the number of workers.
pub fn consensus_all<K: Exponent + ?Sized>(ens: &Ensemble, kernel: &K, alpha: f64, f_min: f64) -> Result<Vec<f64>> {
    if !ens.is_fresh() {
        return Err(Error::StaleCache);
    }
    let (n, d) = (ens.n(), ens.dim());
    let mut out = vec![0.0; n * d];
    if kernel.is_shared() {
        let c = consensus_point(ens, kernel, alpha, f_min, ens.point(0), ens.f_values()[0])?;
        for row in out.chunks_exact_mut(d) {
            row.copy_from_slice(&c);
        }
        return Ok(out);
    }
    out.par_chunks_mut(ROW_BLOCK * d)
        .enumerate()
        .try_for_each(|(b, block)| {
            let mut scratch = Scratch::new(n, d);
            for (r, row) in block.chunks_exact_mut(d).enumerate() {
                let i = b * ROW_BLOCK + r;
                consensus_into(
                    ens,
                    kernel,
                    alpha,
                    f_min,
                    ens.point(i),
                    ens.f_values()[i],
                    &mut scratch,
                    row,
                )?;
            }
            Ok::<(), Error>(())
        })?;
    Ok(out)
}
