//! 1D finite-volume solver for the mean-field Fokker–Planck equation
//!
//! `d/dt rho = d/dx(lambda (x - v_alpha(rho, x)) rho) + d^2/dx^2(D rho)`,
//! `D = sigma^2 / 2 (|x - v_alpha(rho, x)| + kappa)^2`.
//!
//! The scheme is explicit and conservative: upwind advective fluxes with the
//! velocity averaged to interfaces, centered differences of `D rho`, and
//! zero flux through both ends of the domain.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::consensus::{Exponent, WeightKernel};
use crate::dynamics::InitSpec;
use crate::objectives::{MinimizerSet, ObjectiveSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::invalid(
                "grid",
                format!("need x_min < x_max, got [{x_min}, {x_max}]"),
            ));
        }
        if cells < 16 {
            return Err(Error::invalid("cells", format!("need at least 16, got {cells}")));
        }
        Ok(Self { x_min, x_max, cells })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.cells as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|j| self.center(j)).collect()
    }

    pub fn edge(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.cells).map(|j| self.edge(j)).collect()
    }
}

/// Cell-averaged density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityField {
    pub grid: Grid1D,
    pub rho: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn mean(&self) -> f64 {
        let dx = self.grid.dx();
        self.rho
            .iter()
            .enumerate()
            .map(|(j, r)| r * self.grid.center(j) * dx)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let dx = self.grid.dx();
        self.rho
            .iter()
            .enumerate()
            .map(|(j, r)| r * (self.grid.center(j) - m).powi(2) * dx)
            .sum()
    }

    /// Mass in the outermost cell on each side.
    pub fn boundary_mass(&self) -> f64 {
        (self.rho[0] + self.rho[self.rho.len() - 1]) * self.grid.dx()
    }

    /// Mean squared distance to the minimizer set by midpoint quadrature.
    pub fn v_functional(&self, set: &MinimizerSet) -> f64 {
        let dx = self.grid.dx();
        self.rho
            .iter()
            .enumerate()
            .map(|(j, r)| r * set.distance(&[self.grid.center(j)]).powi(2) * dx)
            .sum()
    }

    /// Piecewise-linear CDF of the cell averages.
    pub fn cdf(&self) -> impl Fn(f64) -> f64 + '_ {
        let dx = self.grid.dx();
        let mut cum = Vec::with_capacity(self.rho.len() + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for r in &self.rho {
            acc += r * dx;
            cum.push(acc);
        }
        move |x: f64| {
            if x <= self.grid.x_min {
                return 0.0;
            }
            if x >= self.grid.x_max {
                return cum[cum.len() - 1];
            }
            let s = (x - self.grid.x_min) / dx;
            let j = (s.floor() as usize).min(self.rho.len() - 1);
            cum[j] + (s - j as f64) * self.rho[j] * dx
        }
    }

    fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("density", format!("cannot normalize mass {m}")));
        }
        self.rho.iter_mut().for_each(|r| *r /= m);
        Ok(())
    }
}

/// Discretizes an initial law as cell averages with unit mass.
pub fn init_density(grid: Grid1D, init: &InitSpec) -> Result<DensityField> {
    let dx = grid.dx();
    let edges = grid.edges();
    let rho: Vec<f64> = match init {
        InitSpec::GaussianIid { mean, variance } => {
            if mean.len() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: mean.len(),
                });
            }
            let normal = Normal::new(mean[0], variance.sqrt()).map_err(|e| Error::invalid("init", e.to_string()))?;
            edges
                .windows(2)
                .map(|e| (normal.cdf(e[1]) - normal.cdf(e[0])) / dx)
                .collect()
        }
        InitSpec::UniformBox { lower, upper } => {
            if lower.len() != 1 || upper.len() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: lower.len(),
                });
            }
            let (l, u) = (lower[0], upper[0]);
            if l == u {
                histogram(&grid, &[l])
            } else {
                edges
                    .windows(2)
                    .map(|e| ((u.min(e[1]) - l.max(e[0])).max(0.0)) / (u - l) / dx)
                    .collect()
            }
        }
        InitSpec::Explicit(points) => {
            let xs: Vec<f64> = points
                .iter()
                .map(|p| {
                    if p.len() == 1 {
                        Ok(p[0])
                    } else {
                        Err(Error::DimensionMismatch {
                            expected: 1,
                            got: p.len(),
                        })
                    }
                })
                .collect::<Result<_>>()?;
            histogram(&grid, &xs)
        }
    };
    let mut field = DensityField { grid, rho, time: 0.0 };
    field.normalize()?;
    Ok(field)
}

fn histogram(grid: &Grid1D, xs: &[f64]) -> Vec<f64> {
    let mut rho = vec![0.0; grid.cells];
    for &x in xs {
        let j = ((x - grid.x_min) / grid.dx())
            .floor()
            .clamp(0.0, (grid.cells - 1) as f64) as usize;
        rho[j] += 1.0;
    }
    rho
}

/// Drift rate, noise amplitude and noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpParams {
    pub lambda: f64,
    pub sigma: f64,
    pub kappa: f64,
}

/// The consensus map `rho -> v_alpha(rho, x_j)` on a fixed grid.
///
/// The exponent `A(x_k, x_j)` does not depend on `rho`, so the stabilized
/// weights are built once; only the quadrature against `rho` changes between
/// steps.
pub struct ConsensusOperator {
    grid: Grid1D,
    centers: Vec<f64>,
    alpha: f64,
    /// Row-major `A(x_k, x_j)` with row `j`.
    a: Vec<f64>,
    /// `exp(-alpha (A - row min))`.
    w: Vec<f64>,
}

impl ConsensusOperator {
    pub fn new(grid: Grid1D, kernel: &WeightKernel, alpha: f64, obj: &ObjectiveSpec) -> Result<Self> {
        if obj.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: obj.dim(),
            });
        }
        kernel.validate()?;
        let centers = grid.centers();
        let f: Vec<f64> = centers.iter().map(|&x| obj.evaluate(&[x])).collect::<Result<_>>()?;
        let m = grid.cells;
        let mut a = vec![0.0; m * m];
        let mut w = vec![0.0; m * m];
        a.par_chunks_mut(m)
            .zip(w.par_chunks_mut(m))
            .enumerate()
            .for_each(|(j, (arow, wrow))| {
                let v = [centers[j]];
                for k in 0..m {
                    arow[k] = kernel.pairwise(f[k], f[j], &[centers[k]], &v, obj.f_min);
                }
                let min = arow.iter().copied().fold(f64::INFINITY, f64::min);
                for k in 0..m {
                    wrow[k] = (-alpha * (arow[k] - min)).exp();
                }
            });
        Ok(Self {
            grid,
            centers,
            alpha,
            a,
            w,
        })
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    /// `v_alpha(rho, x_j)` for every cell by midpoint quadrature.
    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        let m = self.grid.cells;
        let occupied = rho
            .iter()
            .position(|&r| r > 0.0)
            .zip(rho.iter().rposition(|&r| r > 0.0));
        let Some((first, last)) = occupied else {
            return self.centers.clone();
        };
        let (lo, hi) = (self.centers[first], self.centers[last]);
        (0..m)
            .into_par_iter()
            .map(|j| {
                let row = &self.w[j * m..(j + 1) * m];
                let (mut num, mut den) = (0.0, 0.0);
                for k in first..=last {
                    let e = row[k] * rho[k];
                    num += e * self.centers[k];
                    den += e;
                }
                if den < 1e-280 {
                    // the cached row minimum sits where rho vanishes; restabilize
                    // on the occupied cells
                    let arow = &self.a[j * m..(j + 1) * m];
                    let min = (first..=last)
                        .filter(|&k| rho[k] > 0.0)
                        .map(|k| arow[k])
                        .fold(f64::INFINITY, f64::min);
                    num = 0.0;
                    den = 0.0;
                    for k in first..=last {
                        if rho[k] > 0.0 {
                            let e = (-self.alpha * (arow[k] - min)).exp() * rho[k];
                            num += e * self.centers[k];
                            den += e;
                        }
                    }
                }
                (num / den).clamp(lo, hi)
            })
            .collect()
    }
}

/// Consensus points on the grid for a density field.
pub fn v_alpha_grid(field: &DensityField, kernel: &WeightKernel, alpha: f64, obj: &ObjectiveSpec) -> Result<Vec<f64>> {
    Ok(ConsensusOperator::new(field.grid, kernel, alpha, obj)?.apply(&field.rho))
}

/// Cell-centered drift `lambda (x - v_alpha)` and diffusivity `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
}

impl Coefficients {
    pub fn from_consensus(grid: &Grid1D, va: &[f64], params: &FpParams) -> Self {
        let half_s2 = 0.5 * params.sigma * params.sigma;
        let (drift, diffusion) = va
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let gap = grid.center(j) - v;
                (params.lambda * gap, half_s2 * (gap.abs() + params.kappa).powi(2))
            })
            .unzip();
        Self { drift, diffusion }
    }

    /// `0.4 min(dx / max|drift|, dx^2 / (2 max D))`; infinite when both vanish.
    pub fn cfl_dt(&self, dx: f64) -> f64 {
        let max_drift = self.drift.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let max_diff = self.diffusion.iter().fold(0.0f64, |m, d| m.max(*d));
        let adv = if max_drift > 0.0 { dx / max_drift } else { f64::INFINITY };
        let dif = if max_diff > 0.0 {
            dx * dx / (2.0 * max_diff)
        } else {
            f64::INFINITY
        };
        0.4 * adv.min(dif)
    }
}

pub fn cfl_dt(field: &DensityField, op: &ConsensusOperator, params: &FpParams) -> f64 {
    let va = op.apply(&field.rho);
    Coefficients::from_consensus(&field.grid, &va, params).cfl_dt(field.grid.dx())
}

/// What one explicit update did to the mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInfo {
    /// `|mass - 1|` after the conservative update, before clipping.
    pub mass_defect: f64,
    /// Mass removed by clipping negative cells.
    pub clipped: f64,
}

/// One conservative update with given coefficients; checks the CFL bound.
pub fn fp_advance(field: &mut DensityField, coeffs: &Coefficients, dt: f64) -> Result<StepInfo> {
    let dx = field.grid.dx();
    let limit = coeffs.cfl_dt(dx);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let m = field.rho.len();
    let rho = &field.rho;
    // flux[i] crosses the interface between cells i and i+1
    let mut flux = vec![0.0; m - 1];
    for (i, fl) in flux.iter_mut().enumerate() {
        // transport velocity is -drift
        let u = -0.5 * (coeffs.drift[i] + coeffs.drift[i + 1]);
        let adv = if u > 0.0 {
            u * rho[i]
        } else if u < 0.0 {
            u * rho[i + 1]
        } else {
            0.0
        };
        let diff = -(coeffs.diffusion[i + 1] * rho[i + 1] - coeffs.diffusion[i] * rho[i]) / dx;
        *fl = adv + diff;
    }
    let ratio = dt / dx;
    let mut next = rho.clone();
    for i in 0..m {
        let right = if i + 1 < m { flux[i] } else { 0.0 };
        let left = if i > 0 { flux[i - 1] } else { 0.0 };
        next[i] -= ratio * (right - left);
    }
    let mass: f64 = next.iter().sum::<f64>() * dx;
    let mut clipped = 0.0;
    for r in next.iter_mut() {
        if *r < 0.0 {
            clipped -= *r * dx;
            *r = 0.0;
        }
    }
    if clipped > 0.0 {
        log::debug!("clipped {clipped:e} of mass at t = {}", field.time);
    }
    field.rho = next;
    field.normalize()?;
    field.time += dt;
    Ok(StepInfo {
        mass_defect: (mass - 1.0).abs(),
        clipped,
    })
}

/// One step with `v_alpha` recomputed from the current field.
pub fn fp_step(field: &mut DensityField, op: &ConsensusOperator, params: &FpParams, dt: f64) -> Result<StepInfo> {
    let va = op.apply(&field.rho);
    let coeffs = Coefficients::from_consensus(&field.grid, &va, params);
    fp_advance(field, &coeffs, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpSample {
    pub time: f64,
    /// NaN without a minimizer set.
    pub v_t: f64,
    pub clipped_total: f64,
}

#[derive(Debug, Clone)]
pub struct FpTrajectory {
    /// One entry per step, including `t = 0`.
    pub series: Vec<FpSample>,
    /// Fields at the requested record times.
    pub snapshots: Vec<DensityField>,
    pub clipped_total: f64,
    pub max_mass_defect: f64,
    pub max_boundary_mass: f64,
    /// Clipped mass exceeded `1e-3`.
    pub unreliable: bool,
    /// Boundary cells carried more than `1e-6` of the mass at some time.
    pub boundary_flag: bool,
    pub steps: usize,
}

/// Advances to `t_end` with `dt` set by the CFL bound each step, stopping
/// exactly on every time in `record_times`.
pub fn run_fp(
    field: DensityField,
    op: &ConsensusOperator,
    params: &FpParams,
    t_end: f64,
    record_times: &[f64],
    set: Option<&MinimizerSet>,
) -> Result<FpTrajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("t_end", format!("must be finite and >= 0, got {t_end}")));
    }
    let mut stops: Vec<f64> = record_times.iter().copied().filter(|t| *t <= t_end).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let mut field = field;
    let v_t = |f: &DensityField| set.map_or(f64::NAN, |s| f.v_functional(s));
    let mut traj = FpTrajectory {
        series: vec![FpSample {
            time: field.time,
            v_t: v_t(&field),
            clipped_total: 0.0,
        }],
        snapshots: Vec::new(),
        clipped_total: 0.0,
        max_mass_defect: 0.0,
        max_boundary_mass: field.boundary_mass(),
        unreliable: false,
        boundary_flag: false,
        steps: 0,
    };
    let mut next_stop = 0;
    while next_stop < stops.len() && stops[next_stop] <= field.time {
        traj.snapshots.push(field.clone());
        next_stop += 1;
    }
    while field.time < t_end {
        let va = op.apply(&field.rho);
        let coeffs = Coefficients::from_consensus(&field.grid, &va, params);
        let target = stops.get(next_stop).copied().unwrap_or(t_end).min(t_end);
        let mut dt = coeffs.cfl_dt(field.grid.dx()).min(target - field.time);
        if !dt.is_finite() {
            dt = target - field.time;
        }
        let info = fp_advance(&mut field, &coeffs, dt)?;
        if target - field.time <= 1e-12 * target.abs().max(1.0) {
            field.time = target;
        }
        traj.steps += 1;
        traj.clipped_total += info.clipped;
        traj.max_mass_defect = traj.max_mass_defect.max(info.mass_defect);
        traj.max_boundary_mass = traj.max_boundary_mass.max(field.boundary_mass());
        traj.series.push(FpSample {
            time: field.time,
            v_t: v_t(&field),
            clipped_total: traj.clipped_total,
        });
        while next_stop < stops.len() && stops[next_stop] <= field.time {
            traj.snapshots.push(field.clone());
            next_stop += 1;
        }
    }
    traj.unreliable = traj.clipped_total > 1e-3;
    traj.boundary_flag = traj.max_boundary_mass > 1e-6;
    if traj.unreliable {
        log::warn!(
            "Fokker-Planck run clipped {} of mass; results unreliable",
            traj.clipped_total
        );
    }
    if traj.boundary_flag {
        log::warn!(
            "boundary cells reached mass {}; widen the domain",
            traj.max_boundary_mass
        );
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::make_builtin;
    use serde_json::json;

    fn gauss(mean: f64, var: f64) -> InitSpec {
        InitSpec::GaussianIid {
            mean: vec![mean],
            variance: var,
        }
    }

    fn flat() -> ObjectiveSpec {
        ObjectiveSpec::new("flat", 1, 0.0, |_: &[f64]| 0.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 15).is_err());
        assert!(Grid1D::new(1.0, 1.0, 32).is_err());
        assert_eq!(Grid1D::new(-1.0, 1.0, 20).unwrap().dx(), 0.1);
    }

    #[test]
    fn gaussian_init_mass() {
        let f = init_density(Grid1D::new(-8.0, 8.0, 512).unwrap(), &gauss(0.0, 1.0)).unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_init_density() {
        let init = InitSpec::UniformBox {
            lower: vec![0.0],
            upper: vec![1.0],
        };
        let f = init_density(Grid1D::new(-2.0, 3.0, 50).unwrap(), &init).unwrap();
        for (j, r) in f.rho.iter().enumerate() {
            let x = f.grid.center(j);
            let expect = if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
            assert!((r - expect).abs() < 1e-12, "cell {j}: {r}");
        }
    }

    #[test]
    fn wide_gaussian_mean() {
        let g = Grid1D::new(-15.0, 25.0, 400).unwrap();
        let f = init_density(g, &gauss(5.0, 10.0)).unwrap();
        assert!((f.mean() - 5.0).abs() <= g.dx());
    }

    #[test]
    fn single_cell_consensus() {
        let obj = make_builtin("quadratic", &json!({"dim": 1})).unwrap();
        let g = Grid1D::new(-2.0, 2.0, 40).unwrap();
        let mut f = init_density(g, &InitSpec::Explicit(vec![vec![0.75]])).unwrap();
        f.rho.iter_mut().for_each(|r| *r *= 1.0);
        let star = g.center(27);
        for k in [
            WeightKernel::StandardGibbs,
            WeightKernel::Polarized { theta: 1.0 },
            WeightKernel::AdaptiveProduct {
                kappa_scale: 0.1,
                theta: 1.0,
            },
        ] {
            let va = v_alpha_grid(&f, &k, 50.0, &obj).unwrap();
            assert!(va.iter().all(|&v| v == star), "{va:?}");
        }
    }

    #[test]
    fn alpha_zero_gives_mean() {
        let obj = make_builtin("quadratic", &json!({"dim": 1})).unwrap();
        let f = init_density(Grid1D::new(-5.0, 7.0, 120).unwrap(), &gauss(1.0, 0.5)).unwrap();
        let va = v_alpha_grid(&f, &WeightKernel::Polarized { theta: 2.0 }, 0.0, &obj).unwrap();
        let m = f.mean();
        assert!(va.iter().all(|v| (v - m).abs() < 1e-12));
    }

    #[test]
    fn symmetric_density_centers_consensus() {
        let obj = make_builtin("symmetric_double_well", &json!({})).unwrap();
        let g = Grid1D::new(-4.0, 4.0, 80).unwrap();
        let f = init_density(g, &gauss(0.0, 1.0)).unwrap();
        let va = v_alpha_grid(&f, &WeightKernel::StandardGibbs, 5.0, &obj).unwrap();
        assert!(va.iter().all(|v| v.abs() <= g.dx()));
        assert!(va[0].abs() < 1e-12);
    }

    #[test]
    fn cfl_examples() {
        let c = Coefficients {
            drift: vec![0.5, -1.0, 0.25],
            diffusion: vec![0.0; 3],
        };
        assert!((c.cfl_dt(0.1) - 0.04).abs() < 1e-15);
        let c = Coefficients {
            drift: vec![0.0; 3],
            diffusion: vec![0.5; 3],
        };
        assert!((c.cfl_dt(0.1) - 0.004).abs() < 1e-15);
        let obj = make_builtin("paper_plateau", &json!({})).unwrap();
        let g = Grid1D::new(-15.0, 25.0, 200).unwrap();
        let f = init_density(g, &gauss(5.0, 10.0)).unwrap();
        let k = WeightKernel::AdaptiveProduct {
            kappa_scale: 0.05,
            theta: 1.0,
        };
        let op = ConsensusOperator::new(g, &k, 10.0, &obj).unwrap();
        let p = FpParams {
            lambda: 1.0,
            sigma: 0.2,
            kappa: 0.0,
        };
        let dt = cfl_dt(&f, &op, &p);
        assert!(dt.is_finite() && dt > 0.0);
    }

    #[test]
    fn still_without_drift_or_noise() {
        let obj = make_builtin("quadratic", &json!({"dim": 1})).unwrap();
        let g = Grid1D::new(-4.0, 4.0, 64).unwrap();
        let mut f = init_density(g, &gauss(0.5, 0.6)).unwrap();
        let before = f.rho.clone();
        let op = ConsensusOperator::new(g, &WeightKernel::StandardGibbs, 3.0, &obj).unwrap();
        let p = FpParams {
            lambda: 0.0,
            sigma: 0.0,
            kappa: 0.0,
        };
        fp_step(&mut f, &op, &p, 0.1).unwrap();
        for (a, b) in f.rho.iter().zip(&before) {
            assert!((a - b).abs() <= 1e-15 * b.max(1.0));
        }
    }

    #[test]
    fn cfl_violation_rejected() {
        let g = Grid1D::new(-4.0, 4.0, 64).unwrap();
        let mut f = init_density(g, &gauss(0.0, 1.0)).unwrap();
        let c = Coefficients {
            drift: vec![1.0; 64],
            diffusion: vec![0.0; 64],
        };
        assert!(matches!(fp_advance(&mut f, &c, 1.0), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn diffusion_moment_growth() {
        let g = Grid1D::new(-10.0, 10.0, 400).unwrap();
        let mut f = init_density(g, &gauss(0.0, 1.0)).unwrap();
        let d = 0.5;
        let c = Coefficients {
            drift: vec![0.0; 400],
            diffusion: vec![d; 400],
        };
        let dt = c.cfl_dt(g.dx());
        for _ in 0..20 {
            let v0 = f.variance();
            let info = fp_advance(&mut f, &c, dt).unwrap();
            assert!(info.mass_defect < 1e-12);
            assert!(((f.variance() - v0) - 2.0 * d * dt).abs() < 1e-6 * 2.0 * d * dt);
        }
    }

    #[test]
    fn heat_equation_matches_gaussian() {
        let g = Grid1D::new(-10.0, 10.0, 400).unwrap();
        let mut f = init_density(g, &gauss(0.0, 0.5)).unwrap();
        let (sigma, kappa) = (0.8, 1.0);
        // frozen coefficients: lambda = 0, |x - v| treated as 0
        let d = 0.5 * sigma * sigma * kappa * kappa;
        let c = Coefficients {
            drift: vec![0.0; 400],
            diffusion: vec![d; 400],
        };
        let limit = c.cfl_dt(g.dx());
        let steps = (1.0 / limit).ceil() as usize;
        for _ in 0..steps {
            fp_advance(&mut f, &c, 1.0 / steps as f64).unwrap();
        }
        let exact = Normal::new(0.0, (0.5 + 2.0 * d).sqrt()).unwrap();
        let cdf = f.cdf();
        let xs = g.edges();
        let w1: f64 = xs
            .windows(2)
            .map(|w| 0.5 * ((cdf(w[0]) - exact.cdf(w[0])).abs() + (cdf(w[1]) - exact.cdf(w[1])).abs()) * (w[1] - w[0]))
            .sum();
        assert!(w1 <= 2.0 * g.dx(), "{w1}");
    }

    #[test]
    fn symmetric_stagnation() {
        let obj = make_builtin("symmetric_double_well", &json!({})).unwrap();
        let g = Grid1D::new(-6.0, 6.0, 240).unwrap();
        let f = init_density(g, &gauss(0.0, 1.0)).unwrap();
        let op = ConsensusOperator::new(g, &WeightKernel::StandardGibbs, 10.0, &obj).unwrap();
        let p = FpParams {
            lambda: 1.0,
            sigma: 0.3,
            kappa: 0.0,
        };
        let set = obj.minimizers().unwrap();
        let mut field = f;
        for _ in 0..200 {
            let dt = cfl_dt(&field, &op, &p);
            fp_step(&mut field, &op, &p, dt).unwrap();
            let m = field.rho.len();
            for j in 0..m / 2 {
                let (a, b) = (field.rho[j], field.rho[m - 1 - j]);
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "cell {j}: {a} vs {b}");
            }
        }
        // mass collapses onto 0, a unit away from both minimizers
        let t0 = field.time;
        let traj = run_fp(field, &op, &p, t0 + 4.0, &[], Some(set)).unwrap();
        assert!(traj.series.iter().all(|s| s.v_t > 0.3));
        assert!(traj.series.last().unwrap().v_t > 0.8, "{:?}", traj.series.last());
    }

    #[test]
    fn run_records_exact_times() {
        let obj = flat();
        let g = Grid1D::new(-5.0, 5.0, 64).unwrap();
        let f0 = init_density(g, &gauss(0.0, 1.0)).unwrap();
        let op = ConsensusOperator::new(g, &WeightKernel::StandardGibbs, 1.0, &obj).unwrap();
        let p = FpParams {
            lambda: 1.0,
            sigma: 0.2,
            kappa: 0.1,
        };
        let traj = run_fp(f0.clone(), &op, &p, 0.0, &[0.0], None).unwrap();
        assert_eq!(traj.snapshots, vec![f0.clone()]);
        assert_eq!(traj.series.len(), 1);
        let traj = run_fp(f0, &op, &p, 0.3, &[0.1, 0.2, 0.3], None).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times, vec![0.1, 0.2, 0.3]);
        assert!(traj.max_mass_defect < 1e-12);
        assert!(!traj.unreliable);
    }
}
