//! Euler–Maruyama particle stepper and run orchestration.
//!
//! One step moves every particle toward its consensus point and adds isotropic
//! noise whose amplitude grows with the distance to that point:
//!
//! `V' = c + (1 - dt lambda)(V - c) + sqrt(dt) sigma (|V - c| + kappa) B`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::{consensus_all, Ensemble, WeightKernel};
use crate::diagnostics::v_functional;
use crate::objectives::ObjectiveSpec;
use crate::rng::{Purpose, StreamKey};
use crate::{Error, Point, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Initial law of the particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Independent normal coordinates with a common variance.
    GaussianIid {
        mean: Point,
        variance: f64,
    },
    UniformBox {
        lower: Point,
        upper: Point,
    },
    /// Positions used verbatim; the list length must equal N.
    Explicit(Vec<Point>),
}

impl InitSpec {
    pub fn validate(&self, n: usize, dim: usize) -> Result<()> {
        let check_dim = |p: &Point| {
            if p.len() == dim {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                })
            }
        };
        match self {
            InitSpec::GaussianIid { mean, variance } => {
                check_dim(mean)?;
                if !(variance.is_finite() && *variance > 0.0) {
                    return Err(Error::invalid("variance", format!("must be > 0, got {variance}")));
                }
                if mean.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("mean", "must be finite"));
                }
            }
            InitSpec::UniformBox { lower, upper } => {
                check_dim(lower)?;
                check_dim(upper)?;
                if lower.iter().chain(upper).any(|x| !x.is_finite()) || lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(Error::invalid("init", "uniform box must be finite with lower <= upper"));
                }
            }
            InitSpec::Explicit(points) => {
                if points.len() != n {
                    return Err(Error::invalid(
                        "init",
                        format!("explicit list has {} points but n_particles = {n}", points.len()),
                    ));
                }
                points.iter().try_for_each(check_dim)?;
            }
        }
        Ok(())
    }
}

/// Parameters of the particle scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub dt: f64,
    pub steps: usize,
    pub n_particles: usize,
    pub kernel: WeightKernel,
    pub init: InitSpec,
    pub seed: u64,
}

impl DynamicsConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let positive = |name: &'static str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be > 0, got {x}")))
            }
        };
        let non_negative = |name: &'static str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be >= 0, got {x}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("dt", self.dt)?;
        non_negative("sigma", self.sigma)?;
        non_negative("alpha", self.alpha)?;
        non_negative("kappa", self.kappa)?;
        if self.n_particles == 0 {
            return Err(Error::invalid("n_particles", "must be >= 1"));
        }
        self.kernel.validate()?;
        self.init.validate(self.n_particles, dim)?;
        if self.dt * self.lambda > 1.0 {
            log::warn!(
                "dt * lambda = {} > 1: explicit scheme may overshoot consensus",
                self.dt * self.lambda
            );
        }
        Ok(())
    }

    /// Rule-of-thumb regime `lambda > 3 sigma^2 d` in which the concentration
    /// functional is expected to decay.
    pub fn decay_regime(&self, dim: usize) -> bool {
        self.lambda > 3.0 * self.sigma * self.sigma * dim as f64
    }

    /// The classic scheme: one shared Gibbs consensus point, no noise floor.
    pub fn classic(&self) -> Self {
        Self {
            kernel: WeightKernel::StandardGibbs,
            kappa: 0.0,
            ..self.clone()
        }
    }
}

/// Draws the initial ensemble and fills its objective cache.
///
/// Particle `i` draws from its own stream, so the result does not depend on
/// scheduling.
pub fn init_ensemble(init: &InitSpec, n: usize, dim: usize, key: StreamKey, obj: &ObjectiveSpec) -> Result<Ensemble> {
    init.validate(n, dim)?;
    let positions: Vec<f64> = match init {
        InitSpec::Explicit(points) => points.concat(),
        InitSpec::GaussianIid { mean, variance } => {
            let sd = variance.sqrt();
            (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let mut rng = key.stream(Purpose::Init, i as u64, 0);
                    mean.iter()
                        .map(move |m| m + sd * rng.sample::<f64, _>(StandardNormal))
                        .collect::<Vec<_>>()
                })
                .collect()
        }
        InitSpec::UniformBox { lower, upper } => (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut rng = key.stream(Purpose::Init, i as u64, 0);
                lower
                    .iter()
                    .zip(upper)
                    .map(move |(l, u)| l + (u - l) * rng.random::<f64>())
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    Ensemble::evaluated(dim, positions, obj)
}

/// Moves every particle given precomputed consensus points.
pub(crate) fn advance(
    positions: &[f64],
    consensus: &[f64],
    dim: usize,
    cfg: &DynamicsConfig,
    step: usize,
) -> Result<Vec<f64>> {
    let key = StreamKey::new(cfg.seed);
    let keep = 1.0 - cfg.dt * cfg.lambda;
    let scale = cfg.dt.sqrt() * cfg.sigma;
    let mut out = vec![0.0; positions.len()];
    out.par_chunks_exact_mut(dim).enumerate().try_for_each(|(i, row)| {
        let x = &positions[i * dim..(i + 1) * dim];
        let c = &consensus[i * dim..(i + 1) * dim];
        let amp = scale * (crate::dist(x, c) + cfg.kappa);
        for k in 0..dim {
            row[k] = c[k] + keep * (x[k] - c[k]);
        }
        if amp != 0.0 {
            let mut b = vec![0.0; dim];
            key.gaussian(i as u64, step as u64, &mut b);
            for (r, z) in row.iter_mut().zip(&b) {
                *r += amp * z;
            }
        }
        if row.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Diverged { step, index: i })
        }
    })?;
    Ok(out)
}

fn step_with(
    ens: &Ensemble,
    consensus: &[f64],
    cfg: &DynamicsConfig,
    obj: &ObjectiveSpec,
    k: usize,
) -> Result<Ensemble> {
    let next = advance(ens.positions(), consensus, ens.dim(), cfg, k)?;
    let mut out = ens.clone();
    out.set_positions(next)?;
    out.refresh(obj)?;
    out.step_index = k + 1;
    Ok(out)
}

/// One step of the scheme with the configured kernel.
pub fn step(ens: &Ensemble, cfg: &DynamicsConfig, obj: &ObjectiveSpec, k: usize) -> Result<Ensemble> {
    let c = consensus_all(ens, &cfg.kernel, cfg.alpha, obj.f_min)?;
    step_with(ens, &c, cfg, obj, k)
}

/// One step of classic CBO: shared Gibbs consensus point, `kappa = 0`.
pub fn step_classic(ens: &Ensemble, cfg: &DynamicsConfig, obj: &ObjectiveSpec, k: usize) -> Result<Ensemble> {
    step(ens, &cfg.classic(), obj, k)
}

/// One row of the per-step diagnostics series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub step: usize,
    pub time: f64,
    /// Mean squared distance to the minimizer set; NaN without a declared set.
    pub v_t: f64,
    pub mean_f: f64,
    /// Root-mean-square distance of the consensus points from their mean.
    pub consensus_spread: f64,
    /// Objective evaluations so far.
    pub evals: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: DynamicsConfig,
    pub dim: usize,
    pub decay_regime: bool,
    pub series: Vec<SeriesRow>,
    pub snapshots: Vec<Snapshot>,
    pub final_positions: Vec<f64>,
    pub wall_time_s: f64,
}

impl RunRecord {
    /// Everything except wall time.
    pub fn same_outcome(&self, other: &RunRecord) -> bool {
        self.config == other.config
            && self.series.len() == other.series.len()
            && self
                .series
                .iter()
                .zip(&other.series)
                .all(|(a, b)| a.step == b.step && a.evals == b.evals && bits(a) == bits(b))
            && self.snapshots == other.snapshots
            && self
                .final_positions
                .iter()
                .map(|x| x.to_bits())
                .eq(other.final_positions.iter().map(|x| x.to_bits()))
    }
}

fn bits(r: &SeriesRow) -> [u64; 4] {
    [
        r.time.to_bits(),
        r.v_t.to_bits(),
        r.mean_f.to_bits(),
        r.consensus_spread.to_bits(),
    ]
}

/// A run that stopped early, with everything recorded up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunAborted {
    #[source]
    pub error: Error,
    pub partial: Box<RunRecord>,
}

/// Chooses which steps are snapshotted.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub snapshot_steps: Vec<usize>,
}

impl Recorder {
    pub fn new(snapshot_steps: Vec<usize>) -> Self {
        Self { snapshot_steps }
    }

    fn row(&self, ens: &Ensemble, consensus: &[f64], obj: &ObjectiveSpec, cfg: &DynamicsConfig) -> SeriesRow {
        let n = ens.n() as f64;
        let v_t = obj.minimizers().map_or(f64::NAN, |set| v_functional(ens, set));
        let mean_f = ens.f_values().iter().sum::<f64>() / n;
        SeriesRow {
            step: ens.step_index,
            time: ens.step_index as f64 * cfg.dt,
            v_t,
            mean_f,
            consensus_spread: spread(consensus, ens.dim()),
            evals: ens.evaluations(),
        }
    }
}

fn spread(points: &[f64], dim: usize) -> f64 {
    let n = (points.len() / dim) as f64;
    let mut mean = vec![0.0; dim];
    for p in points.chunks_exact(dim) {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let ss: f64 = points.chunks_exact(dim).map(|p| crate::dist_sq(p, &mean)).sum();
    (ss / n).sqrt()
}

/// Runs `cfg.steps` steps with the configured kernel.
pub fn run(cfg: &DynamicsConfig, obj: &ObjectiveSpec, recorder: &Recorder) -> Result<RunRecord, RunAborted> {
    let started = Instant::now();
    let dim = obj.dim();
    let mut record = RunRecord {
        config: cfg.clone(),
        dim,
        decay_regime: cfg.decay_regime(dim),
        series: Vec::with_capacity(cfg.steps + 1),
        snapshots: Vec::new(),
        final_positions: Vec::new(),
        wall_time_s: 0.0,
    };
    let result = (|| {
        cfg.validate(dim)?;
        let mut ens = init_ensemble(&cfg.init, cfg.n_particles, dim, StreamKey::new(cfg.seed), obj)?;
        for k in 0..=cfg.steps {
            let c = consensus_all(&ens, &cfg.kernel, cfg.alpha, obj.f_min)?;
            record.series.push(recorder.row(&ens, &c, obj, cfg));
            if recorder.snapshot_steps.contains(&k) {
                record.snapshots.push(Snapshot {
                    step: k,
                    positions: ens.positions().to_vec(),
                });
            }
            record.final_positions = ens.positions().to_vec();
            if k < cfg.steps {
                ens = step_with(&ens, &c, cfg, obj, k)?;
            }
        }
        Ok(())
    })();
    record.wall_time_s = started.elapsed().as_secs_f64();
    match result {
        Ok(()) => Ok(record),
        Err(error) => Err(RunAborted {
            error,
            partial: Box::new(record),
        }),
    }
}

/// [`run`] with the classic scheme.
pub fn run_classic(cfg: &DynamicsConfig, obj: &ObjectiveSpec, recorder: &Recorder) -> Result<RunRecord, RunAborted> {
    run(&cfg.classic(), obj, recorder)
}
