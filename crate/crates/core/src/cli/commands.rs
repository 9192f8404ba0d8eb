use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::output::{fmt_f64, histogram_svg, series_csv, snapshots_csv, Csv};
use crate::consensus::WeightKernel;
use crate::diagnostics::{laplace_bound_check, wasserstein1_1d, LaplaceCheckInput, LaplaceReport};
use crate::dynamics::{run, DynamicsConfig, Recorder, RunRecord};
use crate::meanfield::{init_density, run_fp, ConsensusOperator, FpParams, FpTrajectory, Grid1D};
use crate::objectives::ObjectiveSpec;
use crate::rng::{Purpose, StreamKey};
use crate::{Error, Point, Result};

/// Whether every check in a command held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
}

fn run_dir(cfg: &ExperimentConfig, repeat: usize) -> PathBuf {
    if cfg.repeats == 1 {
        cfg.outputs.clone()
    } else {
        cfg.outputs.join(format!("repeat_{repeat:03}"))
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn prepare_outputs(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.outputs)
        .map_err(|e| Error::Config(format!("output directory {} not writable: {e}", cfg.outputs.display())))?;
    write_json(&cfg.outputs.join("resolved_config.json"), cfg)
}

fn write_run(dir: &Path, cfg: &ExperimentConfig, rec: &RunRecord, error: Option<&Error>) -> Result<()> {
    fs::create_dir_all(dir)?;
    series_csv(rec).write(&dir.join("series.csv"))?;
    snapshots_csv(rec).write(&dir.join("snapshots.csv"))?;
    for s in &rec.snapshots {
        let title = format!("step {} (t = {})", s.step, fmt_f64(s.step as f64 * rec.config.dt));
        fs::write(
            dir.join(format!("hist_{}.svg", s.step)),
            histogram_svg(&s.positions, rec.dim, &title),
        )?;
    }
    let meta = json!({
        "resolved_config": cfg,
        "seed": rec.config.seed,
        "wall_time_s": rec.wall_time_s,
        "decay_regime": rec.decay_regime,
        "dim": rec.dim,
        "aborted": error.map(|e| e.to_string()),
    });
    write_json(&dir.join("meta.json"), &meta)
}

/// Runs every repeat and writes its series, snapshots, histograms and metadata.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Status> {
    let obj = cfg.objective()?;
    prepare_outputs(cfg)?;
    let recorder = Recorder::new(cfg.snapshot_steps.clone());
    (0..cfg.repeats).into_par_iter().try_for_each(|r| {
        let dyn_cfg = cfg.dynamics(obj.dim(), r);
        let dir = run_dir(cfg, r);
        match run(&dyn_cfg, &obj, &recorder) {
            Ok(rec) => {
                log::info!("repeat {r}: {} steps in {:.3}s", dyn_cfg.steps, rec.wall_time_s);
                write_run(&dir, cfg, &rec, None)
            }
            Err(aborted) => {
                write_run(&dir, cfg, &aborted.partial, Some(&aborted.error))?;
                Err(aborted.error)
            }
        }
    })?;
    Ok(Status::Ok)
}

/// Per-kernel outcome of one comparison.
#[derive(Debug, Clone, Serialize)]
pub struct KernelTrace {
    pub label: &'static str,
    pub v_t: Vec<f64>,
    /// Fraction of particles whose first coordinate lies in the band.
    pub band: Vec<f64>,
    /// Final mean distance to the minimizer set (NaN without a set).
    pub final_mean_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub seed: u64,
    pub times: Vec<f64>,
    pub traces: Vec<KernelTrace>,
}

/// The three kernel configurations compared, sharing seed and init.
pub fn compare_configs(cfg: &ExperimentConfig, dim: usize, repeat: usize) -> [(&'static str, DynamicsConfig); 3] {
    let base = cfg.dynamics(dim, repeat);
    let adaptive = match base.kernel {
        k @ WeightKernel::AdaptiveProduct { .. } => k,
        _ => cfg.compare.adaptive,
    };
    [
        ("classic", base.classic()),
        (
            "polarized",
            DynamicsConfig {
                kernel: WeightKernel::Polarized {
                    theta: cfg.compare.polarized_theta,
                },
                ..base.clone()
            },
        ),
        (
            "adaptive",
            DynamicsConfig {
                kernel: adaptive,
                ..base
            },
        ),
    ]
}

fn trace(label: &'static str, rec: &RunRecord, obj: &ObjectiveSpec, band: [f64; 2]) -> KernelTrace {
    let d = rec.dim;
    let band_frac = rec
        .snapshots
        .iter()
        .map(|s| {
            let n = s.positions.len() / d;
            let inside = s
                .positions
                .chunks_exact(d)
                .filter(|p| p[0] >= band[0] && p[0] <= band[1])
                .count();
            inside as f64 / n as f64
        })
        .collect();
    let final_mean_distance = obj.minimizers().map_or(f64::NAN, |set| {
        let pts = &rec.final_positions;
        pts.chunks_exact(d).map(|p| set.distance(p)).sum::<f64>() / (pts.len() / d) as f64
    });
    KernelTrace {
        label,
        v_t: rec.series.iter().map(|r| r.v_t).collect(),
        band: band_frac,
        final_mean_distance,
    }
}

/// Runs the classic, polarized and adaptive schemes from the same seed.
pub fn compare(cfg: &ExperimentConfig, obj: &ObjectiveSpec, repeat: usize) -> Result<CompareReport> {
    let configs = compare_configs(cfg, obj.dim(), repeat);
    let recorder = Recorder::new((0..=cfg.dynamics.steps).collect());
    let mut traces = Vec::with_capacity(3);
    let mut times = Vec::new();
    for (label, c) in &configs {
        let rec = run(c, obj, &recorder).map_err(|a| a.error)?;
        times = rec.series.iter().map(|r| r.time).collect();
        traces.push(trace(label, &rec, obj, cfg.compare.band));
    }
    Ok(CompareReport {
        seed: configs[0].1.seed,
        times,
        traces,
    })
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Status> {
    let obj = cfg.objective()?;
    prepare_outputs(cfg)?;
    let reports: Vec<CompareReport> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| compare(cfg, &obj, r))
        .collect::<Result<_>>()?;
    let labels = ["classic", "polarized", "adaptive"];
    let mut header = vec!["step".to_string(), "time".to_string()];
    header.extend(labels.iter().map(|l| format!("V_{l}")));
    header.extend(labels.iter().map(|l| format!("band_{l}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut summary_header = vec!["seed".to_string()];
    summary_header.extend(labels.iter().map(|l| format!("final_V_{l}")));
    summary_header.extend(labels.iter().map(|l| format!("final_band_{l}")));
    summary_header.extend(labels.iter().map(|l| format!("final_mean_dist_{l}")));
    let summary_header: Vec<&str> = summary_header.iter().map(String::as_str).collect();
    let mut summary = Csv::new(&summary_header);
    for (r, rep) in reports.iter().enumerate() {
        let dir = run_dir(cfg, r);
        fs::create_dir_all(&dir)?;
        let mut csv = Csv::new(&header);
        for (k, t) in rep.times.iter().enumerate() {
            let mut row = vec![k.to_string(), fmt_f64(*t)];
            row.extend(rep.traces.iter().map(|tr| fmt_f64(tr.v_t[k])));
            row.extend(rep.traces.iter().map(|tr| fmt_f64(tr.band[k])));
            csv.row(&row);
        }
        csv.write(&dir.join("compare.csv"))?;
        let mut row = vec![rep.seed.to_string()];
        row.extend(rep.traces.iter().map(|tr| fmt_f64(*tr.v_t.last().unwrap_or(&f64::NAN))));
        row.extend(
            rep.traces
                .iter()
                .map(|tr| fmt_f64(*tr.band.last().unwrap_or(&f64::NAN))),
        );
        row.extend(rep.traces.iter().map(|tr| fmt_f64(tr.final_mean_distance)));
        summary.row(&row);
    }
    summary.write(&cfg.outputs.join("compare_summary.csv"))?;
    Ok(Status::Ok)
}

#[derive(Debug, Clone)]
pub struct FpCheckRow {
    pub step: usize,
    pub time: f64,
    pub v_particles: f64,
    pub v_fp: f64,
    pub w1: f64,
}

#[derive(Debug, Clone)]
pub struct FpCheckReport {
    pub rows: Vec<FpCheckRow>,
    pub trajectory: FpTrajectory,
    pub particle_wall_s: f64,
    pub fp_wall_s: f64,
}

/// Runs particles and the grid solver from the same initial law and compares
/// their laws at every `record_every`-th particle step.
pub fn fpcheck(cfg: &ExperimentConfig, obj: &ObjectiveSpec) -> Result<FpCheckReport> {
    if obj.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: obj.dim(),
        });
    }
    let dyn_cfg = cfg.dynamics(1, 0);
    let steps: Vec<usize> = (0..=dyn_cfg.steps).step_by(cfg.fpcheck.record_every).collect();
    let rec = run(&dyn_cfg, obj, &Recorder::new(steps.clone())).map_err(|a| a.error)?;

    let started = Instant::now();
    let fp = &cfg.fpcheck;
    let grid = Grid1D::new(fp.x_min, fp.x_max, fp.cells)?;
    let field = init_density(grid, &dyn_cfg.init)?;
    let op = ConsensusOperator::new(grid, &dyn_cfg.kernel, dyn_cfg.alpha, obj)?;
    let params = FpParams {
        lambda: dyn_cfg.lambda,
        sigma: dyn_cfg.sigma,
        kappa: dyn_cfg.kappa,
    };
    let times: Vec<f64> = steps.iter().map(|&k| k as f64 * dyn_cfg.dt).collect();
    let t_end = dyn_cfg.steps as f64 * dyn_cfg.dt;
    let traj = run_fp(field, &op, &params, t_end, &times, obj.minimizers())?;
    let fp_wall_s = started.elapsed().as_secs_f64();

    let edges = grid.edges();
    let mut rows = Vec::with_capacity(steps.len());
    for ((snap, field), &k) in rec.snapshots.iter().zip(&traj.snapshots).zip(&steps) {
        let mut xs = snap.positions.clone();
        xs.sort_by(f64::total_cmp);
        let lo = edges[0].min(xs[0]);
        let hi = edges[edges.len() - 1].max(xs[xs.len() - 1]);
        // extend the grid so particles outside the domain still count
        let mut g = Vec::with_capacity(edges.len() + 2);
        if lo < edges[0] {
            g.push(lo);
        }
        g.extend_from_slice(&edges);
        if hi > edges[edges.len() - 1] {
            g.push(hi);
        }
        let w1 = wasserstein1_1d(&xs, field.cdf(), &g)?;
        rows.push(FpCheckRow {
            step: k,
            time: times[rows.len()],
            v_particles: rec.series[k].v_t,
            v_fp: obj.minimizers().map_or(f64::NAN, |s| field.v_functional(s)),
            w1,
        });
    }
    Ok(FpCheckReport {
        rows,
        trajectory: traj,
        particle_wall_s: rec.wall_time_s,
        fp_wall_s,
    })
}

pub fn cmd_fpcheck(cfg: &ExperimentConfig) -> Result<Status> {
    let obj = cfg.objective()?;
    prepare_outputs(cfg)?;
    let rep = fpcheck(cfg, &obj)?;
    let mut csv = Csv::new(&["step", "time", "V_particles", "V_fp", "W1"]);
    for r in &rep.rows {
        csv.row(&[
            r.step.to_string(),
            fmt_f64(r.time),
            fmt_f64(r.v_particles),
            fmt_f64(r.v_fp),
            fmt_f64(r.w1),
        ]);
    }
    csv.write(&cfg.outputs.join("fpcheck.csv"))?;
    let mut dens = Csv::new(&["time", "x", "rho"]);
    for f in &rep.trajectory.snapshots {
        for (j, r) in f.rho.iter().enumerate() {
            dens.row(&[fmt_f64(f.time), fmt_f64(f.grid.center(j)), fmt_f64(*r)]);
        }
    }
    dens.write(&cfg.outputs.join("fp_density.csv"))?;
    let t = &rep.trajectory;
    let final_w1 = rep.rows.last().map_or(f64::NAN, |r| r.w1);
    write_json(
        &cfg.outputs.join("meta.json"),
        &json!({
            "resolved_config": cfg,
            "fp_steps": t.steps,
            "clipped_total": t.clipped_total,
            "max_mass_defect": t.max_mass_defect,
            "max_boundary_mass": t.max_boundary_mass,
            "unreliable": t.unreliable,
            "boundary_flag": t.boundary_flag,
            "final_w1": final_w1,
            "particle_wall_s": rep.particle_wall_s,
            "fp_wall_s": rep.fp_wall_s,
        }),
    )?;
    match cfg.fpcheck.w1_max {
        Some(max) if !(final_w1 <= max) => {
            log::error!("final W1 = {final_w1} exceeds {max}");
            Ok(Status::CheckFailed)
        }
        _ => Ok(Status::Ok),
    }
}

/// A random instance: quadratic `g` around `v*` and Gaussian samples.
#[derive(Debug, Clone)]
pub struct LaplaceInstance {
    pub samples: Vec<(Point, f64)>,
    pub v_star: Point,
    pub curvature: f64,
    pub offset: f64,
    pub alpha: f64,
    pub r: f64,
    pub q: f64,
    pub eta: f64,
    pub nu: f64,
    pub beta: f64,
}

impl LaplaceInstance {
    pub fn g(&self) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
        move |x: &[f64]| self.curvature * crate::dist_sq(x, &self.v_star) + self.offset
    }

    pub fn check(&self) -> Result<LaplaceReport> {
        let g = self.g();
        laplace_bound_check(&LaplaceCheckInput {
            samples: &self.samples,
            g: &g,
            v_star: self.v_star.clone(),
            alpha: self.alpha,
            r: self.r,
            q: self.q,
            eta: self.eta,
            nu: self.nu,
            beta: self.beta,
            far_field: None,
        })
    }
}

/// Draws instance `index` of a reproducible family. The growth condition
/// holds by construction (`eta^2 <= curvature`, `nu = 1/2`), and `v*` is one
/// of the samples.
pub fn laplace_instance(seed: u64, index: usize, dim: usize, n_samples: usize) -> LaplaceInstance {
    let mut rng = StreamKey::new(seed).stream(Purpose::Sampling, index as u64, 0);
    let v_star: Point = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let curvature: f64 = rng.random_range(0.5..2.0);
    let eta = curvature.sqrt() * rng.random_range(0.5..1.0);
    let beta = rng.random_range(0.0..0.5);
    let q = beta + rng.random_range(0.01..1.0);
    let alpha = rng.random_range(1.0..50.0);
    let r = rng.random_range(0.2..1.0);
    let spread = rng.random_range(0.3..1.5);
    let shift: Point = (0..dim).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    let offset = rng.random_range(-1.0..1.0);
    let w = 1.0 / n_samples as f64;
    let mut samples = Vec::with_capacity(n_samples);
    samples.push((v_star.clone(), w));
    for _ in 1..n_samples {
        let p: Point = v_star
            .iter()
            .zip(&shift)
            .map(|(c, s)| c + s + spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        samples.push((p, w));
    }
    LaplaceInstance {
        samples,
        v_star,
        curvature,
        offset,
        alpha,
        r,
        q,
        eta,
        nu: 0.5,
        beta,
    }
}

pub fn cmd_laplace(cfg: &ExperimentConfig) -> Result<Status> {
    prepare_outputs(cfg)?;
    let l = &cfg.laplace;
    let reports: Vec<LaplaceReport> = (0..l.instances)
        .into_par_iter()
        .map(|i| laplace_instance(cfg.dynamics.seed, i, l.dim, l.samples).check())
        .collect::<Result<_>>()?;
    let mut csv = Csv::new(&["instance", "lhs", "rhs", "slack", "pass"]);
    let mut failures = 0;
    for (i, r) in reports.iter().enumerate() {
        let verdict = match r.pass {
            Some(true) => "pass",
            Some(false) => {
                failures += 1;
                "fail"
            }
            None => "vacuous",
        };
        csv.row(&[
            i.to_string(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.slack),
            verdict.into(),
        ]);
    }
    csv.write(&cfg.outputs.join("laplace.csv"))?;
    let passed = reports.iter().filter(|r| r.pass == Some(true)).count();
    println!("{passed}/{} pass", reports.len());
    Ok(if failures == 0 { Status::Ok } else { Status::CheckFailed })
}

/// Final concentration values across seeds for each particle count.
pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<Status> {
    let obj = cfg.objective()?;
    if let Some(crate::dynamics::InitSpec::Explicit(_)) = cfg.dynamics.init {
        return Err(Error::Config(
            "bench varies the particle count and needs a random init".into(),
        ));
    }
    prepare_outputs(cfg)?;
    let mut csv = Csv::new(&[
        "n",
        "seeds",
        "mean_final",
        "sd_final",
        "min_final",
        "max_final",
        "mean_wall_s",
    ]);
    for &n in &cfg.bench.n_values {
        let finals: Vec<(f64, f64)> = (0..cfg.bench.seeds)
            .into_par_iter()
            .map(|s| {
                let c = DynamicsConfig {
                    n_particles: n,
                    ..cfg.dynamics(obj.dim(), s)
                };
                let rec = run(&c, &obj, &Recorder::default()).map_err(|a| a.error)?;
                let last = rec.series.last().expect("series has step 0");
                let value = if last.v_t.is_nan() {
                    last.mean_f - obj.f_min
                } else {
                    last.v_t
                };
                Ok((value, rec.wall_time_s))
            })
            .collect::<Result<_>>()?;
        let k = finals.len() as f64;
        let mean = finals.iter().map(|f| f.0).sum::<f64>() / k;
        let sd = if finals.len() > 1 {
            (finals.iter().map(|f| (f.0 - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let min = finals.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
        let max = finals.iter().map(|f| f.0).fold(f64::NEG_INFINITY, f64::max);
        let wall = finals.iter().map(|f| f.1).sum::<f64>() / k;
        csv.row(&[
            n.to_string(),
            finals.len().to_string(),
            fmt_f64(mean),
            fmt_f64(sd),
            fmt_f64(min),
            fmt_f64(max),
            fmt_f64(wall),
        ]);
    }
    csv.write(&cfg.outputs.join("bench.csv"))?;
    Ok(Status::Ok)
}
