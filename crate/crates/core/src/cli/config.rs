//! Strict JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::consensus::WeightKernel;
use crate::dynamics::{DynamicsConfig, InitSpec};
use crate::objectives::{make_builtin, MinimizerSet, ObjectiveSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Run,
    Compare,
    Fpcheck,
    Laplace,
    Bench,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub name: String,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

/// Dynamics parameters; everything but the objective has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub dt: f64,
    pub steps: usize,
    pub n_particles: usize,
    pub kernel: WeightKernel,
    /// Standard normal around the origin when absent.
    pub init: Option<InitSpec>,
    pub seed: u64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            sigma: 0.2,
            alpha: 10.0,
            kappa: 0.0,
            dt: 0.1,
            steps: 100,
            n_particles: 100,
            kernel: WeightKernel::AdaptiveProduct {
                kappa_scale: 0.05,
                theta: 1.0,
            },
            init: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Interval whose occupancy is reported per kernel (first coordinate).
    pub band: [f64; 2],
    pub polarized_theta: f64,
    /// Adaptive kernel used when `dynamics.kernel` is not adaptive.
    pub adaptive: WeightKernel,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            band: [-1.5, 1.5],
            polarized_theta: 1.0,
            adaptive: WeightKernel::AdaptiveProduct {
                kappa_scale: 0.05,
                theta: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpSection {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    /// Compare particles and grid every this many particle steps.
    pub record_every: usize,
    /// Exit with a check failure when the final W1 exceeds this.
    pub w1_max: Option<f64>,
}

impl Default for FpSection {
    fn default() -> Self {
        Self {
            x_min: -6.0,
            x_max: 6.0,
            cells: 800,
            record_every: 1,
            w1_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaplaceSection {
    pub instances: usize,
    pub samples: usize,
    pub dim: usize,
}

impl Default for LaplaceSection {
    fn default() -> Self {
        Self {
            instances: 100,
            samples: 1000,
            dim: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub n_values: Vec<usize>,
    pub seeds: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            n_values: vec![50, 200, 800],
            seeds: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    /// Attached to the objective, replacing any built-in set.
    #[serde(default)]
    pub minimizer_set: Option<MinimizerSet>,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    #[serde(default)]
    pub snapshot_steps: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_stride")]
    pub seed_stride: u64,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub fpcheck: FpSection,
    #[serde(default)]
    pub laplace: LaplaceSection,
    #[serde(default)]
    pub bench: BenchSection,
}

fn default_mode() -> Mode {
    Mode::Run
}

fn default_outputs() -> PathBuf {
    PathBuf::from("polycbo-out")
}

fn default_repeats() -> usize {
    1
}

fn default_stride() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn objective(&self) -> Result<ObjectiveSpec> {
        let obj = make_builtin(&self.objective.name, &self.objective.params)?;
        match &self.minimizer_set {
            Some(set) => obj.with_minimizers(set.clone()),
            None => Ok(obj),
        }
    }

    /// Dynamics for repeat `r`.
    pub fn dynamics(&self, dim: usize, repeat: usize) -> DynamicsConfig {
        let d = &self.dynamics;
        DynamicsConfig {
            lambda: d.lambda,
            sigma: d.sigma,
            alpha: d.alpha,
            kappa: d.kappa,
            dt: d.dt,
            steps: d.steps,
            n_particles: d.n_particles,
            kernel: d.kernel,
            init: d.init.clone().unwrap_or_else(|| InitSpec::GaussianIid {
                mean: vec![0.0; dim],
                variance: 1.0,
            }),
            seed: d.seed.wrapping_add(self.seed_stride.wrapping_mul(repeat as u64)),
        }
    }

    /// Fills defaults that depend on the objective and validates the whole
    /// configuration.
    pub fn resolve(mut self) -> Result<Self> {
        let obj = self.objective()?;
        let dim = obj.dim();
        if self.dynamics.init.is_none() {
            self.dynamics.init = Some(self.dynamics(dim, 0).init);
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats", "must be >= 1"));
        }
        if let Some(&bad) = self.snapshot_steps.iter().find(|&&s| s > self.dynamics.steps) {
            return Err(Error::invalid(
                "snapshot_steps",
                format!("step {bad} exceeds steps = {}", self.dynamics.steps),
            ));
        }
        self.dynamics(dim, 0).validate(dim)?;
        if let WeightKernel::AdaptiveProduct { .. } = self.dynamics.kernel {
            self.dynamics.kernel.check_against(&obj);
        }
        if !(self.compare.band[0] <= self.compare.band[1]) {
            return Err(Error::invalid("compare.band", "lower end exceeds upper end"));
        }
        if !(self.compare.polarized_theta > 0.0) {
            return Err(Error::invalid("compare.polarized_theta", "must be > 0"));
        }
        if self.fpcheck.record_every == 0 {
            return Err(Error::invalid("fpcheck.record_every", "must be >= 1"));
        }
        if self.laplace.dim == 0 || self.laplace.samples == 0 {
            return Err(Error::invalid("laplace", "dim and samples must be >= 1"));
        }
        if self.bench.n_values.contains(&0) || self.bench.seeds == 0 {
            return Err(Error::invalid("bench", "n_values and seeds must be >= 1"));
        }
        Ok(self)
    }
}

/// Parses a configuration document.
///
/// Accepts either a bare configuration or a `meta.json` written by a
/// previous run, whose `resolved_config` entry is used.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("parse error at line {}, column {}: {e}", e.line(), e.column())))?;
    let doc = match doc {
        Value::Object(mut map) if map.contains_key("resolved_config") => {
            map.remove("resolved_config").unwrap_or_default()
        }
        other => other,
    };
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        Error::Config(describe(&path, &inner))
    })?;
    cfg.resolve()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Rewrites serde's unknown-field/variant messages with a spelling hint.
fn describe(path: &str, inner: &str) -> String {
    let ticks: Vec<&str> = inner.split('`').skip(1).step_by(2).collect();
    let location = if path.is_empty() || path == "." {
        String::new()
    } else {
        format!(" at `{path}`")
    };
    if (inner.starts_with("unknown field") || inner.starts_with("unknown variant")) && !ticks.is_empty() {
        let hint = crate::did_you_mean(ticks[0], ticks[1..].iter().copied())
            .map(|s| format!("; did you mean `{s}`?"))
            .unwrap_or_default();
        return format!("{inner}{location}{hint}");
    }
    format!("{inner}{location}")
}
