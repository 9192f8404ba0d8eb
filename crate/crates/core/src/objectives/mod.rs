//! Objective functions, the geometry of their minimizer sets and sample-based
//! checks of the growth and regularity hypotheses.

mod assumptions;
mod catalog;
mod geometry;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use assumptions::{check_assumption_lower, check_assumption_upper, LowerReport, UpperReport};
pub use catalog::{make_builtin, multi_well, CATALOG};
pub use geometry::{ConvexComponent, MinimizerSet, Nearest};

use crate::{Error, Result};

pub type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// An objective on R^d together with its declared regularity constants.
///
/// `ell` and `p` are the lower-growth constants (`f - f_min >= ell * dist^p`),
/// `lipschitz` is the constant `L` of the quadratic upper growth and local
/// Lipschitz bound.
#[derive(Clone)]
pub struct ObjectiveSpec {
    name: String,
    dim: usize,
    eval: ObjectiveFn,
    pub f_min: f64,
    pub ell: f64,
    pub p: f64,
    pub lipschitz: f64,
    minimizers: Option<MinimizerSet>,
    evals: Arc<AtomicU64>,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("f_min", &self.f_min)
            .field("ell", &self.ell)
            .field("p", &self.p)
            .field("lipschitz", &self.lipschitz)
            .field("minimizers", &self.minimizers)
            .finish()
    }
}

impl ObjectiveSpec {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        f_min: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if !f_min.is_finite() {
            return Err(Error::invalid("f_min", "must be finite"));
        }
        Ok(Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            f_min,
            ell: 1.0,
            p: 2.0,
            lipschitz: 1.0,
            minimizers: None,
            evals: Arc::new(AtomicU64::new(0)),
        })
    }

    /// Declares the lower-growth constants.
    pub fn with_growth(mut self, ell: f64, p: f64) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::invalid("ell", format!("must be > 0, got {ell}")));
        }
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::invalid("p", format!("must lie in [1, 2], got {p}")));
        }
        self.ell = ell;
        self.p = p;
        Ok(self)
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::invalid("L", format!("must be > 0, got {lipschitz}")));
        }
        self.lipschitz = lipschitz;
        Ok(self)
    }

    /// Attaches the minimizer set; every component anchor must attain `f_min`.
    pub fn with_minimizers(mut self, set: MinimizerSet) -> Result<Self> {
        if set.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: set.dim(),
            });
        }
        for a in set.anchors() {
            let v = (self.eval)(&a);
            if (v - self.f_min).abs() > 1e-12 {
                return Err(Error::invalid(
                    "minimizers",
                    format!("f({a:?}) = {v} differs from f_min = {}", self.f_min),
                ));
            }
        }
        self.minimizers = Some(set);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn minimizers(&self) -> Option<&MinimizerSet> {
        self.minimizers.as_ref()
    }

    /// Number of evaluations made through [`ObjectiveSpec::evaluate`] on this
    /// objective and its clones.
    pub fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Evaluates `f(v)`, checking the result is finite and not below `f_min`.
    pub fn evaluate(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        self.evals.fetch_add(1, Ordering::Relaxed);
        let value = (self.eval)(v);
        if !value.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteObjective {
                point: v.to_vec(),
                value,
            });
        }
        if value < self.f_min - 1e-12 * self.f_min.abs().max(1.0) {
            return Err(Error::BelowDeclaredMinimum {
                name: self.name.clone(),
                point: v.to_vec(),
                value,
                f_min: self.f_min,
            });
        }
        Ok(value)
    }
}
