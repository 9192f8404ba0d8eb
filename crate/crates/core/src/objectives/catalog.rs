//! Built-in objectives addressable by name.

use serde::Deserialize;
use serde_json::Value;

use super::{ConvexComponent, MinimizerSet, ObjectiveSpec};
use crate::{Error, Result};

pub const CATALOG: &[&str] = &["quadratic", "symmetric_double_well", "paper_plateau", "multi_well"];

// `deny_unknown_fields` does not compose with `flatten`; `parse` checks the
// key set instead.
#[derive(Debug, Default, Deserialize)]
struct Declared {
    ell: Option<f64>,
    p: Option<f64>,
    lipschitz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct QuadraticParams {
    dim: Option<usize>,
    center: Option<Vec<f64>>,
    #[serde(flatten)]
    declared: Declared,
}

#[derive(Debug, Default, Deserialize)]
struct MultiWellParams {
    components: Vec<ConvexComponent>,
    #[serde(flatten)]
    declared: Declared,
}

fn parse<T: for<'de> Deserialize<'de> + Default>(name: &str, params: &Value, keys: &[&str]) -> Result<T> {
    match params {
        Value::Null => Ok(T::default()),
        Value::Object(map) => {
            if let Some(bad) = map.keys().find(|k| !keys.contains(&k.as_str())) {
                let hint = crate::did_you_mean(bad, keys.iter().copied())
                    .map(|s| format!(" (did you mean `{s}`?)"))
                    .unwrap_or_default();
                return Err(Error::Config(format!(
                    "unknown parameter `{bad}` for objective `{name}`{hint}; expected one of: {}",
                    keys.join(", ")
                )));
            }
            serde_json::from_value(params.clone()).map_err(|e| Error::Config(format!("objective `{name}`: {e}")))
        }
        _ => Err(Error::Config(format!("objective `{name}`: params must be an object"))),
    }
}

fn apply(spec: ObjectiveSpec, d: Declared, ell: f64, p: f64, lipschitz: f64) -> Result<ObjectiveSpec> {
    spec.with_growth(d.ell.unwrap_or(ell), d.p.unwrap_or(p))?
        .with_lipschitz(d.lipschitz.unwrap_or(lipschitz))
}

/// Builds a catalog objective from its name and JSON parameters.
///
/// - `quadratic`: `|v - center|^2`; params `dim`, `center`.
/// - `symmetric_double_well`: 1D, `(v-1)^2` for `v >= 0` and `(v+1)^2` for
///   `v <= 0`; minimizers `{-1, 1}`.
/// - `paper_plateau`: 1D, `w^2` up to 1, then `min{1, (w-10)^2 - 1}` up to 10,
///   then `(w-10)^2 - 1`; unique minimizer 10.
/// - `multi_well`: `ell * dist(v, V*)^p` for a configurable minimizer set
///   (`components`).
///
/// Every objective also accepts `ell`, `p` and `lipschitz` overrides of its
/// declared constants.
pub fn make_builtin(name: &str, params: &Value) -> Result<ObjectiveSpec> {
    match name {
        "quadratic" => {
            let prm: QuadraticParams = parse(name, params, &["dim", "center", "ell", "p", "lipschitz"])?;
            let dim = match (&prm.center, prm.dim) {
                (Some(c), Some(d)) if c.len() != d => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: c.len(),
                    })
                }
                (Some(c), _) => c.len(),
                (None, Some(d)) => d,
                (None, None) => 1,
            };
            let center = prm.center.unwrap_or_else(|| vec![0.0; dim]);
            let c2: f64 = center.iter().map(|x| x * x).sum();
            let c = center.clone();
            let spec = ObjectiveSpec::new(name, dim, 0.0, move |v| {
                v.iter().zip(&c).map(|(x, y)| (x - y) * (x - y)).sum()
            })?;
            let set = MinimizerSet::new(vec![ConvexComponent::singleton(center)?])?;
            apply(spec, prm.declared, 1.0, 2.0, 1.0 + c2)?.with_minimizers(set)
        }
        "symmetric_double_well" => {
            let d: Declared = parse(name, params, &["ell", "p", "lipschitz"])?;
            let spec = ObjectiveSpec::new(name, 1, 0.0, |v| {
                let x = v[0];
                if x >= 0.0 {
                    (x - 1.0) * (x - 1.0)
                } else {
                    (x + 1.0) * (x + 1.0)
                }
            })?;
            let set = MinimizerSet::new(vec![
                ConvexComponent::singleton(vec![-1.0])?,
                ConvexComponent::singleton(vec![1.0])?,
            ])?;
            apply(spec, d, 1.0, 2.0, 2.0)?.with_minimizers(set)
        }
        "paper_plateau" => {
            let d: Declared = parse(name, params, &["ell", "p", "lipschitz"])?;
            let spec = ObjectiveSpec::new(name, 1, -1.0, |v| paper_plateau(v[0]))?;
            let set = MinimizerSet::new(vec![ConvexComponent::singleton(vec![10.0])?])?;
            // (w^2 + 1) / (w - 10)^2 is smallest (~0.0099) at w = -0.1
            apply(spec, d, 0.0099, 2.0, 25.0)?.with_minimizers(set)
        }
        "multi_well" => {
            let prm: MultiWellParams = parse(name, params, &["components", "ell", "p", "lipschitz"])?;
            let set = MinimizerSet::new(prm.components)?;
            multi_well(
                set,
                prm.declared.ell.unwrap_or(1.0),
                prm.declared.p.unwrap_or(2.0),
                prm.declared.lipschitz,
            )
        }
        _ => Err(Error::UnknownObjective {
            name: name.to_string(),
            available: CATALOG.join(", "),
        }),
    }
}

/// `ell * dist(v, set)^p`, which meets the lower growth bound with equality.
pub fn multi_well(set: MinimizerSet, ell: f64, p: f64, lipschitz: Option<f64>) -> Result<ObjectiveSpec> {
    let a0 = set
        .anchors()
        .iter()
        .map(|a| crate::norm(a))
        .fold(f64::INFINITY, f64::min);
    let default_l = ell * (2.0 + a0 * a0).max(2.0 * (1.0 + a0));
    let geometry = set.clone();
    let spec = ObjectiveSpec::new("multi_well", set.dim(), 0.0, move |v| {
        let d = geometry.distance(v);
        if p == 2.0 {
            ell * d * d
        } else {
            ell * d.powf(p)
        }
    })?;
    spec.with_growth(ell, p)?
        .with_lipschitz(lipschitz.unwrap_or(default_l))?
        .with_minimizers(set)
}

pub(crate) fn paper_plateau(w: f64) -> f64 {
    if w <= 1.0 {
        w * w
    } else if w <= 10.0 {
        ((w - 10.0) * (w - 10.0) - 1.0).min(1.0)
    } else {
        (w - 10.0) * (w - 10.0) - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn catalog_examples() {
        let pp = make_builtin("paper_plateau", &json!({})).unwrap();
        assert_eq!(pp.evaluate(&[1.0]).unwrap(), 1.0);
        assert_eq!(pp.evaluate(&[5.0]).unwrap(), 1.0);
        assert_eq!(pp.evaluate(&[0.5]).unwrap(), 0.25);
        assert_eq!(pp.evaluate(&[12.0]).unwrap(), 3.0);
        let dw = make_builtin("symmetric_double_well", &Value::Null).unwrap();
        assert_eq!(dw.evaluate(&[-1.0]).unwrap(), 0.0);
        let mw = make_builtin(
            "multi_well",
            &json!({"components": [
                {"ball": {"center": [-2.0, 0.0], "radius": 1.0}},
                {"ball": {"center": [2.0, 0.0], "radius": 1.0}}
            ]}),
        )
        .unwrap();
        assert_eq!(mw.evaluate(&[2.0, 0.0]).unwrap(), 0.0);
        assert_eq!(mw.evaluate(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(mw.minimizers().unwrap().len(), 2);
    }

    #[test]
    fn unknown_name_lists_catalog() {
        let err = make_builtin("rosenbrock", &json!({})).unwrap_err().to_string();
        for name in CATALOG {
            assert!(err.contains(name), "{err}");
        }
    }

    #[test]
    fn unknown_params_rejected() {
        let err = make_builtin("quadratic", &json!({"centre": [0.0]})).unwrap_err();
        assert!(err.to_string().contains("centre"));
        assert!(make_builtin("quadratic", &json!({"dim": 2, "center": [1.0]})).is_err());
    }

    #[test]
    fn overrides_apply() {
        let pp = make_builtin("paper_plateau", &json!({"ell": 1.0, "p": 2.0, "lipschitz": 3.0})).unwrap();
        assert_eq!((pp.ell, pp.p, pp.lipschitz), (1.0, 2.0, 3.0));
        let q = make_builtin("quadratic", &json!({"center": [3.0, 4.0]})).unwrap();
        assert_eq!(q.dim(), 2);
        assert_eq!(q.lipschitz, 26.0);
        assert_eq!(q.evaluate(&[3.0, 4.0]).unwrap(), 0.0);
    }
}
