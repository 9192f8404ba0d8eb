//! Convex minimizer components and their finite unions.

use serde::{Deserialize, Serialize};

use crate::{dist, Error, Point, Result};

/// A convex compact piece of the minimizer set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexComponent {
    Singleton(Point),
    Ball { center: Point, radius: f64 },
    Box { lower: Point, upper: Point },
}

impl ConvexComponent {
    pub fn singleton(point: impl Into<Point>) -> Result<Self> {
        let c = ConvexComponent::Singleton(point.into());
        c.validate()?;
        Ok(c)
    }

    pub fn ball(center: impl Into<Point>, radius: f64) -> Result<Self> {
        let c = ConvexComponent::Ball {
            center: center.into(),
            radius,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn aabb(lower: impl Into<Point>, upper: impl Into<Point>) -> Result<Self> {
        let c = ConvexComponent::Box {
            lower: lower.into(),
            upper: upper.into(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |p: &[f64]| p.iter().all(|x| x.is_finite());
        match self {
            ConvexComponent::Singleton(p) => {
                if p.is_empty() || !finite(p) {
                    return Err(Error::invalid("singleton", "point must be finite and non-empty"));
                }
            }
            ConvexComponent::Ball { center, radius } => {
                if center.is_empty() || !finite(center) {
                    return Err(Error::invalid("ball", "center must be finite and non-empty"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("ball", format!("radius must be > 0, got {radius}")));
                }
            }
            ConvexComponent::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::invalid("box", "lower/upper must have equal, non-zero length"));
                }
                if !finite(lower) || !finite(upper) {
                    return Err(Error::invalid("box", "bounds must be finite"));
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(Error::invalid("box", "lower must not exceed upper"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexComponent::Singleton(p) => p.len(),
            ConvexComponent::Ball { center, .. } => center.len(),
            ConvexComponent::Box { lower, .. } => lower.len(),
        }
    }

    /// A representative point of the component: the point, the ball center or
    /// the box center.
    pub fn anchor(&self) -> Point {
        match self {
            ConvexComponent::Singleton(p) => p.clone(),
            ConvexComponent::Ball { center, .. } => center.clone(),
            ConvexComponent::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
        }
    }

    /// Exact Euclidean projection of `v` onto the component.
    pub fn project(&self, v: &[f64]) -> Point {
        match self {
            ConvexComponent::Singleton(p) => p.clone(),
            ConvexComponent::Ball { center, radius } => {
                let r = dist(v, center);
                // points within rounding of the sphere count as inside, which
                // makes projection exactly idempotent
                if r <= *radius * (1.0 + 8.0 * f64::EPSILON) {
                    v.to_vec()
                } else {
                    let s = radius / r;
                    center.iter().zip(v).map(|(c, x)| c + s * (x - c)).collect()
                }
            }
            ConvexComponent::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| x.clamp(*l, *u))
                .collect(),
        }
    }

    /// Axis-aligned bounding box as `(lower, upper)`.
    pub fn bounds(&self) -> (Point, Point) {
        match self {
            ConvexComponent::Singleton(p) => (p.clone(), p.clone()),
            ConvexComponent::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            ConvexComponent::Box { lower, upper } => (lower.clone(), upper.clone()),
        }
    }

    /// Largest distance from `p` to a point of the component.
    fn farthest_from(&self, p: &[f64]) -> f64 {
        match self {
            ConvexComponent::Singleton(q) => dist(p, q),
            ConvexComponent::Ball { center, radius } => dist(p, center) + radius,
            ConvexComponent::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| {
                    let d = (x - l).abs().max((x - u).abs());
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// `sup { |a - b| : a in self, b in other }`, in closed form.
    pub fn max_distance(&self, other: &ConvexComponent) -> f64 {
        use ConvexComponent::*;
        match (self, other) {
            (Singleton(p), o) | (o, Singleton(p)) => o.farthest_from(p),
            (Ball { center, radius }, o) | (o, Ball { center, radius }) => o.farthest_from(center) + radius,
            (Box { lower: l1, upper: u1 }, Box { lower: l2, upper: u2 }) => (0..l1.len())
                .map(|k| {
                    let d = (u1[k] - l2[k]).max(u2[k] - l1[k]);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Ordered union of convex components, the set of global minimizers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizerSet {
    components: Vec<ConvexComponent>,
    #[serde(skip)]
    diameter: f64,
}

impl<'de> Deserialize<'de> for MinimizerSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            components: Vec<ConvexComponent>,
        }
        let raw = Raw::deserialize(d)?;
        MinimizerSet::new(raw.components).map_err(serde::de::Error::custom)
    }
}

/// Result of a nearest-minimizer query.
#[derive(Debug, Clone, PartialEq)]
pub struct Nearest {
    pub point: Point,
    pub component: usize,
    pub distance: f64,
}

impl MinimizerSet {
    pub fn new(components: Vec<ConvexComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("minimizer_set", "needs at least one component"));
        }
        let d = components[0].dim();
        for c in &components {
            c.validate()?;
            if c.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: c.dim(),
                });
            }
        }
        let mut diameter: f64 = 0.0;
        for (i, a) in components.iter().enumerate() {
            for b in &components[i..] {
                diameter = diameter.max(a.max_distance(b));
            }
        }
        Ok(Self { components, diameter })
    }

    pub fn components(&self) -> &[ConvexComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// `V*(v)`: projection onto the closest component. Ties go to the lowest
    /// component index.
    pub fn nearest(&self, v: &[f64]) -> Nearest {
        let mut best: Option<Nearest> = None;
        for (i, c) in self.components.iter().enumerate() {
            let p = c.project(v);
            let d = dist(v, &p);
            let better = match &best {
                None => true,
                Some(b) => d < b.distance,
            };
            if better {
                best = Some(Nearest {
                    point: p,
                    component: i,
                    distance: d,
                });
            }
        }
        best.expect("minimizer set is non-empty")
    }

    /// `dist(v, V*)`.
    pub fn distance(&self, v: &[f64]) -> f64 {
        self.nearest(v).distance
    }

    pub fn anchors(&self) -> Vec<Point> {
        self.components.iter().map(|c| c.anchor()).collect()
    }

    /// Bounding box of the whole set.
    pub fn bounds(&self) -> (Point, Point) {
        let (mut lo, mut hi) = self.components[0].bounds();
        for c in &self.components[1..] {
            let (l, h) = c.bounds();
            for k in 0..lo.len() {
                lo[k] = lo[k].min(l[k]);
                hi[k] = hi[k].max(h[k]);
            }
        }
        (lo, hi)
    }

    /// The same set shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        let shift = |p: &[f64]| -> Point { p.iter().zip(offset).map(|(x, o)| x + o).collect() };
        let comps = self
            .components
            .iter()
            .map(|c| match c {
                ConvexComponent::Singleton(p) => ConvexComponent::Singleton(shift(p)),
                ConvexComponent::Ball { center, radius } => ConvexComponent::Ball {
                    center: shift(center),
                    radius: *radius,
                },
                ConvexComponent::Box { lower, upper } => ConvexComponent::Box {
                    lower: shift(lower),
                    upper: shift(upper),
                },
            })
            .collect();
        MinimizerSet::new(comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_points() -> MinimizerSet {
        MinimizerSet::new(vec![
            ConvexComponent::singleton(vec![-1.0]).unwrap(),
            ConvexComponent::singleton(vec![1.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn projections() {
        let ball = ConvexComponent::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(ball.project(&[3.0, 0.0]), vec![1.0, 0.0]);
        let b = ConvexComponent::aabb(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(b.project(&[2.0, 0.5]), vec![1.0, 0.5]);
        let s = ConvexComponent::singleton(vec![5.0]).unwrap();
        assert_eq!(s.project(&[0.0]), vec![5.0]);
    }

    #[test]
    fn invalid_components() {
        assert!(ConvexComponent::ball(vec![0.0], 0.0).is_err());
        assert!(ConvexComponent::ball(vec![f64::NAN], 1.0).is_err());
        assert!(ConvexComponent::aabb(vec![1.0], vec![0.0]).is_err());
        assert!(MinimizerSet::new(vec![]).is_err());
        assert!(MinimizerSet::new(vec![
            ConvexComponent::singleton(vec![0.0]).unwrap(),
            ConvexComponent::singleton(vec![0.0, 1.0]).unwrap(),
        ])
        .is_err());
    }

    #[test]
    fn nearest_and_ties() {
        let set = two_points();
        let n = set.nearest(&[0.25]);
        assert_eq!((n.point, n.component), (vec![1.0], 1));
        let n = set.nearest(&[0.0]);
        assert_eq!((n.point, n.component), (vec![-1.0], 0));

        let set = MinimizerSet::new(vec![
            ConvexComponent::ball(vec![0.0, 0.0], 1.0).unwrap(),
            ConvexComponent::singleton(vec![4.0, 0.0]).unwrap(),
        ])
        .unwrap();
        let v = [2.5, 0.0];
        // both components sit at distance 1.5
        assert_eq!(dist(&v, &[1.0, 0.0]), 1.5);
        assert_eq!(dist(&v, &[4.0, 0.0]), 1.5);
        let n = set.nearest(&v);
        assert_eq!((n.point, n.component, n.distance), (vec![1.0, 0.0], 0, 1.5));
    }

    #[test]
    fn distances() {
        let set = two_points();
        assert_eq!(set.distance(&[3.0]), 2.0);
        assert_eq!(set.distance(&[1.0]), 0.0);
        let ball = MinimizerSet::new(vec![ConvexComponent::ball(vec![0.0; 3], 1.0).unwrap()]).unwrap();
        assert_eq!(ball.distance(&[0.0, 0.0, 5.0]), 4.0);
        assert_eq!(ball.distance(&[0.1, 0.2, 0.3]), 0.0);
    }

    #[test]
    fn diameters() {
        assert_eq!(two_points().diameter(), 2.0);
        let balls = MinimizerSet::new(vec![
            ConvexComponent::ball(vec![-2.0, 0.0], 1.0).unwrap(),
            ConvexComponent::ball(vec![2.0, 0.0], 1.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(balls.diameter(), 6.0);
        let boxes = MinimizerSet::new(vec![
            ConvexComponent::aabb(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            ConvexComponent::aabb(vec![3.0, 0.0], vec![4.0, 2.0]).unwrap(),
        ])
        .unwrap();
        // farthest corners (0,0)-(4,2) vs (0,1)-(4,0): sqrt(16+4)
        assert!((boxes.diameter() - 20f64.sqrt()).abs() < 1e-15);
        let single_box =
            MinimizerSet::new(vec![ConvexComponent::aabb(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap()]).unwrap();
        assert_eq!(single_box.diameter(), 5.0);
        let mixed = MinimizerSet::new(vec![
            ConvexComponent::singleton(vec![0.0, 0.0]).unwrap(),
            ConvexComponent::ball(vec![3.0, 4.0], 1.0).unwrap(),
            ConvexComponent::aabb(vec![-1.0, -1.0], vec![0.0, 0.0]).unwrap(),
        ])
        .unwrap();
        // ball vs box corner (-1,-1): sqrt(16+25) + 1
        assert!((mixed.diameter() - (41f64.sqrt() + 1.0)).abs() < 1e-14);
    }

    /// Brute-force diameter from dense boundary samples never exceeds the
    /// closed form and gets close to it.
    #[test]
    fn diameter_against_sampling() {
        let set = MinimizerSet::new(vec![
            ConvexComponent::ball(vec![0.0, 0.0], 0.5).unwrap(),
            ConvexComponent::aabb(vec![2.0, -1.0], vec![3.0, 0.5]).unwrap(),
        ])
        .unwrap();
        let mut pts = Vec::new();
        for k in 0..720 {
            let t = k as f64 * std::f64::consts::PI / 360.0;
            pts.push(vec![0.5 * t.cos(), 0.5 * t.sin()]);
        }
        for &x in &[2.0, 3.0] {
            for &y in &[-1.0, 0.5] {
                pts.push(vec![x, y]);
            }
        }
        let mut best: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                best = best.max(dist(a, b));
            }
        }
        assert!(best <= set.diameter() + 1e-12);
        assert!(set.diameter() - best < 1e-4);
    }

    fn component_strategy() -> impl Strategy<Value = ConvexComponent> {
        prop_oneof![
            prop::collection::vec(-5.0..5.0f64, 2).prop_map(ConvexComponent::Singleton),
            (prop::collection::vec(-5.0..5.0f64, 2), 0.1..3.0f64)
                .prop_map(|(center, radius)| ConvexComponent::Ball { center, radius }),
            (
                prop::collection::vec(-5.0..5.0f64, 2),
                prop::collection::vec(0.0..3.0f64, 2)
            )
                .prop_map(|(lower, ext)| {
                    let upper = lower.iter().zip(&ext).map(|(l, e)| l + e).collect();
                    ConvexComponent::Box { lower, upper }
                }),
        ]
    }

    proptest! {
        #[test]
        fn projection_idempotent(c in component_strategy(), v in prop::collection::vec(-20.0..20.0f64, 2)) {
            let p = c.project(&v);
            prop_assert_eq!(c.project(&p), p);
        }

        #[test]
        fn projection_contracts(c in component_strategy(),
                                u in prop::collection::vec(-20.0..20.0f64, 2),
                                w in prop::collection::vec(-20.0..20.0f64, 2)) {
            let d = dist(&c.project(&u), &c.project(&w));
            prop_assert!(d <= dist(&u, &w) * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn distance_bounded_by_anchors(cs in prop::collection::vec(component_strategy(), 1..4),
                                       v in prop::collection::vec(-20.0..20.0f64, 2)) {
            let set = MinimizerSet::new(cs).unwrap();
            let d = set.distance(&v);
            prop_assert!(d >= 0.0);
            for a in set.anchors() {
                prop_assert!(d <= dist(&v, &a) + 1e-12);
            }
            let again = set.nearest(&v);
            prop_assert_eq!(set.nearest(&v), again);
        }
    }
}
