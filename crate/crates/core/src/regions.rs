//! Observation sets `ω ⊂ M × M'` built from a small set of combinators.
//!
//! Every region is an indicator: membership is decided pointwise, slices
//! `ω_x = ω ∩ ({x} × M')` are membership at a fixed left point, and measures
//! are indicator quadratures.
//!
//! Boundaries: arcs, caps and bands are closed; a tube complement keeps only
//! points at distance strictly greater than `epsilon` from the geodesic.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot3, factor_distance, norm3, FactorGeodesic, FactorManifold, FactorPoint};
use crate::quadrature::QuadratureGrid;
use crate::spectral::{product_distance, ProductManifold, ProductPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSet {
    Full,
    /// Closed arc of the circle.
    Arc { center: f64, half_width: f64 },
    /// Closed geodesic ball of the sphere around `axis`.
    Cap { axis: [f64; 3], radius: f64 },
    /// Points whose polar angle from `axis` lies in `[theta_min, theta_max]`.
    Band { axis: [f64; 3], theta_min: f64, theta_max: f64 },
    Complement { set: Box<FactorSet> },
    Union { parts: Vec<FactorSet> },
}

fn polar_angle(axis: [f64; 3], v: [f64; 3]) -> f64 {
    (dot3(axis, v) / norm3(axis)).clamp(-1.0, 1.0).acos()
}

impl FactorSet {
    pub fn complement(self) -> Self {
        FactorSet::Complement { set: Box::new(self) }
    }

    /// Band of half-width `half_width` around the great circle orthogonal to `axis`.
    pub fn equatorial_band(axis: [f64; 3], half_width: f64) -> Self {
        FactorSet::Band { axis, theta_min: PI / 2.0 - half_width, theta_max: PI / 2.0 + half_width }
    }

    pub fn empty() -> Self {
        FactorSet::Full.complement()
    }

    pub fn validate(&self, manifold: FactorManifold) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            FactorSet::Full => Ok(()),
            FactorSet::Arc { center, half_width } => {
                if manifold != FactorManifold::Circle {
                    return Err(Error::ManifoldMismatch("arc requires a circle factor".into()));
                }
                if !center.is_finite() || !(*half_width > 0.0 && *half_width <= PI) {
                    return bad(format!("arc half_width must lie in (0, π], got {half_width}"));
                }
                Ok(())
            }
            FactorSet::Cap { axis, radius } => {
                if manifold != FactorManifold::Sphere2 {
                    return Err(Error::ManifoldMismatch("cap requires a sphere factor".into()));
                }
                FactorPoint::unit(*axis)?;
                if !(*radius > 0.0 && *radius < PI) {
                    return bad(format!("cap radius must lie in (0, π), got {radius}"));
                }
                Ok(())
            }
            FactorSet::Band { axis, theta_min, theta_max } => {
                if manifold != FactorManifold::Sphere2 {
                    return Err(Error::ManifoldMismatch("band requires a sphere factor".into()));
                }
                FactorPoint::unit(*axis)?;
                if !(0.0 <= *theta_min && theta_min < theta_max && *theta_max <= PI) {
                    return bad(format!("band needs 0 <= theta_min < theta_max <= π, got [{theta_min}, {theta_max}]"));
                }
                Ok(())
            }
            FactorSet::Complement { set } => set.validate(manifold),
            FactorSet::Union { parts } => parts.iter().try_for_each(|p| p.validate(manifold)),
        }
    }

    pub fn contains(&self, p: &FactorPoint) -> bool {
        match self {
            FactorSet::Full => true,
            FactorSet::Arc { center, half_width } => {
                p.as_angle().is_some() && factor_distance(&FactorPoint::angle(*center), p) <= *half_width
            }
            FactorSet::Cap { axis, radius } => p.as_unit().is_some_and(|v| polar_angle(*axis, v) <= *radius),
            FactorSet::Band { axis, theta_min, theta_max } => p.as_unit().is_some_and(|v| {
                let th = polar_angle(*axis, v);
                *theta_min <= th && th <= *theta_max
            }),
            FactorSet::Complement { set } => !set.contains(p),
            FactorSet::Union { parts } => parts.iter().any(|s| s.contains(p)),
        }
    }

    /// Indicator quadrature over one factor.
    pub fn measure(&self, grid: &QuadratureGrid) -> f64 {
        grid.integrate(|p| if self.contains(p) { 1.0 } else { 0.0 })
    }
}

/// A geodesic of the product, described by its factor motion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProductGeodesic {
    /// `t ↦ (x, γ(t))`.
    Vertical { x: FactorPoint, gamma: FactorGeodesic },
    /// `t ↦ (γ(t), x')`.
    Horizontal { gamma: FactorGeodesic, x_prime: FactorPoint },
    /// `t ↦ (γ(c t), γ'(c' t))` with `c² + c'² = 1`. The support is traced
    /// over `[0, length]`; by default `length = 2π / min(c, c')`, which is
    /// one full period when `c = c'`.
    Diagonal {
        left: FactorGeodesic,
        right: FactorGeodesic,
        weights: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        length: Option<f64>,
    },
}

impl ProductGeodesic {
    pub fn point(&self, t: f64) -> ProductPoint {
        match self {
            ProductGeodesic::Vertical { x, gamma } => ProductPoint::new(*x, gamma.point(t)),
            ProductGeodesic::Horizontal { gamma, x_prime } => ProductPoint::new(gamma.point(t), *x_prime),
            ProductGeodesic::Diagonal { left, right, weights, .. } => {
                ProductPoint::new(left.point(weights[0] * t), right.point(weights[1] * t))
            }
        }
    }

    /// Parameter length of the traced support.
    pub fn length(&self) -> f64 {
        match self {
            ProductGeodesic::Diagonal { weights, length, .. } => {
                length.unwrap_or_else(|| TAU / weights[0].min(weights[1]))
            }
            _ => TAU,
        }
    }

    fn validated(&self, product: ProductManifold) -> Result<Self> {
        let on = |p: &FactorPoint, m: FactorManifold, what: &str| -> Result<FactorPoint> {
            if p.manifold() != m {
                return Err(Error::ManifoldMismatch(format!("{what} must lie on {m:?}")));
            }
            p.normalized()
        };
        let geo = |g: &FactorGeodesic, m: FactorManifold, what: &str| -> Result<FactorGeodesic> {
            if g.manifold() != m {
                return Err(Error::ManifoldMismatch(format!("{what} must run on {m:?}")));
            }
            g.validated()
        };
        Ok(match self {
            ProductGeodesic::Vertical { x, gamma } => ProductGeodesic::Vertical {
                x: on(x, product.left, "vertical base point")?,
                gamma: geo(gamma, product.right, "vertical geodesic")?,
            },
            ProductGeodesic::Horizontal { gamma, x_prime } => ProductGeodesic::Horizontal {
                gamma: geo(gamma, product.left, "horizontal geodesic")?,
                x_prime: on(x_prime, product.right, "horizontal base point")?,
            },
            ProductGeodesic::Diagonal { left, right, weights, length } => {
                let [c, cp] = *weights;
                if !(c > 0.0 && cp > 0.0) || (c * c + cp * cp - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "diagonal weights must be positive with c² + c'² = 1, got {weights:?}"
                    )));
                }
                if let Some(l) = length {
                    if !(*l > 0.0 && l.is_finite()) {
                        return Err(Error::InvalidArgument(format!("diagonal length must be positive, got {l}")));
                    }
                }
                ProductGeodesic::Diagonal {
                    left: geo(left, product.left, "diagonal left geodesic")?,
                    right: geo(right, product.right, "diagonal right geodesic")?,
                    weights: *weights,
                    length: *length,
                }
            }
        })
    }

    /// Whether `p` lies within distance `epsilon` of the traced support.
    ///
    /// Vertical and horizontal supports are `{x} × γ(ℝ)` and `γ(ℝ) × {x'}`,
    /// whose distance is exact. For a diagonal support the factor distances
    /// to the two geodesic images give a lower bound; past it, the distance
    /// to `Γ(t)` is 1-Lipschitz in `t`, so a sample at distance `d` rules out
    /// every parameter within `d − epsilon` of it. Intervals that cannot be
    /// ruled out are bisected until the sampling spacing is at most
    /// `epsilon / 50`, which bounds the classification error by
    /// `epsilon / 100`.
    pub fn within_tube(&self, p: &ProductPoint, epsilon: f64) -> bool {
        let (dl, dr) = match self {
            ProductGeodesic::Vertical { x, gamma } => (factor_distance(&p.left, x), gamma.image_distance(&p.right)),
            ProductGeodesic::Horizontal { gamma, x_prime } => (gamma.image_distance(&p.left), factor_distance(&p.right, x_prime)),
            ProductGeodesic::Diagonal { left, right, .. } => (left.image_distance(&p.left), right.image_distance(&p.right)),
        };
        let bound = dl * dl + dr * dr;
        match self {
            ProductGeodesic::Diagonal { .. } if bound <= epsilon * epsilon => {}
            _ => return bound <= epsilon * epsilon,
        }
        let length = self.length();
        let n0 = ((length / epsilon).ceil() as usize).max(16);
        let h = length / n0 as f64;
        let floor = epsilon / 100.0;
        let mut stack: Vec<(f64, f64)> = Vec::new();
        for i in 0..=n0 {
            let t = i as f64 * h;
            let d = product_distance(p, &self.point(t));
            if d <= epsilon {
                return true;
            }
            if d - 0.5 * h <= epsilon {
                stack.push((t, 0.5 * h));
            }
        }
        while let Some((c, half)) = stack.pop() {
            if half <= floor {
                continue;
            }
            let q = 0.5 * half;
            for t in [c - q, c + q] {
                let d = product_distance(p, &self.point(t.clamp(0.0, length)));
                if d <= epsilon {
                    return true;
                }
                if d - q <= epsilon {
                    stack.push((t, q));
                }
            }
        }
        false
    }

    /// Sampled distance from `p` to the support, refined near the minimum.
    pub fn distance_to_support(&self, p: &ProductPoint, samples: usize) -> f64 {
        let length = self.length();
        let h = length / samples as f64;
        let f = |t: f64| product_distance(p, &self.point(t.clamp(0.0, length)));
        let (best_t, _) = (0..=samples)
            .map(|i| (i as f64 * h, f(i as f64 * h)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        // golden-section polish on the bracketing interval
        let (mut a, mut b) = (best_t - h, best_t + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f(0.5 * (a + b)).min(f(best_t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Product { left: FactorSet, right: FactorSet },
    Union { parts: Vec<Region> },
    /// Points at distance strictly greater than `epsilon` from the geodesic support.
    TubeComplement { geodesic: ProductGeodesic, epsilon: f64 },
    Complement { region: Box<Region> },
}

impl Region {
    pub fn full() -> Self {
        Region::Product { left: FactorSet::Full, right: FactorSet::Full }
    }

    pub fn product(left: FactorSet, right: FactorSet) -> Self {
        Region::Product { left, right }
    }

    pub fn complement(self) -> Self {
        Region::Complement { region: Box::new(self) }
    }

    /// Checks every parameter against the product and normalizes geodesic data.
    pub fn validated(&self, product: ProductManifold) -> Result<Region> {
        Ok(match self {
            Region::Product { left, right } => {
                left.validate(product.left)?;
                right.validate(product.right)?;
                self.clone()
            }
            Region::Union { parts } => {
                Region::Union { parts: parts.iter().map(|r| r.validated(product)).collect::<Result<_>>()? }
            }
            Region::TubeComplement { geodesic, epsilon } => {
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::InvalidArgument(format!("tube epsilon must be positive, got {epsilon}")));
                }
                Region::TubeComplement { geodesic: geodesic.validated(product)?, epsilon: *epsilon }
            }
            Region::Complement { region } => Region::Complement { region: Box::new(region.validated(product)?) },
        })
    }

    pub fn contains(&self, p: &ProductPoint) -> bool {
        match self {
            Region::Product { left, right } => left.contains(&p.left) && right.contains(&p.right),
            Region::Union { parts } => parts.iter().any(|r| r.contains(p)),
            Region::TubeComplement { geodesic, epsilon } => !geodesic.within_tube(p, *epsilon),
            Region::Complement { region } => !region.contains(p),
        }
    }

    /// The vertical slice `ω_x`.
    pub fn slice(&self, x: FactorPoint) -> RegionSlice<'_> {
        RegionSlice { region: self, x }
    }

    /// `∫_ω dx_g` by indicator quadrature on the product grid.
    pub fn measure(&self, grid_left: &QuadratureGrid, grid_right: &QuadratureGrid) -> f64 {
        if let Region::Product { left, right } = self {
            return left.measure(grid_left) * right.measure(grid_right);
        }
        let rows: Vec<f64> = grid_left
            .nodes()
            .par_iter()
            .zip(grid_left.weights().par_iter())
            .map(|(x, wx)| wx * self.slice(*x).measure(grid_right))
            .collect();
        rows.iter().sum()
    }
}

/// `ω_x = ω ∩ ({x} × M')`, viewed as a subset of `M'`.
#[derive(Clone, Copy, Debug)]
pub struct RegionSlice<'a> {
    region: &'a Region,
    x: FactorPoint,
}

impl RegionSlice<'_> {
    pub fn x(&self) -> FactorPoint {
        self.x
    }

    pub fn region(&self) -> &Region {
        self.region
    }

    pub fn contains(&self, q: &FactorPoint) -> bool {
        self.region.contains(&ProductPoint::new(self.x, *q))
    }

    pub fn measure(&self, grid: &QuadratureGrid) -> f64 {
        grid.integrate(|q| if self.contains(q) { 1.0 } else { 0.0 })
    }

    /// Indicator of the slice on each node of `grid`.
    pub fn mask(&self, grid: &QuadratureGrid) -> Vec<bool> {
        grid.nodes().iter().map(|q| self.contains(q)).collect()
    }

    /// Closed-form factor set for slices of product regions.
    pub fn as_factor_set(&self) -> Option<FactorSet> {
        match self.region {
            Region::Product { left, right } => {
                Some(if left.contains(&self.x) { right.clone() } else { FactorSet::empty() })
            }
            _ => None,
        }
    }
}
