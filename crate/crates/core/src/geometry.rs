//! Factor manifolds: the circle of circumference 2π and the unit 2-sphere.
//!
//! Both have closed-form Laplace–Beltrami spectra, so every eigenvalue,
//! multiplicity and eigenfunction used downstream is exact up to rounding.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorManifold {
    Circle,
    Sphere2,
}

impl FactorManifold {
    /// Riemannian volume: 2π for the circle, 4π for the sphere.
    pub fn volume(self) -> f64 {
        match self {
            FactorManifold::Circle => TAU,
            FactorManifold::Sphere2 => 4.0 * PI,
        }
    }
}

/// A point on a factor manifold. Angles are in radians; sphere points are
/// unit vectors in R³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorPoint {
    Angle(f64),
    Unit([f64; 3]),
}

impl FactorPoint {
    /// Circle point with the angle reduced to `[0, 2π)`.
    pub fn angle(theta: f64) -> Self {
        FactorPoint::Angle(reduce_angle(theta))
    }

    /// Sphere point from any nonzero vector.
    pub fn unit(v: [f64; 3]) -> Result<Self> {
        let n = norm3(v);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument(format!("cannot normalize {v:?}")));
        }
        Ok(FactorPoint::Unit([v[0] / n, v[1] / n, v[2] / n]))
    }

    /// Sphere point from polar angle `theta` (from +z) and azimuth `phi`.
    pub fn spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        FactorPoint::Unit([st * cp, st * sp, ct])
    }

    pub fn manifold(&self) -> FactorManifold {
        match self {
            FactorPoint::Angle(_) => FactorManifold::Circle,
            FactorPoint::Unit(_) => FactorManifold::Sphere2,
        }
    }

    /// Re-reduces the angle or re-normalizes the vector.
    pub fn normalized(self) -> Result<Self> {
        match self {
            FactorPoint::Angle(t) if t.is_finite() => Ok(FactorPoint::angle(t)),
            FactorPoint::Angle(t) => Err(Error::InvalidArgument(format!("non-finite angle {t}"))),
            FactorPoint::Unit(v) => FactorPoint::unit(v),
        }
    }

    pub fn as_angle(&self) -> Option<f64> {
        match *self {
            FactorPoint::Angle(t) => Some(t),
            FactorPoint::Unit(_) => None,
        }
    }

    pub fn as_unit(&self) -> Option<[f64; 3]> {
        match *self {
            FactorPoint::Unit(v) => Some(v),
            FactorPoint::Angle(_) => None,
        }
    }

    /// Checks the point invariants: angle in `[0, 2π)`, or norm within 1e-12 of 1.
    pub fn is_valid(&self) -> bool {
        match *self {
            FactorPoint::Angle(t) => (0.0..TAU).contains(&t),
            FactorPoint::Unit(v) => (norm3(v) - 1.0).abs() <= 1e-12,
        }
    }
}

pub(crate) fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Geodesic distance between two points of the same factor.
///
/// # Panics
///
/// Panics if the points live on different manifolds.
pub fn factor_distance(p: &FactorPoint, q: &FactorPoint) -> f64 {
    match (*p, *q) {
        (FactorPoint::Angle(a), FactorPoint::Angle(b)) => {
            let d = reduce_angle(a - b);
            d.min(TAU - d)
        }
        (FactorPoint::Unit(a), FactorPoint::Unit(b)) => dot3(a, b).clamp(-1.0, 1.0).acos(),
        _ => panic!("distance between points of different manifolds: {p:?} / {q:?}"),
    }
}

/// One distinct eigenvalue of a factor Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralLevel {
    pub index: usize,
    pub eigenvalue: f64,
    pub multiplicity: usize,
    /// First basis index carrying this eigenvalue.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorSpectrum {
    manifold: FactorManifold,
    levels: Vec<SpectralLevel>,
    mu_max: f64,
}

impl FactorSpectrum {
    /// All levels with eigenvalue `≤ mu_max`.
    ///
    /// Circle: `k²`, multiplicity 1 then 2. Sphere: `l(l+1)`, multiplicity `2l+1`.
    pub fn build(manifold: FactorManifold, mu_max: f64) -> Result<Self> {
        if !(mu_max >= 0.0 && mu_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu_max must be finite and >= 0, got {mu_max}")));
        }
        let mut levels = Vec::new();
        let mut offset = 0;
        for k in 0usize.. {
            let (eigenvalue, multiplicity) = match manifold {
                FactorManifold::Circle => ((k * k) as f64, if k == 0 { 1 } else { 2 }),
                FactorManifold::Sphere2 => ((k * (k + 1)) as f64, 2 * k + 1),
            };
            if eigenvalue > mu_max {
                break;
            }
            levels.push(SpectralLevel { index: k, eigenvalue, multiplicity, offset });
            offset += multiplicity;
        }
        Ok(FactorSpectrum { manifold, levels, mu_max })
    }

    pub fn manifold(&self) -> FactorManifold {
        self.manifold
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }

    pub fn levels(&self) -> &[SpectralLevel] {
        &self.levels
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Total number of basis functions.
    pub fn basis_len(&self) -> usize {
        let last = self.levels.last().expect("level 0 always present");
        last.offset + last.multiplicity
    }

    /// Level index `k` with `α_k ≤ j < α_{k+1}`.
    pub fn level_of(&self, j: usize) -> Result<usize> {
        self.check_index(j)?;
        Ok(self.levels.partition_point(|lv| lv.offset <= j) - 1)
    }

    /// Repeated eigenvalue `μ_j`.
    pub fn eigenvalue(&self, j: usize) -> Result<f64> {
        Ok(self.levels[self.level_of(j)?].eigenvalue)
    }

    /// The nondecreasing list of repeated eigenvalues.
    pub fn repeated_eigenvalues(&self) -> Vec<f64> {
        self.levels
            .iter()
            .flat_map(|lv| std::iter::repeat_n(lv.eigenvalue, lv.multiplicity))
            .collect()
    }

    fn check_index(&self, j: usize) -> Result<()> {
        let len = self.basis_len();
        if j >= len {
            return Err(Error::IndexOutOfRange { index: j, len });
        }
        Ok(())
    }

    fn check_point(&self, p: &FactorPoint) -> Result<()> {
        if p.manifold() != self.manifold {
            return Err(Error::ManifoldMismatch(format!(
                "point {p:?} is not on {:?}",
                self.manifold
            )));
        }
        Ok(())
    }

    /// Evaluates basis function `φ_j` at `p`.
    ///
    /// Circle ordering: `1/√(2π)`, then `cos(kθ)/√π, sin(kθ)/√π` for `k = 1, 2, …`.
    /// Sphere ordering: real harmonics `Y_{l,m}`, `m = -l..=l`, at index `l² + l + m`.
    pub fn eval(&self, j: usize, p: &FactorPoint) -> Result<f64> {
        self.check_index(j)?;
        self.check_point(p)?;
        Ok(match *p {
            FactorPoint::Angle(theta) => circle_basis(j, theta),
            FactorPoint::Unit(v) => {
                let l = self.level_of(j)?;
                let m = j as i64 - (l * l + l) as i64;
                harmonics::real_harmonic(l, m, v)
            }
        })
    }

    /// Evaluates every basis function at `p` into `out` (length `basis_len()`).
    pub fn eval_all_into(&self, p: &FactorPoint, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.basis_len());
        match *p {
            FactorPoint::Angle(theta) => {
                out[0] = 1.0 / TAU.sqrt();
                let s = 1.0 / PI.sqrt();
                let (s1, c1) = theta.sin_cos();
                let (mut c, mut sn) = (1.0_f64, 0.0_f64);
                for k in 1..self.levels.len() {
                    let nc = c * c1 - sn * s1;
                    sn = sn * c1 + c * s1;
                    c = nc;
                    out[2 * k - 1] = s * c;
                    out[2 * k] = s * sn;
                }
            }
            FactorPoint::Unit(v) => harmonics::real_harmonics_into(self.max_level(), v, out),
        }
    }

    pub fn eval_all(&self, p: &FactorPoint) -> Vec<f64> {
        let mut out = vec![0.0; self.basis_len()];
        self.eval_all_into(p, &mut out);
        out
    }
}

fn circle_basis(j: usize, theta: f64) -> f64 {
    if j == 0 {
        return 1.0 / TAU.sqrt();
    }
    let k = j.div_ceil(2) as f64;
    if j % 2 == 1 {
        (k * theta).cos() / PI.sqrt()
    } else {
        (k * theta).sin() / PI.sqrt()
    }
}

/// Initial direction of a factor geodesic: a sign on the circle, a unit
/// tangent vector orthogonal to the start point on the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeodesicDirection {
    Sign(f64),
    Tangent([f64; 3]),
}

/// Unit-speed geodesic of a factor manifold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorGeodesic {
    pub start: FactorPoint,
    pub direction: GeodesicDirection,
}

impl FactorGeodesic {
    pub fn circle(start: f64, sign: f64) -> Self {
        FactorGeodesic {
            start: FactorPoint::angle(start),
            direction: GeodesicDirection::Sign(if sign < 0.0 { -1.0 } else { 1.0 }),
        }
    }

    /// Great circle through `start` with initial velocity `direction`.
    /// The direction is projected onto the tangent plane and normalized.
    pub fn sphere(start: [f64; 3], direction: [f64; 3]) -> Result<Self> {
        let s = FactorPoint::unit(start)?.as_unit().unwrap();
        let d = dot3(s, direction);
        let t = [direction[0] - d * s[0], direction[1] - d * s[1], direction[2] - d * s[2]];
        let t = FactorPoint::unit(t)?.as_unit().unwrap();
        Ok(FactorGeodesic { start: FactorPoint::Unit(s), direction: GeodesicDirection::Tangent(t) })
    }

    pub fn manifold(&self) -> FactorManifold {
        self.start.manifold()
    }

    /// Normalizes the data and checks that the direction matches the start point.
    pub fn validated(&self) -> Result<Self> {
        match (self.start, self.direction) {
            (FactorPoint::Angle(a), GeodesicDirection::Sign(s)) => {
                if s != 1.0 && s != -1.0 {
                    return Err(Error::InvalidArgument(format!("circle geodesic sign must be ±1, got {s}")));
                }
                Ok(FactorGeodesic::circle(a, s))
            }
            (FactorPoint::Unit(p), GeodesicDirection::Tangent(d)) => {
                let p = FactorPoint::unit(p)?.as_unit().unwrap();
                let dn = norm3(d);
                if (dn - 1.0).abs() > 1e-9 || dot3(p, d).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(
                        "sphere geodesic direction must be a unit vector orthogonal to the start".into(),
                    ));
                }
                FactorGeodesic::sphere(p, d)
            }
            _ => Err(Error::ManifoldMismatch("geodesic start and direction disagree".into())),
        }
    }

    /// Distance from `p` to the full image of the geodesic: zero on the
    /// circle, the angular distance to the great circle on the sphere.
    pub fn image_distance(&self, p: &FactorPoint) -> f64 {
        match (self.start, self.direction, p) {
            (FactorPoint::Unit(s), GeodesicDirection::Tangent(d), FactorPoint::Unit(q)) => {
                let n = cross3(s, d);
                (dot3(n, *q) / (norm3(n) * norm3(*q))).abs().min(1.0).asin()
            }
            (FactorPoint::Angle(_), GeodesicDirection::Sign(_), FactorPoint::Angle(_)) => 0.0,
            _ => panic!("point {p:?} is not on the manifold of {self:?}"),
        }
    }

    /// Point at arc length `t`. Period 2π on both manifolds.
    pub fn point(&self, t: f64) -> FactorPoint {
        match (self.start, self.direction) {
            (FactorPoint::Angle(a), GeodesicDirection::Sign(s)) => FactorPoint::angle(a + s * t),
            (FactorPoint::Unit(p), GeodesicDirection::Tangent(d)) => {
                let (st, ct) = t.sin_cos();
                FactorPoint::Unit([
                    ct * p[0] + st * d[0],
                    ct * p[1] + st * d[1],
                    ct * p[2] + st * d[2],
                ])
            }
            _ => panic!("inconsistent geodesic {self:?}"),
        }
    }
}
