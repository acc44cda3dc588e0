//! Sampled geometric control checks.
//!
//! A verdict is "satisfied at resolution": every sampled geodesic, sampled at
//! `n_times` instants of `[0, T]` (both endpoints included), visits the set.
//! Both orientations of every geodesic are sampled.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cross3, norm3, FactorGeodesic, FactorManifold, FactorPoint};
use crate::regions::{FactorSet, Region};
use crate::spectral::ProductManifold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlResolution {
    /// Base points sampled on the left factor (vertical checks only).
    pub n_x: usize,
    /// Start points on the factor carrying the geodesics.
    pub n_starts: usize,
    /// Initial directions per start point (sphere only; the circle uses both signs).
    pub n_directions: usize,
    pub n_times: usize,
}

impl ControlResolution {
    pub fn default_for(manifold: FactorManifold) -> Self {
        match manifold {
            FactorManifold::Circle => ControlResolution { n_x: 64, n_starts: 64, n_directions: 2, n_times: 512 },
            FactorManifold::Sphere2 => ControlResolution { n_x: 64, n_starts: 32, n_directions: 16, n_times: 512 },
        }
    }

    fn check(&self, manifold: FactorManifold, vertical: bool) -> Result<()> {
        let mut counts = vec![("n_starts", self.n_starts), ("n_times", self.n_times)];
        if vertical {
            counts.push(("n_x", self.n_x));
        }
        if manifold == FactorManifold::Sphere2 {
            counts.push(("n_directions", self.n_directions));
        }
        for (name, n) in counts {
            if n < 8 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 8, got {n}")));
            }
        }
        Ok(())
    }
}

/// A sampled geodesic that never entered the set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Witness {
    /// Left base point of the vertical fiber, for vertical checks.
    pub x: Option<FactorPoint>,
    pub geodesic: FactorGeodesic,
    pub times: Vec<f64>,
    pub trajectory: Vec<FactorPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlVerdict {
    pub satisfied: bool,
    pub witness: Option<Witness>,
    /// Largest first-entry time over the sampled geodesics, when all of them enter.
    pub min_hit_time: Option<f64>,
    pub horizon: f64,
    pub resolution: ControlResolution,
}

/// Deterministic near-uniform points on the unit sphere (Fibonacci lattice).
pub fn fibonacci_sphere(n: usize) -> Vec<FactorPoint> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            FactorPoint::Unit([r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

/// Sample points used as base points `x` on a factor.
pub fn factor_samples(manifold: FactorManifold, n: usize) -> Vec<FactorPoint> {
    match manifold {
        FactorManifold::Circle => (0..n).map(|i| FactorPoint::Angle(TAU * i as f64 / n as f64)).collect(),
        FactorManifold::Sphere2 => fibonacci_sphere(n),
    }
}

/// The sampled geodesic family, in a fixed order.
pub fn sample_geodesics(manifold: FactorManifold, res: &ControlResolution) -> Vec<FactorGeodesic> {
    match manifold {
        FactorManifold::Circle => (0..res.n_starts)
            .flat_map(|i| {
                let a = TAU * i as f64 / res.n_starts as f64;
                [FactorGeodesic::circle(a, 1.0), FactorGeodesic::circle(a, -1.0)]
            })
            .collect(),
        FactorManifold::Sphere2 => fibonacci_sphere(res.n_starts)
            .into_iter()
            .flat_map(|p| {
                let p = p.as_unit().unwrap();
                let mut east = cross3([0.0, 0.0, 1.0], p);
                if norm3(east) < 1e-8 {
                    east = [1.0, 0.0, 0.0];
                }
                let n = norm3(east);
                let e1 = [east[0] / n, east[1] / n, east[2] / n];
                let e2 = cross3(p, e1);
                (0..res.n_directions).map(move |k| {
                    let (s, c) = (TAU * k as f64 / res.n_directions as f64).sin_cos();
                    let d = [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1], c * e1[2] + s * e2[2]];
                    FactorGeodesic::sphere(p, d).expect("tangent frame is orthonormal")
                })
            })
            .collect(),
    }
}

fn sample_times(horizon: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * horizon / (n - 1) as f64).collect()
}

fn first_hit(g: &FactorGeodesic, times: &[f64], member: &(impl Fn(&FactorPoint) -> bool + Sync)) -> Option<f64> {
    times.iter().copied().find(|&t| member(&g.point(t)))
}

fn check_geodesics(
    manifold: FactorManifold,
    horizon: f64,
    res: &ControlResolution,
    x: Option<FactorPoint>,
    member: impl Fn(&FactorPoint) -> bool + Sync,
) -> ControlVerdict {
    let times = sample_times(horizon, res.n_times);
    let geodesics = sample_geodesics(manifold, res);
    let hits: Vec<Option<f64>> = geodesics.iter().map(|g| first_hit(g, &times, &member)).collect();
    verdict_from_hits(&geodesics, &hits, &times, horizon, res, x)
}

fn verdict_from_hits(
    geodesics: &[FactorGeodesic],
    hits: &[Option<f64>],
    times: &[f64],
    horizon: f64,
    res: &ControlResolution,
    x: Option<FactorPoint>,
) -> ControlVerdict {
    match hits.iter().position(Option::is_none) {
        Some(i) => {
            let g = geodesics[i];
            ControlVerdict {
                satisfied: false,
                witness: Some(Witness {
                    x,
                    geodesic: g,
                    times: times.to_vec(),
                    trajectory: times.iter().map(|&t| g.point(t)).collect(),
                }),
                min_hit_time: None,
                horizon,
                resolution: *res,
            }
        }
        None => ControlVerdict {
            satisfied: true,
            witness: None,
            min_hit_time: hits.iter().map(|h| h.unwrap()).reduce(f64::max),
            horizon,
            resolution: *res,
        },
    }
}

/// Sampled GCC on one factor: every geodesic meets `set` within `horizon`.
pub fn gcc_check(manifold: FactorManifold, set: &FactorSet, horizon: f64, res: &ControlResolution) -> Result<ControlVerdict> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("time horizon must be positive, got {horizon}")));
    }
    res.check(manifold, false)?;
    set.validate(manifold)?;
    let times = sample_times(horizon, res.n_times);
    let geodesics = sample_geodesics(manifold, res);
    let hits: Vec<Option<f64>> = geodesics.par_iter().map(|g| first_hit(g, &times, &|p| set.contains(p))).collect();
    Ok(verdict_from_hits(&geodesics, &hits, &times, horizon, res, None))
}

/// Sampled VGCC: for each sampled `x` on the left factor, GCC of the slice
/// `ω_x` on the right factor. The witness is the first failing `(x, γ)`.
pub fn vgcc_check(product: ProductManifold, region: &Region, horizon: f64, res: &ControlResolution) -> Result<ControlVerdict> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("time horizon must be positive, got {horizon}")));
    }
    res.check(product.right, true)?;
    let region = region.validated(product)?;
    let xs = factor_samples(product.left, res.n_x);
    let verdicts: Vec<ControlVerdict> = xs
        .par_iter()
        .map(|x| {
            let slice = region.slice(*x);
            check_geodesics(product.right, horizon, res, Some(*x), |q| slice.contains(q))
        })
        .collect();
    if let Some(v) = verdicts.iter().find(|v| !v.satisfied) {
        return Ok(v.clone());
    }
    Ok(ControlVerdict {
        satisfied: true,
        witness: None,
        min_hit_time: verdicts.iter().filter_map(|v| v.min_hit_time).reduce(f64::max),
        horizon,
        resolution: *res,
    })
}
