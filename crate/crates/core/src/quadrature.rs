//! Quadrature grids on the factor manifolds.
//!
//! Circle: uniform trapezoid rule, exact for trigonometric polynomials of
//! degree below the node count. Sphere: Gauss–Legendre in `cos θ` tensored
//! with a uniform azimuthal rule.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{FactorManifold, FactorPoint};

pub const DEFAULT_CIRCLE_RESOLUTION: usize = 512;
pub const DEFAULT_SPHERE_RESOLUTION: [usize; 2] = [64, 128];

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    manifold: FactorManifold,
    nodes: Vec<FactorPoint>,
    weights: Vec<f64>,
    resolution: Vec<usize>,
}

impl QuadratureGrid {
    /// Builds a grid from caller-supplied resolutions: `[n]` on the circle,
    /// `[n_theta, n_phi]` on the sphere. Every entry must be at least 4.
    pub fn new(manifold: FactorManifold, resolution: &[usize]) -> Result<Self> {
        match (manifold, resolution) {
            (FactorManifold::Circle, &[n]) => Self::circle(n),
            (FactorManifold::Sphere2, &[nt, np]) => Self::sphere(nt, np),
            _ => Err(Error::InvalidArgument(format!(
                "resolution {resolution:?} does not fit {manifold:?} (circle: [n], sphere: [n_theta, n_phi])"
            ))),
        }
    }

    pub fn circle(n: usize) -> Result<Self> {
        check_resolution(n)?;
        let h = TAU / n as f64;
        Ok(QuadratureGrid {
            manifold: FactorManifold::Circle,
            nodes: (0..n).map(|i| FactorPoint::Angle(i as f64 * h)).collect(),
            weights: vec![h; n],
            resolution: vec![n],
        })
    }

    pub fn sphere(n_theta: usize, n_phi: usize) -> Result<Self> {
        check_resolution(n_theta)?;
        check_resolution(n_phi)?;
        let (xs, ws) = gauss_legendre(n_theta);
        let h = TAU / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (x, w) in xs.iter().zip(&ws) {
            let theta = x.acos();
            for i in 0..n_phi {
                nodes.push(FactorPoint::spherical(theta, i as f64 * h));
                weights.push(w * h);
            }
        }
        Ok(QuadratureGrid { manifold: FactorManifold::Sphere2, nodes, weights, resolution: vec![n_theta, n_phi] })
    }

    pub fn manifold(&self) -> FactorManifold {
        self.manifold
    }

    pub fn nodes(&self) -> &[FactorPoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(&FactorPoint) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

fn check_resolution(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("quadrature resolution must be >= 4, got {n}")));
    }
    Ok(())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes in decreasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = x;
        xs[n - 1 - i] = -x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_grid_examples() {
        let g = QuadratureGrid::circle(8).unwrap();
        assert_eq!(g.len(), 8);
        assert!(g.weights().iter().all(|w| (w - TAU / 8.0).abs() < 1e-15));
        let g = QuadratureGrid::circle(64).unwrap();
        let v = g.integrate(|p| (3.0 * p.as_angle().unwrap()).cos().powi(2));
        assert!((v - PI).abs() < 1e-12);
        assert!(QuadratureGrid::circle(3).is_err());
    }

    #[test]
    fn sphere_grid_volume() {
        let g = QuadratureGrid::sphere(16, 32).unwrap();
        assert_eq!(g.len(), 512);
        let vol: f64 = g.weights().iter().sum();
        assert!((vol - 4.0 * PI).abs() < 1e-10);
        assert!(QuadratureGrid::new(FactorManifold::Sphere2, &[16]).is_err());
        assert!(QuadratureGrid::new(FactorManifold::Sphere2, &[16, 2]).is_err());
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (xs, ws) = gauss_legendre(10);
        for deg in 0..20 {
            let q: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg {deg}: {q} vs {exact}");
        }
        let (_, ws) = gauss_legendre(200);
        assert!((ws.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }
}
