//! Mass measures `φ² dx_g` of explicit eigenfunction families on regions.
//!
//! The highest-weight harmonics `Y_l^l` concentrate on the equator `z = 0`
//! of the sphere; products of them concentrate on the torus `E × E'` of
//! `S² × S²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FactorManifold, FactorPoint, FactorSpectrum};
use crate::quadrature::QuadratureGrid;
use crate::regions::{FactorSet, Region};
use crate::spectral::ProductManifold;

/// `ln c_l` with `c_l = (2l+1)! / (4π · 4^l · (l!)²)`.
fn log_highest_weight_constant(l: usize) -> f64 {
    // ln((2l+1)!) − 2 ln(l!) = Σ_{i=l+1}^{2l+1} ln i − Σ_{i=1}^{l} ln i
    let upper: f64 = (l + 1..=2 * l + 1).map(|i| (i as f64).ln()).sum();
    let lower: f64 = (1..=l).map(|i| (i as f64).ln()).sum();
    upper - lower - (4.0 * std::f64::consts::PI).ln() - l as f64 * 4f64.ln()
}

/// `|Y_l^l|² = c_l sin^{2l}θ`, with `θ` the polar angle from the north pole.
pub fn highest_weight_density(l: usize, p: &FactorPoint) -> Result<f64> {
    let v = p
        .as_unit()
        .ok_or_else(|| Error::ManifoldMismatch("highest-weight density lives on the sphere".into()))?;
    let sin2 = (1.0 - v[2] * v[2]).max(0.0);
    if l == 0 {
        return Ok(1.0 / (4.0 * std::f64::consts::PI));
    }
    if sin2 == 0.0 {
        return Ok(0.0);
    }
    Ok((log_highest_weight_constant(l) + l as f64 * sin2.ln()).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorDensity {
    /// `1 / vol`.
    Uniform,
    HighestWeight { l: usize },
    /// Square of the basis eigenfunction `φ_j`.
    Basis { j: usize },
}

impl FactorDensity {
    /// Density values at the grid nodes.
    pub fn on_grid(&self, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        let manifold = grid.manifold();
        match *self {
            FactorDensity::Uniform => Ok(vec![1.0 / manifold.volume(); grid.len()]),
            FactorDensity::HighestWeight { l } => grid.nodes().iter().map(|p| highest_weight_density(l, p)).collect(),
            FactorDensity::Basis { j } => {
                let mu = match manifold {
                    FactorManifold::Circle => ((j + 1) / 2).pow(2) as f64,
                    FactorManifold::Sphere2 => {
                        let l = (j as f64).sqrt().floor() as usize;
                        (l * (l + 1)) as f64
                    }
                };
                let spec = FactorSpectrum::build(manifold, mu)?;
                grid.nodes().iter().map(|p| spec.eval(j, p).map(|v| v * v)).collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductDensity {
    pub left: FactorDensity,
    pub right: FactorDensity,
}

/// Nodes whose weighted density is below this fraction of the largest one
/// are skipped by non-separable region quadratures.
const PRUNE_RELATIVE: f64 = 1e-14;

fn weighted(density: &FactorDensity, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    Ok(density.on_grid(grid)?.iter().zip(grid.weights()).map(|(d, w)| d * w).collect())
}

/// `∫_set ρ` on one factor.
pub fn mass_in_factor_set(density: &FactorDensity, set: &FactorSet, grid: &QuadratureGrid) -> Result<f64> {
    set.validate(grid.manifold())?;
    let wd = weighted(density, grid)?;
    Ok(grid.nodes().iter().zip(&wd).filter(|(p, _)| set.contains(p)).map(|(_, m)| m).sum())
}

/// `∫_ω ρ_L ⊗ ρ_R` by product quadrature.
pub fn mass_in_region(
    density: &ProductDensity,
    region: &Region,
    product: ProductManifold,
    grid_left: &QuadratureGrid,
    grid_right: &QuadratureGrid,
) -> Result<f64> {
    if grid_left.manifold() != product.left || grid_right.manifold() != product.right {
        return Err(Error::ManifoldMismatch("quadrature grids do not match the product factors".into()));
    }
    let region = region.validated(product)?;
    if let Region::Product { left, right } = &region {
        return Ok(mass_in_factor_set(&density.left, left, grid_left)? * mass_in_factor_set(&density.right, right, grid_right)?);
    }
    let wl = weighted(&density.left, grid_left)?;
    let wr = weighted(&density.right, grid_right)?;
    let cut_l = PRUNE_RELATIVE * wl.iter().fold(0.0_f64, |a, b| a.max(*b));
    let cut_r = PRUNE_RELATIVE * wr.iter().fold(0.0_f64, |a, b| a.max(*b));
    let right_idx: Vec<usize> = (0..grid_right.len()).filter(|&q| wr[q] > cut_r).collect();
    let rows: Vec<f64> = (0..grid_left.len())
        .into_par_iter()
        .map(|i| {
            if wl[i] <= cut_l {
                return 0.0;
            }
            let slice = region.slice(grid_left.nodes()[i]);
            let inner: f64 = right_idx.iter().filter(|&&q| slice.contains(&grid_right.nodes()[q])).map(|&q| wr[q]).sum();
            wl[i] * inner
        })
        .collect();
    Ok(rows.iter().sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationFamily {
    /// `|Y_l^l|²` on a sphere; on a product it sits on the right factor with
    /// a uniform left density.
    HighestWeight,
    /// `|Y_l^l(x)|² |Y_l^l(x')|²` on `S² × S²`.
    ProductHighestWeight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConcentrationTarget {
    Sphere { set: FactorSet },
    Product { product: ProductManifold, region: Region },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSeries {
    pub family: ConcentrationFamily,
    pub target: ConcentrationTarget,
    pub l_values: Vec<usize>,
    pub masses: Vec<f64>,
}

impl ConcentrationSeries {
    pub fn is_nondecreasing(&self) -> bool {
        self.masses.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.masses.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Mass of the family member of degree `l` in the target.
pub fn family_mass(
    family: ConcentrationFamily,
    target: &ConcentrationTarget,
    l: usize,
    grid_left: &QuadratureGrid,
    grid_right: &QuadratureGrid,
) -> Result<f64> {
    let hw = FactorDensity::HighestWeight { l };
    match (family, target) {
        (ConcentrationFamily::HighestWeight, ConcentrationTarget::Sphere { set }) => {
            if grid_right.manifold() != FactorManifold::Sphere2 {
                return Err(Error::ManifoldMismatch("sphere target needs a sphere grid".into()));
            }
            mass_in_factor_set(&hw, set, grid_right)
        }
        (ConcentrationFamily::HighestWeight, ConcentrationTarget::Product { product, region }) => {
            if product.right != FactorManifold::Sphere2 {
                return Err(Error::ManifoldMismatch("highest-weight family needs a sphere right factor".into()));
            }
            let d = ProductDensity { left: FactorDensity::Uniform, right: hw };
            mass_in_region(&d, region, *product, grid_left, grid_right)
        }
        (ConcentrationFamily::ProductHighestWeight, ConcentrationTarget::Product { product, region }) => {
            if *product != ProductManifold::new(FactorManifold::Sphere2, FactorManifold::Sphere2) {
                return Err(Error::ManifoldMismatch("product highest-weight family lives on S² × S²".into()));
            }
            mass_in_region(&ProductDensity { left: hw, right: hw }, region, *product, grid_left, grid_right)
        }
        (ConcentrationFamily::ProductHighestWeight, ConcentrationTarget::Sphere { .. }) => {
            Err(Error::ManifoldMismatch("product family needs a product target".into()))
        }
    }
}

/// Masses of the family over `l_values`. For a sphere target only
/// `grid_right` is used.
pub fn concentration_scan(
    family: ConcentrationFamily,
    target: &ConcentrationTarget,
    l_values: &[usize],
    grid_left: &QuadratureGrid,
    grid_right: &QuadratureGrid,
) -> Result<ConcentrationSeries> {
    if l_values.is_empty() {
        return Err(Error::InvalidArgument("l_values must be nonempty".into()));
    }
    let masses = l_values
        .par_iter()
        .map(|&l| family_mass(family, target, l, grid_left, grid_right))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConcentrationSeries { family, target: target.clone(), l_values: l_values.to_vec(), masses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FactorManifold::{Circle, Sphere2};
    use crate::quadrature::gauss_legendre;
    use std::f64::consts::{FRAC_PI_2, PI};

    const NORTH: [f64; 3] = [0.0, 0.0, 1.0];

    /// `∫_{θ0}^{θ1} c_l sin^{2l+1}θ dθ · 2π` by fine Gauss-Legendre in θ.
    fn band_mass_oracle(l: usize, theta0: f64, theta1: f64) -> f64 {
        let (x, w) = gauss_legendre(400);
        let half = 0.5 * (theta1 - theta0);
        let mid = 0.5 * (theta1 + theta0);
        let c = log_highest_weight_constant(l).exp();
        2.0 * PI * half * x.iter().zip(&w).map(|(xi, wi)| wi * c * (mid + half * xi).sin().powi(2 * l as i32 + 1)).sum::<f64>()
    }

    #[test]
    fn density_examples() {
        let p = FactorPoint::spherical(1.1, 0.4);
        assert!((highest_weight_density(0, &p).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert_eq!(highest_weight_density(7, &FactorPoint::spherical(0.0, 0.0)).unwrap(), 0.0);
        assert!(highest_weight_density(3, &FactorPoint::angle(0.0)).is_err());
        // direct factorial form for small l
        let l = 5usize;
        let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
        let c = fact(2 * l + 1) / (4.0 * PI * 4f64.powi(l as i32) * fact(l).powi(2));
        let q = FactorPoint::spherical(0.9, 2.0);
        assert!((highest_weight_density(l, &q).unwrap() - c * 0.9f64.sin().powi(10)).abs() < 1e-14);
    }

    #[test]
    fn density_normalized() {
        let g = QuadratureGrid::sphere(64, 128).unwrap();
        for l in [0, 1, 5, 20, 40, 60] {
            let m = mass_in_factor_set(&FactorDensity::HighestWeight { l }, &FactorSet::Full, &g).unwrap();
            assert!((m - 1.0).abs() < 1e-8, "l={l} mass={m}");
        }
    }

    #[test]
    fn matches_modulus_of_real_harmonics() {
        // |Y_l^l|² = (Y_{l,l}² + Y_{l,-l}²) / 2 with the real basis
        let l = 6usize;
        let p = FactorPoint::spherical(1.3, 0.7);
        let v = p.as_unit().unwrap();
        let a = crate::harmonics::real_harmonic(l, l as i64, v);
        let b = crate::harmonics::real_harmonic(l, -(l as i64), v);
        assert!((highest_weight_density(l, &p).unwrap() - 0.5 * (a * a + b * b)).abs() < 1e-14);
    }

    #[test]
    fn band_masses() {
        let g = QuadratureGrid::sphere(96, 8).unwrap();
        let band = FactorSet::equatorial_band(NORTH, 0.3);
        let m0 = mass_in_factor_set(&FactorDensity::HighestWeight { l: 0 }, &band, &g).unwrap();
        assert!((m0 - 0.3f64.sin()).abs() < 0.01);
        let m40 = mass_in_factor_set(&FactorDensity::HighestWeight { l: 40 }, &band, &g).unwrap();
        assert!(m40 >= 0.98);
        let oracle = band_mass_oracle(40, FRAC_PI_2 - 0.3, FRAC_PI_2 + 0.3);
        assert!((m40 - oracle).abs() < 5e-3, "{m40} vs {oracle}");
    }

    #[test]
    fn complement_additivity() {
        let g = QuadratureGrid::sphere(64, 128).unwrap();
        let cap = FactorSet::Cap { axis: [0.3, 0.1, 0.9], radius: 0.8 };
        for l in [0, 3, 17] {
            let d = FactorDensity::HighestWeight { l };
            let a = mass_in_factor_set(&d, &cap, &g).unwrap();
            let b = mass_in_factor_set(&d, &cap.clone().complement(), &g).unwrap();
            assert!((a + b - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn polar_cap_scan_decreases() {
        let g = QuadratureGrid::sphere(64, 16).unwrap();
        let target = ConcentrationTarget::Sphere { set: FactorSet::Cap { axis: NORTH, radius: 0.5 } };
        let ls: Vec<usize> = (1..=40).collect();
        let s = concentration_scan(ConcentrationFamily::HighestWeight, &target, &ls, &g, &g).unwrap();
        assert!(s.is_nonincreasing());
        assert!(*s.masses.last().unwrap() <= 0.01);
    }

    #[test]
    fn basis_density_is_normalized() {
        let g = QuadratureGrid::circle(64).unwrap();
        for j in 0..9 {
            let m = mass_in_factor_set(&FactorDensity::Basis { j }, &FactorSet::Full, &g).unwrap();
            assert!((m - 1.0).abs() < 1e-12);
        }
        let gs = QuadratureGrid::sphere(16, 32).unwrap();
        for j in [0, 3, 8, 15] {
            let m = mass_in_factor_set(&FactorDensity::Basis { j }, &FactorSet::Full, &gs).unwrap();
            assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_and_general_paths_agree() {
        let product = ProductManifold::new(Circle, Sphere2);
        let gl = QuadratureGrid::circle(32).unwrap();
        let gr = QuadratureGrid::sphere(24, 48).unwrap();
        let d = ProductDensity { left: FactorDensity::Uniform, right: FactorDensity::HighestWeight { l: 8 } };
        let r = Region::product(FactorSet::Arc { center: 1.0, half_width: 0.9 }, FactorSet::equatorial_band(NORTH, 0.4));
        let fast = mass_in_region(&d, &r, product, &gl, &gr).unwrap();
        let slow = mass_in_region(&d, &Region::Union { parts: vec![r] }, product, &gl, &gr).unwrap();
        assert!((fast - slow).abs() < 1e-12);
        let arc_fraction = FactorSet::Arc { center: 1.0, half_width: 0.9 }.measure(&gl) / (2.0 * PI);
        let band = mass_in_factor_set(&FactorDensity::HighestWeight { l: 8 }, &FactorSet::equatorial_band(NORTH, 0.4), &gr).unwrap();
        assert!((fast - arc_fraction * band).abs() < 1e-12);
    }
}
