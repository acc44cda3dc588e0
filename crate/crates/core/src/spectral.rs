//! Joint spectrum of a product `M × M'`, spectral symbols and the
//! propagator `e^{itF(Δ)}` on a truncated basis.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{factor_distance, FactorManifold, FactorPoint, FactorSpectrum};

/// Absolute tolerance under which two eigenvalue sums are the same eigenvalue.
pub const TOL_EQ: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductManifold {
    pub left: FactorManifold,
    pub right: FactorManifold,
}

impl ProductManifold {
    pub fn new(left: FactorManifold, right: FactorManifold) -> Self {
        ProductManifold { left, right }
    }

    pub fn volume(&self) -> f64 {
        self.left.volume() * self.right.volume()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductPoint {
    pub left: FactorPoint,
    pub right: FactorPoint,
}

impl ProductPoint {
    pub fn new(left: FactorPoint, right: FactorPoint) -> Self {
        ProductPoint { left, right }
    }
}

/// Product-metric distance `sqrt(d_M² + d_M'²)`.
pub fn product_distance(p: &ProductPoint, q: &ProductPoint) -> f64 {
    factor_distance(&p.left, &q.left).hypot(factor_distance(&p.right, &q.right))
}

/// The increasing function `F` applied spectrally to the Laplacian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolFunction {
    Identity,
    SquareRoot,
    /// Maps the `k`-th distinct eigenvalue sum to `k`. Keys strictly increasing.
    Rank { table: Vec<(f64, usize)> },
}

impl SymbolFunction {
    pub fn apply(&self, s: f64) -> Result<f64> {
        match self {
            SymbolFunction::Identity => Ok(s),
            SymbolFunction::SquareRoot => Ok(s.max(0.0).sqrt()),
            SymbolFunction::Rank { table } => {
                let i = table.partition_point(|(key, _)| *key < s - TOL_EQ);
                match table.get(i) {
                    Some(&(key, value)) if (key - s).abs() <= TOL_EQ => Ok(value as f64),
                    _ => Err(Error::RankLookupMiss(s)),
                }
            }
        }
    }
}

/// Configuration-level symbol choice; `Rank` is materialized from the spectra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolSpec {
    Identity,
    SquareRoot,
    Rank,
}

impl SymbolSpec {
    pub fn resolve(&self, left: &FactorSpectrum, right: &FactorSpectrum, lambda_max: f64, tol_eq: f64) -> Result<SymbolFunction> {
        match self {
            SymbolSpec::Identity => Ok(SymbolFunction::Identity),
            SymbolSpec::SquareRoot => Ok(SymbolFunction::SquareRoot),
            SymbolSpec::Rank => rank_symbol(left, right, lambda_max, tol_eq),
        }
    }

    /// Builds the mode set of `product` truncated at `lambda_max`.
    pub fn mode_set(&self, product: ProductManifold, lambda_max: f64, tol_eq: f64) -> Result<ModeSet> {
        let left = FactorSpectrum::build(product.left, lambda_max)?;
        let right = FactorSpectrum::build(product.right, lambda_max)?;
        let symbol = self.resolve(&left, &right, lambda_max, tol_eq)?;
        ModeSet::build(left, right, symbol, lambda_max)
    }
}

/// Distinct sums `λ_j + λ'_k ≤ lambda_max`, merged within `tol_eq`, in increasing order.
pub fn distinct_sums(a: &FactorSpectrum, b: &FactorSpectrum, lambda_max: f64, tol_eq: f64) -> Vec<f64> {
    let mut sums: Vec<f64> = a
        .levels()
        .iter()
        .flat_map(|la| b.levels().iter().map(move |lb| la.eigenvalue + lb.eigenvalue))
        .filter(|s| *s <= lambda_max + tol_eq)
        .collect();
    sums.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(sums.len());
    for s in sums {
        match out.last() {
            Some(&last) if s - last <= tol_eq => {}
            _ => out.push(s),
        }
    }
    out
}

/// Rank symbol `F(d_k) = k` over the distinct eigenvalue sums up to `lambda_max`.
/// Its frequency family has gap constant exactly 1.
pub fn rank_symbol(a: &FactorSpectrum, b: &FactorSpectrum, lambda_max: f64, tol_eq: f64) -> Result<SymbolFunction> {
    if !(tol_eq > 0.0) {
        return Err(Error::InvalidArgument(format!("tol_eq must be positive, got {tol_eq}")));
    }
    let table = distinct_sums(a, b, lambda_max, tol_eq).into_iter().enumerate().map(|(k, d)| (d, k)).collect();
    Ok(SymbolFunction::Rank { table })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductMode {
    pub j: usize,
    pub k: usize,
    pub mu_sum: f64,
    pub frequency: f64,
}

/// Truncated joint eigenbasis `φ_j ⊗ φ'_k` with `μ_j + μ'_k ≤ lambda_max`,
/// ordered by `(mu_sum, j, k)`.
#[derive(Clone, Debug)]
pub struct ModeSet {
    left: FactorSpectrum,
    right: FactorSpectrum,
    symbol: SymbolFunction,
    lambda_max: f64,
    modes: Vec<ProductMode>,
}

impl ModeSet {
    pub fn build(left: FactorSpectrum, right: FactorSpectrum, symbol: SymbolFunction, lambda_max: f64) -> Result<Self> {
        if !(lambda_max >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda_max must be >= 0, got {lambda_max}")));
        }
        for spec in [&left, &right] {
            if spec.mu_max() < lambda_max {
                return Err(Error::SpectrumTooShort { covered: spec.mu_max(), requested: lambda_max });
            }
        }
        let mu_left = left.repeated_eigenvalues();
        let mu_right = right.repeated_eigenvalues();
        let mut modes = Vec::new();
        for (j, &a) in mu_left.iter().enumerate() {
            for (k, &b) in mu_right.iter().enumerate() {
                let mu_sum = a + b;
                if mu_sum <= lambda_max + TOL_EQ {
                    modes.push(ProductMode { j, k, mu_sum, frequency: symbol.apply(mu_sum)? });
                }
            }
        }
        modes.sort_by(|x, y| x.mu_sum.total_cmp(&y.mu_sum).then(x.j.cmp(&y.j)).then(x.k.cmp(&y.k)));
        Ok(ModeSet { left, right, symbol, lambda_max, modes })
    }

    /// Convenience constructor building both factor spectra at `lambda_max`.
    pub fn for_product(product: ProductManifold, symbol: SymbolFunction, lambda_max: f64) -> Result<Self> {
        let left = FactorSpectrum::build(product.left, lambda_max)?;
        let right = FactorSpectrum::build(product.right, lambda_max)?;
        ModeSet::build(left, right, symbol, lambda_max)
    }

    /// Keeps the first `n` modes of the fixed ordering.
    pub fn take(&self, n: usize) -> ModeSet {
        let mut out = self.clone();
        out.modes.truncate(n);
        out
    }

    pub fn left(&self) -> &FactorSpectrum {
        &self.left
    }

    pub fn right(&self) -> &FactorSpectrum {
        &self.right
    }

    pub fn product(&self) -> ProductManifold {
        ProductManifold::new(self.left.manifold(), self.right.manifold())
    }

    pub fn symbol(&self) -> &SymbolFunction {
        &self.symbol
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn modes(&self) -> &[ProductMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.frequency).collect()
    }

    /// `φ_{j_a}(left) · φ'_{k_a}(right)`.
    pub fn eval(&self, a: usize, p: &ProductPoint) -> Result<f64> {
        let m = self.modes.get(a).ok_or(Error::IndexOutOfRange { index: a, len: self.modes.len() })?;
        Ok(self.left.eval(m.j, &p.left)? * self.right.eval(m.k, &p.right)?)
    }
}

/// Coefficients `b_{jk}` of a datum in the truncated basis of a [`ModeSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(pub Vec<Complex64>);

impl StateVector {
    /// Complex standard normal coefficients scaled to unit norm.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut v: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|c| *c /= norm);
        }
        StateVector(v)
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `e^{itF(Δ)}` on the truncated span: coefficient `a` picks up `e^{iΛ_a t}`.
pub fn evolve(modes: &ModeSet, state: &StateVector, t: f64) -> Result<StateVector> {
    if state.len() != modes.len() {
        return Err(Error::LengthMismatch { expected: modes.len(), got: state.len() });
    }
    Ok(StateVector(
        modes.modes.iter().zip(&state.0).map(|(m, c)| c * Complex64::from_polar(1.0, m.frequency * t)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const CC: ProductManifold = ProductManifold { left: FactorManifold::Circle, right: FactorManifold::Circle };
    const CS: ProductManifold = ProductManifold { left: FactorManifold::Circle, right: FactorManifold::Sphere2 };

    fn sum_counts(ms: &ModeSet) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for m in ms.modes() {
            match out.last_mut() {
                Some((s, c)) if *s == m.mu_sum => *c += 1,
                _ => out.push((m.mu_sum, 1)),
            }
        }
        out
    }

    #[test]
    fn mode_set_examples() {
        let ms = ModeSet::for_product(CC, SymbolFunction::Identity, 2.0).unwrap();
        assert_eq!(ms.len(), 9);
        assert_eq!(sum_counts(&ms), vec![(0.0, 1), (1.0, 4), (2.0, 4)]);
        let ms = ModeSet::for_product(CC, SymbolFunction::Identity, 0.0).unwrap();
        assert_eq!(ms.len(), 1);
        let ms = ModeSet::for_product(CS, SymbolFunction::Identity, 2.0).unwrap();
        assert_eq!(sum_counts(&ms), vec![(0.0, 1), (1.0, 2), (2.0, 3)]);
    }

    #[test]
    fn mode_set_matches_enumeration_oracle() {
        // count pairs of basis functions by brute force over closed-form eigenvalues
        let lambda_max = 30.0;
        let ms = ModeSet::for_product(CS, SymbolFunction::Identity, lambda_max).unwrap();
        let circle_mu: Vec<f64> = (0..200).map(|j: usize| (j.div_ceil(2) as f64).powi(2)).collect();
        let sphere_mu: Vec<f64> = (0..400).map(|j: usize| {
            let l = (j as f64).sqrt().floor();
            l * (l + 1.0)
        }).collect();
        let count = circle_mu
            .iter()
            .flat_map(|a| sphere_mu.iter().map(move |b| a + b))
            .filter(|s| *s <= lambda_max)
            .count();
        assert_eq!(ms.len(), count);
        assert!(ms.modes().windows(2).all(|w| (w[0].mu_sum, w[0].j, w[0].k) < (w[1].mu_sum, w[1].j, w[1].k)));
    }

    #[test]
    fn short_spectrum_rejected() {
        let a = FactorSpectrum::build(FactorManifold::Circle, 4.0).unwrap();
        let b = FactorSpectrum::build(FactorManifold::Circle, 10.0).unwrap();
        assert!(matches!(
            ModeSet::build(a, b, SymbolFunction::Identity, 9.0),
            Err(Error::SpectrumTooShort { .. })
        ));
    }

    #[test]
    fn symbol_examples() {
        assert_eq!(SymbolFunction::Identity.apply(5.0).unwrap(), 5.0);
        assert_eq!(SymbolFunction::SquareRoot.apply(4.0).unwrap(), 2.0);
        let a = FactorSpectrum::build(FactorManifold::Circle, 5.0).unwrap();
        let rank = rank_symbol(&a, &a, 5.0, TOL_EQ).unwrap();
        assert_eq!(rank.apply(4.0).unwrap(), 3.0);
        assert!(matches!(rank.apply(3.0), Err(Error::RankLookupMiss(_))));
    }

    #[test]
    fn rank_symbol_examples() {
        let key_list = |s: &SymbolFunction| match s {
            SymbolFunction::Rank { table } => table.clone(),
            _ => unreachable!(),
        };
        let c = FactorSpectrum::build(FactorManifold::Circle, 8.0).unwrap();
        let t = key_list(&rank_symbol(&c, &c, 8.0, TOL_EQ).unwrap());
        assert_eq!(t, vec![(0.0, 0), (1.0, 1), (2.0, 2), (4.0, 3), (5.0, 4), (8.0, 5)]);
        let t = key_list(&rank_symbol(&c, &c, 0.0, TOL_EQ).unwrap());
        assert_eq!(t, vec![(0.0, 0)]);
        let s = FactorSpectrum::build(FactorManifold::Sphere2, 4.0).unwrap();
        let c4 = FactorSpectrum::build(FactorManifold::Circle, 4.0).unwrap();
        let t = key_list(&rank_symbol(&c4, &s, 4.0, TOL_EQ).unwrap());
        assert_eq!(t, vec![(0.0, 0), (1.0, 1), (2.0, 2), (3.0, 3), (4.0, 4)]);
        assert!(rank_symbol(&c, &c, 8.0, 0.0).is_err());
    }

    #[test]
    fn evolve_examples() {
        let ms = ModeSet::for_product(CC, SymbolFunction::Identity, 1.0).unwrap().take(2);
        let s = StateVector(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert_eq!(evolve(&ms, &s, 0.0).unwrap(), s);
        let out = evolve(&ms, &s, PI).unwrap();
        assert!((out.0[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(evolve(&ms, &StateVector(vec![]), 1.0).is_err());

        let ms = ModeSet::for_product(CC, SymbolFunction::SquareRoot, 20.0).unwrap().take(50);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = StateVector::random(50, &mut rng);
        let e = evolve(&ms, &s, 2.7).unwrap();
        assert!((e.norm() - s.norm()).abs() < 1e-13);
    }

    #[test]
    fn product_eigenfunction_examples() {
        let ms = ModeSet::for_product(CC, SymbolFunction::Identity, 2.0).unwrap();
        let p = ProductPoint::new(FactorPoint::angle(0.0), FactorPoint::angle(1.7));
        assert!((ms.eval(0, &p).unwrap() - 0.159154943091895).abs() < 1e-12);
        let a = ms.modes().iter().position(|m| m.j == 1 && m.k == 0).unwrap();
        assert!((ms.eval(a, &p).unwrap() - 0.225079079039277).abs() < 1e-12);
        assert!(ms.eval(9, &p).is_err());

        let g = QuadratureGrid::circle(16).unwrap();
        for a in 0..ms.len() {
            for b in 0..ms.len() {
                let mut acc = 0.0;
                for (x, wx) in g.nodes().iter().zip(g.weights()) {
                    for (y, wy) in g.nodes().iter().zip(g.weights()) {
                        let p = ProductPoint::new(*x, *y);
                        acc += wx * wy * ms.eval(a, &p).unwrap() * ms.eval(b, &p).unwrap();
                    }
                }
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((acc - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn product_distance_examples() {
        let north = FactorPoint::Unit([0.0, 0.0, 1.0]);
        let eq = FactorPoint::Unit([1.0, 0.0, 0.0]);
        let p = ProductPoint::new(FactorPoint::angle(0.0), FactorPoint::angle(0.0));
        assert_eq!(product_distance(&p, &p), 0.0);
        let q = ProductPoint::new(FactorPoint::angle(0.0), north);
        let r = ProductPoint::new(FactorPoint::angle(PI / 2.0), north);
        assert!((product_distance(&q, &r) - PI / 2.0).abs() < 1e-15);
        let r = ProductPoint::new(FactorPoint::angle(PI / 2.0), eq);
        assert!((product_distance(&q, &r) - PI / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eigenspaces_share_frequencies() {
        for symbol in [SymbolFunction::Identity, SymbolFunction::SquareRoot] {
            let ms = ModeSet::for_product(CS, symbol, 40.0).unwrap();
            for w in ms.modes().windows(2) {
                if (w[0].mu_sum - w[1].mu_sum).abs() <= TOL_EQ {
                    assert_eq!(w[0].frequency, w[1].frequency);
                } else {
                    assert!(w[0].frequency < w[1].frequency);
                }
            }
        }
    }
}
