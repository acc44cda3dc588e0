use std::f64::consts::PI;

use num_complex::Complex64;
use obslab::{
    assemble_gramian, evolve, truncated_obs_constant, FactorManifold::*, FactorSet, ModeSet, ProductManifold, QuadratureGrid,
    Region, StateVector, SymbolFunction,
};
use proptest::prelude::*;

fn modes() -> ModeSet {
    ModeSet::for_product(ProductManifold::new(Circle, Sphere2), SymbolFunction::SquareRoot, 12.0).unwrap()
}

fn state_strategy(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| StateVector(v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evolution_is_unitary(s in state_strategy(modes().len()), t in -50.0f64..50.0) {
        let m = modes();
        let e = evolve(&m, &s, t).unwrap();
        prop_assert!((e.norm() - s.norm()).abs() <= 1e-12 * s.norm().max(1.0));
    }

    #[test]
    fn evolution_is_a_group(s in state_strategy(modes().len()), t1 in -20.0f64..20.0, t2 in -20.0f64..20.0) {
        let m = modes();
        let a = evolve(&m, &evolve(&m, &s, t1).unwrap(), t2).unwrap();
        let b = evolve(&m, &s, t1 + t2).unwrap();
        let err = a.coefficients().iter().zip(b.coefficients()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12);
    }

    #[test]
    fn symbols_are_increasing(s1 in 0.0f64..500.0, d in 1e-6f64..50.0) {
        for f in [SymbolFunction::Identity, SymbolFunction::SquareRoot] {
            prop_assert!(f.apply(s1).unwrap() < f.apply(s1 + d).unwrap());
        }
    }

    #[test]
    fn constant_grows_with_horizon_and_region(
        center in -PI..PI,
        inner in 0.2f64..1.2,
        extra in 0.0f64..1.5,
        t in 0.5f64..4.0,
        dt in 0.0f64..3.0,
    ) {
        let product = ProductManifold::new(Circle, Circle);
        let m = ModeSet::for_product(product, SymbolFunction::Identity, 4.0).unwrap();
        let g = QuadratureGrid::circle(64).unwrap();
        let small = Region::product(FactorSet::Full, FactorSet::Arc { center, half_width: inner });
        let large = Region::product(FactorSet::Full, FactorSet::Arc { center, half_width: inner + extra });
        let c = |r: &Region, h: f64| truncated_obs_constant(&assemble_gramian(&m, r, h, &g, &g).unwrap()).unwrap();
        prop_assert!(c(&small, t) <= c(&small, t + dt) + 1e-10);
        prop_assert!(c(&small, t) <= c(&large, t) + 1e-10);
    }
}

#[test]
fn constant_shrinks_as_modes_are_added() {
    let product = ProductManifold::new(Circle, Circle);
    let full = ModeSet::for_product(product, SymbolFunction::Identity, 9.0).unwrap();
    let g = QuadratureGrid::circle(64).unwrap();
    let region = Region::product(FactorSet::Arc { center: 0.4, half_width: 1.3 }, FactorSet::Arc { center: -1.0, half_width: 0.8 });
    let gram = assemble_gramian(&full, &region, 2.0, &g, &g).unwrap();
    let mut prev = f64::INFINITY;
    assert!(full.len() > 21);
    for n in [1, 5, 9, 13, 21, full.len()] {
        let c = truncated_obs_constant(&gram.leading(n)).unwrap();
        assert!(c <= prev + 1e-10);
        prev = c;
    }
}

#[test]
fn single_mode_mass_bounds_the_constant() {
    let product = ProductManifold::new(Circle, Sphere2);
    let m = ModeSet::for_product(product, SymbolFunction::Identity, 6.0).unwrap();
    let gl = QuadratureGrid::circle(32).unwrap();
    let gr = QuadratureGrid::sphere(16, 32).unwrap();
    let region = Region::product(FactorSet::Full, FactorSet::equatorial_band([0.0, 0.0, 1.0], 0.5).complement());
    let gram = assemble_gramian(&m, &region, 1.5, &gl, &gr).unwrap();
    let c = truncated_obs_constant(&gram).unwrap();
    for a in 0..m.len() {
        assert!(c <= gram.matrix()[(a, a)].re + 1e-12);
    }
}
