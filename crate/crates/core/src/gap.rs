//! Distinct-frequency clustering and the gap constant `C_0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ModeSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapReport {
    pub distinct_values: Vec<f64>,
    /// Minimum distance between consecutive distinct values; `+∞` (JSON `null`)
    /// when there are fewer than two classes.
    #[serde(with = "crate::output::infinite_as_null")]
    pub gap_constant: f64,
    pub achieving_pair: Option<(f64, f64)>,
}

impl GapReport {
    /// Distance from each distinct value to the next one.
    pub fn gaps(&self) -> Vec<f64> {
        self.distinct_values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Sorts, merges values closer than `tol_eq` into classes represented by
/// their mean, and reports the smallest gap between class representatives.
pub fn gap_report(frequencies: &[f64], tol_eq: f64) -> Result<GapReport> {
    if !(tol_eq > 0.0) {
        return Err(Error::InvalidArgument(format!("tol_eq must be positive, got {tol_eq}")));
    }
    let mut sorted = frequencies.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut distinct = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] - sorted[j - 1] <= tol_eq {
            j += 1;
        }
        let class = &sorted[i..j];
        distinct.push(class.iter().sum::<f64>() / class.len() as f64);
        i = j;
    }

    let mut gap_constant = f64::INFINITY;
    let mut achieving_pair = None;
    for w in distinct.windows(2) {
        let d = w[1] - w[0];
        if d < gap_constant {
            gap_constant = d;
            achieving_pair = Some((w[0], w[1]));
        }
    }
    Ok(GapReport { distinct_values: distinct, gap_constant, achieving_pair })
}

/// Whether the truncated frequency family of `modes` has `C_0 ≥ threshold`.
pub fn gap_condition_holds(modes: &ModeSet, tol_eq: f64, threshold: f64) -> Result<(bool, GapReport)> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    let report = gap_report(&modes.frequencies(), tol_eq)?;
    Ok((report.gap_constant >= threshold, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FactorManifold::Circle;
    use crate::spectral::{rank_symbol, ProductManifold, SymbolFunction, TOL_EQ};
    use crate::geometry::FactorSpectrum;

    #[test]
    fn integer_family() {
        let r = gap_report(&[5.0, 0.0, 1.0, 2.0, 1.0, 4.0], TOL_EQ).unwrap();
        assert_eq!(r.distinct_values, vec![0.0, 1.0, 2.0, 4.0, 5.0]);
        assert_eq!(r.gap_constant, 1.0);
        assert_eq!(r.gaps(), vec![1.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn single_class_is_infinite() {
        let r = gap_report(&[3.0, 3.0 + 1e-12], TOL_EQ).unwrap();
        assert_eq!(r.distinct_values.len(), 1);
        assert!(r.gap_constant.is_infinite());
        assert!(r.achieving_pair.is_none());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"gap_constant\":null"));
        let back: GapReport = serde_json::from_str(&json).unwrap();
        assert!(back.gap_constant.is_infinite());
        assert!(gap_report(&[1.0], 0.0).is_err());
    }

    /// Brute force over all pairs of distinct sums `j² + k² ≤ n_max`.
    fn sqrt_gap_oracle(n_max: u64) -> f64 {
        let mut sums = Vec::new();
        for j in 0..=n_max {
            for k in 0..=n_max {
                if j * j + k * k <= n_max {
                    sums.push(j * j + k * k);
                }
            }
        }
        sums.sort();
        sums.dedup();
        let mut best = f64::INFINITY;
        for (i, a) in sums.iter().enumerate() {
            for b in &sums[i + 1..] {
                best = best.min((*b as f64).sqrt() - (*a as f64).sqrt());
            }
        }
        best
    }

    #[test]
    fn square_root_family_matches_brute_force() {
        let cc = ProductManifold::new(Circle, Circle);
        for (lambda_max, n_max) in [(25.0, 25), (50.0, 50), (100.0, 100)] {
            let ms = ModeSet::for_product(cc, SymbolFunction::SquareRoot, lambda_max).unwrap();
            let r = gap_report(&ms.frequencies(), TOL_EQ).unwrap();
            assert!((r.gap_constant - sqrt_gap_oracle(n_max)).abs() < 1e-12);
        }
        // the 49/50 pair realizes the minimum only up to cutoff 50
        let ms = ModeSet::for_product(cc, SymbolFunction::SquareRoot, 50.0).unwrap();
        let r = gap_report(&ms.frequencies(), TOL_EQ).unwrap();
        assert!((r.gap_constant - (50f64.sqrt() - 7.0)).abs() < 1e-12);
    }

    #[test]
    fn gap_condition_examples() {
        let cc = ProductManifold::new(Circle, Circle);
        let ms = ModeSet::for_product(cc, SymbolFunction::Identity, 100.0).unwrap();
        let (ok, r) = gap_condition_holds(&ms, TOL_EQ, 0.5).unwrap();
        assert!(ok);
        assert_eq!(r.gap_constant, 1.0);
        let ms = ModeSet::for_product(cc, SymbolFunction::SquareRoot, 100.0).unwrap();
        assert!(!gap_condition_holds(&ms, TOL_EQ, 0.5).unwrap().0);
        for lambda_max in [0.0, 7.0, 50.0, 200.0] {
            let a = FactorSpectrum::build(Circle, lambda_max).unwrap();
            let sym = rank_symbol(&a, &a, lambda_max, TOL_EQ).unwrap();
            let ms = ModeSet::build(a.clone(), a, sym, lambda_max).unwrap();
            let (ok, r) = gap_condition_holds(&ms, TOL_EQ, 0.5).unwrap();
            assert!(ok);
            assert!(r.gap_constant == 1.0 || (lambda_max == 0.0 && r.gap_constant.is_infinite()));
        }
    }

    #[test]
    fn scale_equivariance_and_idempotence() {
        let cc = ProductManifold::new(Circle, Circle);
        let ms = ModeSet::for_product(cc, SymbolFunction::SquareRoot, 60.0).unwrap();
        let f = ms.frequencies();
        let r = gap_report(&f, TOL_EQ).unwrap();
        for c in [0.5, 2.0, 8.0] {
            let scaled: Vec<f64> = f.iter().map(|x| c * x).collect();
            let rs = gap_report(&scaled, c * TOL_EQ).unwrap();
            assert!((rs.gap_constant - c * r.gap_constant).abs() < 1e-12);
        }
        let again = gap_report(&r.distinct_values, TOL_EQ).unwrap();
        assert_eq!(again.distinct_values, r.distinct_values);
    }

    #[test]
    fn square_root_gap_shrinks_with_cutoff() {
        let cc = ProductManifold::new(Circle, Circle);
        let gaps: Vec<f64> = [25.0, 100.0, 400.0]
            .iter()
            .map(|&l| {
                let ms = ModeSet::for_product(cc, SymbolFunction::SquareRoot, l).unwrap();
                gap_report(&ms.frequencies(), TOL_EQ).unwrap().gap_constant
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
        assert!(gaps[2] < gaps[0]);
    }
}
