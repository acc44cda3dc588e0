//! Oracles shared by the integration tests. None of them call the
//! eigen-solver or the closed-form time integrals of the library.
#![allow(dead_code)]

use num_complex::Complex64;
use obslab::{ModeSet, ProductPoint, QuadratureGrid, Region};

/// Number of eigenvalues of the real symmetric `a` below `sigma`, from the
/// signs of the LDLᵀ pivots of `a − σI` (Sylvester's law of inertia).
pub fn count_below(a: &[Vec<f64>], sigma: f64) -> usize {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|r| r.clone()).collect();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= sigma;
    }
    let mut negatives = 0;
    for k in 0..n {
        let mut pivot = m[k][k];
        if pivot == 0.0 {
            pivot = -1e-300;
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let f = m[i][k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    negatives
}

/// Smallest eigenvalue of a real symmetric matrix by inertia bisection.
pub fn smallest_eigenvalue_bisection(a: &[Vec<f64>]) -> f64 {
    let bound = a.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (-bound - 1.0, bound + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(a, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Real symmetric embedding `[[A, −B], [B, A]]` of the Hermitian `A + iB`;
/// it carries every eigenvalue of the Hermitian matrix twice.
pub fn realify(h: &nalgebra::DMatrix<Complex64>) -> Vec<Vec<f64>> {
    let n = h.nrows();
    let mut out = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[i][j] = z.re;
            out[i + n][j + n] = z.re;
            out[i][j + n] = -z.im;
            out[i + n][j] = z.im;
        }
    }
    out
}

/// Composite Simpson nodes and weights on `[0, t]` with `intervals` (even) pieces.
pub fn simpson(t: f64, intervals: usize) -> Vec<(f64, f64)> {
    assert!(intervals % 2 == 0);
    let h = t / intervals as f64;
    (0..=intervals)
        .map(|i| {
            let w = if i == 0 || i == intervals { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            (i as f64 * h, w * h / 3.0)
        })
        .collect()
}

/// `∫_0^T ∫_ω |Σ_a b_a e^{iΛ_a t} Φ_a|²` by Simpson in time and product
/// quadrature in space, evaluating every mode pointwise.
pub fn brute_force_functional(
    modes: &ModeSet,
    b: &[Complex64],
    region: &Region,
    horizon: f64,
    gl: &QuadratureGrid,
    gr: &QuadratureGrid,
    time_intervals: usize,
) -> f64 {
    let times = simpson(horizon, time_intervals);
    let freqs = modes.frequencies();
    let mut total = 0.0;
    for (x, wx) in gl.nodes().iter().zip(gl.weights()) {
        for (y, wy) in gr.nodes().iter().zip(gr.weights()) {
            let p = ProductPoint::new(*x, *y);
            if !region.contains(&p) {
                continue;
            }
            let phi: Vec<f64> = (0..modes.len()).map(|a| modes.eval(a, &p).unwrap()).collect();
            let mut acc = 0.0;
            for &(t, wt) in &times {
                let u: Complex64 = (0..modes.len()).map(|a| b[a] * Complex64::from_polar(phi[a], freqs[a] * t)).sum();
                acc += wt * u.norm_sqr();
            }
            total += wx * wy * acc;
        }
    }
    total
}
