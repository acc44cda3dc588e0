//! Real orthonormal spherical harmonics on the unit sphere.
//!
//! The associated Legendre functions are carried in fully normalized form,
//!
//! ```text
//! P̄_l^m(x) = sqrt((2l+1)/(4π) · (l-m)!/(l+m)!) · P_l^m(x)
//! ```
//!
//! which stays bounded by `sqrt((2l+1)/(4π))` for every degree. No factorial
//! is ever formed, so the recurrence does not overflow at high degree; the
//! sectoral seed `sin^m θ` may underflow near the poles, where the true value
//! is below the representable range anyway.
//!
//! Basis ordering inside degree `l` is `m = -l, …, l`, so the flat index of
//! `Y_{l,m}` is `l² + l + m`. Negative orders carry `sin(|m|φ)`, positive
//! orders `cos(mφ)`. The Condon–Shortley phase is dropped.

use std::f64::consts::PI;

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully normalized associated Legendre values `P̄_l^m(cos θ)` for
/// `0 ≤ m ≤ l ≤ lmax`, stored at `l(l+1)/2 + m`.
pub fn normalized_legendre(lmax: usize, cos_theta: f64, sin_theta: f64) -> Vec<f64> {
    let mut p = vec![0.0; tri(lmax, lmax) + 1];
    p[0] = 0.5 / PI.sqrt();
    // sectoral seeds
    for m in 1..=lmax {
        let mf = m as f64;
        p[tri(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_theta * p[tri(m - 1, m - 1)];
    }
    for m in 0..lmax {
        let mf = m as f64;
        p[tri(m + 1, m)] = (2.0 * mf + 3.0).sqrt() * cos_theta * p[tri(m, m)];
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[tri(l, m)] = a * (cos_theta * p[tri(l - 1, m)] - b * p[tri(l - 2, m)]);
        }
    }
    p
}

/// Writes every real harmonic of degree `≤ lmax` at the unit vector `v`
/// into `out[0..(lmax+1)²]`.
pub fn real_harmonics_into(lmax: usize, v: [f64; 3], out: &mut [f64]) {
    let cos_theta = v[2].clamp(-1.0, 1.0);
    let rho = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let sin_theta = rho;
    let phi = v[1].atan2(v[0]);
    let p = normalized_legendre(lmax, cos_theta, sin_theta);

    let sqrt2 = std::f64::consts::SQRT_2;
    // cos(mφ), sin(mφ) by angle addition
    let (s1, c1) = phi.sin_cos();
    let mut cm = 1.0;
    let mut sm = 0.0;
    let mut trig = Vec::with_capacity(lmax + 1);
    for _ in 0..=lmax {
        trig.push((cm, sm));
        let next_c = cm * c1 - sm * s1;
        let next_s = sm * c1 + cm * s1;
        cm = next_c;
        sm = next_s;
    }

    for l in 0..=lmax {
        let base = l * l + l;
        out[base] = p[tri(l, 0)];
        for m in 1..=l {
            let (c, s) = trig[m];
            let pl = sqrt2 * p[tri(l, m)];
            out[base + m] = pl * c;
            out[base - m] = pl * s;
        }
    }
}

/// Single real harmonic `Y_{l,m}` at the unit vector `v`.
pub fn real_harmonic(l: usize, m: i64, v: [f64; 3]) -> f64 {
    let mut buf = vec![0.0; (l + 1) * (l + 1)];
    real_harmonics_into(l, v, &mut buf);
    let idx = (l * l + l) as i64 + m;
    buf[idx as usize]
}
