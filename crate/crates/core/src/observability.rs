//! Truncated observability constants.
//!
//! On the span of finitely many product modes the observability functional
//!
//! ```text
//! y ↦ ∫_0^T ∫_ω |e^{itF(Δ)} y|²
//! ```
//!
//! is the Hermitian form `b* G b` with
//!
//! ```text
//! G_ab = S_ab · ∫_0^T e^{i(Λ_b − Λ_a)t} dt,     S_ab = ∫_ω Φ_a Φ_b,
//! ```
//!
//! so the truncated constant is the smallest eigenvalue of `G`. Time
//! integrals are closed-form; only the spatial matrix `S` is a quadrature.
//!
//! `S` is a Gram matrix of quadrature-weighted restrictions and the time
//! kernel is a Gram matrix of exponentials, so `G` is their Schur product and
//! is positive semidefinite up to rounding. Nesting the region, extending the
//! horizon, or removing modes therefore moves the smallest eigenvalue
//! monotonically.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{factor_samples, vgcc_check, ControlResolution, ControlVerdict};
use crate::error::{Error, Result};
use crate::gap::gap_report;
use crate::geometry::{FactorPoint, FactorSpectrum};
use crate::linalg::{clamp_psd_minimum, hermitian_eigenvalues, symmetric_eigenvalues};
use crate::quadrature::QuadratureGrid;
use crate::regions::{Region, RegionSlice};
use crate::spectral::{ModeSet, ProductManifold, StateVector, SymbolSpec};

/// Largest Gramian dimension accepted by [`assemble_gramian`].
pub const MAX_GRAMIAN_DIM: usize = 20_000;

/// `∫_0^T e^{i(Λa − Λb)t} dt`, equal to `T` when the frequencies coincide
/// within `tol_eq`.
pub fn time_integral(freq_a: f64, freq_b: f64, horizon: f64, tol_eq: f64) -> Complex64 {
    let delta = freq_a - freq_b;
    if delta.abs() <= tol_eq {
        return Complex64::new(horizon, 0.0);
    }
    // (e^{iΔT} − 1)/(iΔ) = e^{iΔT/2} · 2 sin(ΔT/2)/Δ, without cancellation
    let half = 0.5 * delta * horizon;
    Complex64::from_polar(2.0 * half.sin() / delta, half)
}

/// Hermitian space-time mass matrix over `[0, T] × ω`.
#[derive(Clone, Debug)]
pub struct Gramian {
    matrix: DMatrix<Complex64>,
    spatial: DMatrix<f64>,
    horizon: f64,
}

impl Gramian {
    pub fn from_spatial(modes: &ModeSet, spatial: DMatrix<f64>, horizon: f64) -> Result<Self> {
        let n = modes.len();
        if spatial.nrows() != n || spatial.ncols() != n {
            return Err(Error::LengthMismatch { expected: n, got: spatial.nrows() });
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("time horizon must be positive, got {horizon}")));
        }
        let freq = modes.frequencies();
        let matrix = DMatrix::from_fn(n, n, |a, b| {
            spatial[(a, b)] * time_integral(freq[b], freq[a], horizon, crate::spectral::TOL_EQ)
        });
        Ok(Gramian { matrix, spatial, horizon })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// The spatial factor `S_ab = ∫_ω Φ_a Φ_b`.
    pub fn spatial(&self) -> &DMatrix<f64> {
        &self.spatial
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `b* G b`, the truncated functional `∫_0^T ∫_ω |u|²`.
    pub fn quadratic_form(&self, state: &StateVector) -> Result<f64> {
        let b = state.coefficients();
        if b.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), got: b.len() });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, ba) in b.iter().enumerate() {
            let mut row = Complex64::new(0.0, 0.0);
            for (c, bc) in b.iter().enumerate() {
                row += self.matrix[(a, c)] * bc;
            }
            acc += ba.conj() * row;
        }
        Ok(acc.re)
    }

    /// Gramian of the first `n` modes.
    pub fn leading(&self, n: usize) -> Gramian {
        Gramian {
            matrix: self.matrix.view((0, 0), (n, n)).into_owned(),
            spatial: self.spatial.view((0, 0), (n, n)).into_owned(),
            horizon: self.horizon,
        }
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.matrix[(a, b)] - self.matrix[(b, a)].conj()).norm());
            }
        }
        worst
    }
}

fn basis_rows(spec: &FactorSpectrum, grid: &QuadratureGrid, count: usize) -> Vec<Vec<f64>> {
    grid.nodes()
        .par_iter()
        .map(|p| {
            let mut v = spec.eval_all(p);
            v.truncate(count);
            v
        })
        .collect()
}

/// Factor mass matrix `∫_set φ_i φ_j` for the first `count` basis functions.
fn factor_mass(rows: &[Vec<f64>], grid: &QuadratureGrid, member: impl Fn(&FactorPoint) -> bool, count: usize) -> DMatrix<f64> {
    let kept: Vec<usize> = (0..grid.len()).filter(|&i| member(&grid.nodes()[i])).collect();
    let c = DMatrix::from_fn(kept.len(), count, |r, j| grid.weights()[kept[r]].sqrt() * rows[kept[r]][j]);
    c.tr_mul(&c)
}

/// `S_ab = ∫_ω Φ_a Φ_b` by product quadrature.
///
/// Product regions factor into left and right mass matrices; every other
/// region is integrated slice by slice over the left nodes.
pub fn spatial_mass_matrix(modes: &ModeSet, region: &Region, grid_left: &QuadratureGrid, grid_right: &QuadratureGrid) -> Result<DMatrix<f64>> {
    let product = modes.product();
    if grid_left.manifold() != product.left || grid_right.manifold() != product.right {
        return Err(Error::ManifoldMismatch("quadrature grids do not match the product factors".into()));
    }
    let region = region.validated(product)?;
    let n = modes.len();
    if n > MAX_GRAMIAN_DIM {
        return Err(Error::DimensionOverflow(n));
    }
    let nl = modes.modes().iter().map(|m| m.j + 1).max().unwrap_or(0);
    let nr = modes.modes().iter().map(|m| m.k + 1).max().unwrap_or(0);
    let left_rows = basis_rows(modes.left(), grid_left, nl);
    let right_rows = basis_rows(modes.right(), grid_right, nr);

    if let Region::Product { left, right } = &region {
        let sl = factor_mass(&left_rows, grid_left, |p| left.contains(p), nl);
        let sr = factor_mass(&right_rows, grid_right, |p| right.contains(p), nr);
        let m = modes.modes();
        return Ok(DMatrix::from_fn(n, n, |a, b| sl[(m[a].j, m[b].j)] * sr[(m[a].k, m[b].k)]));
    }

    const BLOCK: usize = 4;
    let idx: Vec<usize> = (0..grid_left.len()).collect();
    let partials: Vec<DMatrix<f64>> = idx
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut acc = DMatrix::<f64>::zeros(n, n);
            for &i in chunk {
                let x = grid_left.nodes()[i];
                let wx = grid_left.weights()[i];
                let mask = region.slice(x).mask(grid_right);
                let kept: Vec<usize> = (0..grid_right.len()).filter(|&q| mask[q]).collect();
                if kept.is_empty() {
                    continue;
                }
                let lv = &left_rows[i];
                let c = DMatrix::from_fn(kept.len(), n, |r, a| {
                    let q = kept[r];
                    let md = modes.modes()[a];
                    (wx * grid_right.weights()[q]).sqrt() * lv[md.j] * right_rows[q][md.k]
                });
                acc += c.tr_mul(&c);
            }
            acc
        })
        .collect();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for p in &partials {
        s += p;
    }
    Ok(s)
}

/// Assembles the space-time Gramian of `modes` over `[0, horizon] × region`.
pub fn assemble_gramian(
    modes: &ModeSet,
    region: &Region,
    horizon: f64,
    grid_left: &QuadratureGrid,
    grid_right: &QuadratureGrid,
) -> Result<Gramian> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("time horizon must be positive, got {horizon}")));
    }
    let s = spatial_mass_matrix(modes, region, grid_left, grid_right)?;
    Gramian::from_spatial(modes, s, horizon)
}

/// Smallest eigenvalue of the Gramian: the observability constant restricted
/// to the truncated span.
pub fn truncated_obs_constant(g: &Gramian) -> Result<f64> {
    clamp_psd_minimum(&hermitian_eigenvalues(&g.matrix)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum G1vMode {
    /// Minimum over all unit eigenfunctions of each eigenspace.
    Eigenspace,
    /// Minimum over basis eigenfunctions only.
    BasisOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G1vEstimate {
    pub value: f64,
    pub mode: G1vMode,
    pub x: FactorPoint,
    pub level: usize,
    /// Minimum over sampled `x` of the level-wise minimum, per level.
    pub per_level: Vec<f64>,
}

/// Mass matrices `∫_mask φ'_m φ'_m'` of every level of `spec`, as flat
/// row-major blocks.
fn level_mass_matrices(spec: &FactorSpectrum, grid: &QuadratureGrid, mask: &[bool]) -> Vec<Vec<f64>> {
    let levels = spec.levels();
    const CHUNK: usize = 256;
    let idx: Vec<usize> = (0..grid.len()).filter(|&q| mask[q]).collect();
    let partials: Vec<Vec<Vec<f64>>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc: Vec<Vec<f64>> = levels.iter().map(|l| vec![0.0; l.multiplicity * l.multiplicity]).collect();
            let mut vals = vec![0.0; spec.basis_len()];
            for &q in chunk {
                let w = grid.weights()[q];
                spec.eval_all_into(&grid.nodes()[q], &mut vals);
                for (lv, m) in levels.iter().zip(acc.iter_mut()) {
                    let v = &vals[lv.offset..lv.offset + lv.multiplicity];
                    let d = lv.multiplicity;
                    for r in 0..d {
                        let wr = w * v[r];
                        for c in r..d {
                            m[r * d + c] += wr * v[c];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total: Vec<Vec<f64>> = levels.iter().map(|l| vec![0.0; l.multiplicity * l.multiplicity]).collect();
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
    }
    for (lv, m) in levels.iter().zip(total.iter_mut()) {
        let d = lv.multiplicity;
        for r in 0..d {
            for c in 0..r {
                m[r * d + c] = m[c * d + r];
            }
        }
    }
    total
}

fn level_minimum(block: &[f64], d: usize, mode: G1vMode) -> Result<f64> {
    Ok(match mode {
        G1vMode::BasisOnly => (0..d).map(|i| block[i * d + i]).fold(f64::INFINITY, f64::min),
        G1vMode::Eigenspace => {
            let m = DMatrix::from_row_slice(d, d, block);
            symmetric_eigenvalues(&m)?[0].max(0.0)
        }
    })
}

/// Estimates `inf_{x, φ'} ∫_{ω_x} φ'²` over the sampled `x` and every level
/// of `right_spectrum`.
pub fn g1v_estimate(
    region: &Region,
    product: ProductManifold,
    right_spectrum: &FactorSpectrum,
    x_samples: &[FactorPoint],
    grid_right: &QuadratureGrid,
    mode: G1vMode,
) -> Result<G1vEstimate> {
    if x_samples.is_empty() {
        return Err(Error::InvalidArgument("g1v needs at least one sample point".into()));
    }
    if right_spectrum.manifold() != product.right || grid_right.manifold() != product.right {
        return Err(Error::ManifoldMismatch("spectrum and grid must live on the right factor".into()));
    }
    let region = region.validated(product)?;
    let n_levels = right_spectrum.levels().len();
    let mut cache: HashMap<Vec<bool>, Vec<f64>> = HashMap::new();
    let mut per_level = vec![f64::INFINITY; n_levels];
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for (xi, x) in x_samples.iter().enumerate() {
        let mask = region.slice(*x).mask(grid_right);
        if !cache.contains_key(&mask) {
            let blocks = level_mass_matrices(right_spectrum, grid_right, &mask);
            let mins = right_spectrum
                .levels()
                .iter()
                .zip(&blocks)
                .map(|(lv, b)| level_minimum(b, lv.multiplicity, mode))
                .collect::<Result<Vec<f64>>>()?;
            cache.insert(mask.clone(), mins);
        }
        let mins = &cache[&mask];
        for (k, &v) in mins.iter().enumerate() {
            per_level[k] = per_level[k].min(v);
            if v < best.0 {
                best = (v, xi, k);
            }
        }
    }
    Ok(G1vEstimate { value: best.0, mode, x: x_samples[best.1], level: best.2, per_level })
}

/// One term `a_{k,m} φ'_m e^{iΛ_{k,m} t}` of a slice expansion: left level
/// `k`, right basis index `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceTerm {
    pub left_level: usize,
    pub right_index: usize,
    pub frequency: f64,
}

/// Distinct `(left level, right basis index)` pairs of `modes`, in mode
/// order, keeping at most `n`.
pub fn slice_family(modes: &ModeSet, n: usize) -> Result<Vec<SliceTerm>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for m in modes.modes() {
        let k = modes.left().level_of(m.j)?;
        if seen.insert((k, m.k)) {
            out.push(SliceTerm { left_level: k, right_index: m.k, frequency: m.frequency });
            if out.len() == n {
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceCheckReport {
    pub horizon: f64,
    /// Integration window `[0, 2T]`.
    pub window: f64,
    #[serde(with = "crate::output::infinite_as_null")]
    pub gap_constant: f64,
    pub n_terms: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub passed: bool,
}

/// Checks `∫_0^{2T} ∫_{ω_x} |Σ a_{k,m} φ'_m e^{iΛ_{k,m} t}|² ≥ A/2` with
/// `A = Σ |a_{k,m}|² ∫_{ω_x} φ'_m²` on seeded complex Gaussian coefficients.
///
/// Requires `T ≥ 4 / C_0`, where `C_0` is the gap of the family frequencies.
#[allow(clippy::too_many_arguments)]
pub fn verify_slice_inequality(
    family: &[SliceTerm],
    right_spectrum: &FactorSpectrum,
    slice: &RegionSlice<'_>,
    horizon: f64,
    gap_constant: f64,
    grid_right: &QuadratureGrid,
    n_trials: usize,
    seed: u64,
) -> Result<SliceCheckReport> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be >= 1".into()));
    }
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty slice family".into()));
    }
    if horizon * gap_constant < 4.0 * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "horizon {horizon} is below 4 / C_0 = {}",
            4.0 / gap_constant
        )));
    }
    let nr = family.iter().map(|t| t.right_index + 1).max().unwrap();
    if nr > right_spectrum.basis_len() {
        return Err(Error::IndexOutOfRange { index: nr - 1, len: right_spectrum.basis_len() });
    }
    let rows = basis_rows(right_spectrum, grid_right, nr);
    let mass = factor_mass(&rows, grid_right, |q| slice.contains(q), nr);

    let n = family.len();
    let window = 2.0 * horizon;
    let g = DMatrix::from_fn(n, n, |p, q| {
        mass[(family[p].right_index, family[q].right_index)]
            * time_integral(family[q].frequency, family[p].frequency, window, crate::spectral::TOL_EQ)
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(n_trials);
    let mut passed = true;
    for _ in 0..n_trials {
        let a = StateVector::random(n, &mut rng);
        let a = a.coefficients();
        let mut lhs = Complex64::new(0.0, 0.0);
        for p in 0..n {
            for q in 0..n {
                lhs += a[p].conj() * g[(p, q)] * a[q];
            }
        }
        let lhs = lhs.re;
        let big_a: f64 = (0..n).map(|p| a[p].norm_sqr() * mass[(family[p].right_index, family[p].right_index)]).sum();
        if lhs < 0.5 * big_a - 1e-9 * big_a {
            passed = false;
        }
        ratios.push(if big_a > 0.0 { lhs / big_a } else { f64::INFINITY });
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SliceCheckReport { horizon, window, gap_constant, n_terms: n, n_trials, seed, ratios, min_ratio, passed })
}

/// Inputs of the full observability pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservabilityConfig {
    pub product: ProductManifold,
    pub symbol: SymbolSpec,
    pub cutoffs: Vec<f64>,
    pub region: Region,
    pub horizon: f64,
    pub grid_left: Vec<usize>,
    pub grid_right: Vec<usize>,
    pub control: ControlResolution,
    /// Number of left base points used by the g₁ᵛ estimate.
    pub g1v_samples: usize,
    pub tol_eq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffPoint {
    pub lambda_max: f64,
    pub n_modes: usize,
    pub lambda_min: f64,
    pub g1v: f64,
    #[serde(with = "crate::output::infinite_as_null")]
    pub gap_constant: f64,
    pub vgcc: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservabilityReport {
    /// Truncated constant at the largest cutoff.
    pub lambda_min: f64,
    /// Eigenspace estimate of g₁ᵛ at the largest cutoff.
    pub g1v: f64,
    pub g1v_basis_only: f64,
    #[serde(with = "crate::output::infinite_as_null")]
    pub gap_constant: f64,
    pub vgcc: ControlVerdict,
    /// `4 / C_0`: horizon above which the slice inequality applies.
    #[serde(with = "crate::output::infinite_as_null")]
    pub t_star: f64,
    pub series: Vec<CutoffPoint>,
}

/// Runs the control check, gap analysis, g₁ᵛ estimate and Gramian
/// eigenvalue at every cutoff.
pub fn obs_report(cfg: &ObservabilityConfig) -> Result<ObservabilityReport> {
    if cfg.cutoffs.is_empty() {
        return Err(Error::InvalidArgument("at least one cutoff is required".into()));
    }
    let mut cutoffs = cfg.cutoffs.clone();
    cutoffs.sort_by(f64::total_cmp);
    let top = *cutoffs.last().unwrap();
    let grid_left = QuadratureGrid::new(cfg.product.left, &cfg.grid_left)?;
    let grid_right = QuadratureGrid::new(cfg.product.right, &cfg.grid_right)?;
    let region = cfg.region.validated(cfg.product)?;

    let vgcc = vgcc_check(cfg.product, &region, cfg.horizon, &cfg.control)?;
    let xs = factor_samples(cfg.product.left, cfg.g1v_samples.max(1));

    // mode sets at smaller cutoffs are prefixes of the largest one
    let full = cfg.symbol.mode_set(cfg.product, top, cfg.tol_eq)?;
    let gram = assemble_gramian(&full, &region, cfg.horizon, &grid_left, &grid_right)?;

    let mut series = Vec::with_capacity(cutoffs.len());
    let mut top_g1v = None;
    for &cut in &cutoffs {
        let modes = cfg.symbol.mode_set(cfg.product, cut, cfg.tol_eq)?;
        let n = modes.len();
        debug_assert!(modes.modes().iter().zip(full.modes()).all(|(a, b)| a == b));
        let lambda_min = truncated_obs_constant(&gram.leading(n))?;
        let gap = gap_report(&modes.frequencies(), cfg.tol_eq)?;
        let right = FactorSpectrum::build(cfg.product.right, cut)?;
        let g1v = g1v_estimate(&region, cfg.product, &right, &xs, &grid_right, G1vMode::Eigenspace)?;
        if cut == top {
            let basis = g1v_estimate(&region, cfg.product, &right, &xs, &grid_right, G1vMode::BasisOnly)?;
            top_g1v = Some((g1v.value, basis.value));
        }
        series.push(CutoffPoint {
            lambda_max: cut,
            n_modes: n,
            lambda_min,
            g1v: g1v.value,
            gap_constant: gap.gap_constant,
            vgcc: vgcc.satisfied,
        });
    }
    let last = series.last().unwrap();
    let (g1v, g1v_basis_only) = top_g1v.unwrap();
    Ok(ObservabilityReport {
        lambda_min: last.lambda_min,
        g1v,
        g1v_basis_only,
        gap_constant: last.gap_constant,
        t_star: 4.0 / last.gap_constant,
        vgcc,
        series,
    })
}
