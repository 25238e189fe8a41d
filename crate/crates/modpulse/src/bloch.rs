//! Bloch eigenvalue problem for the operator -(d/dx + il)^2 + ρ(x) on [0, 2π).
//!
//! For each quasimomentum l in the Brillouin zone (-1/2, 1/2] the operator has
//! a discrete spectrum ω_n(l)² > 0 with 2π-periodic eigenfunctions f_n(l,·).
//! In the Fourier basis the operator becomes the real symmetric matrix
//!
//!   M(l)_{jk} = (k+l)² δ_{jk} + ρ̂_{j-k},
//!
//! truncated to |k| ≤ K. Band derivatives come from perturbation identities
//! rather than differencing: the group velocity c_g = ω_n'(l) satisfies
//! ω c_g = l - ⟨f, i f'⟩, the eigenfunction derivative ∂_l f solves a bordered
//! singular system, and ω'' follows from a second projection identity. All
//! three are gauge-invariant, which the tests exercise explicitly.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, Solve, UPLO};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::coeff::PeriodicCoefficient;
use crate::error::{Error, Result};
use crate::fourier::{self, dim, modes, TWO_PI};

/// Bands closer than this (in ω) are treated as degenerate; the derivative
/// identities assume a simple eigenvalue.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// One eigenpair of the Bloch matrix: raw eigenvalue λ = ω², its positive
/// square root, and the unit eigenfunction in the integral normalization
/// 2π Σ|f̂_k|² = 1 with the largest coefficient rotated real positive.
#[derive(Debug, Clone)]
pub struct BandEig {
    pub lambda: f64,
    pub omega: f64,
    pub f_hat: Array1<Complex64>,
}

/// A fully resolved point (n, l) on a simple band: eigenfunction, its
/// l-derivative in the gauge ⟨f, ∂_l f⟩ = 0, and the first two ω-derivatives.
#[derive(Debug, Clone)]
pub struct BlochPoint {
    pub n: usize,
    pub l: f64,
    pub k_max: usize,
    pub omega: f64,
    /// Raw matrix eigenvalue ω²; kept separately so downstream operator
    /// assembly can reuse it bit-for-bit instead of re-squaring the root.
    pub omega_sq: f64,
    pub f_hat: Array1<Complex64>,
    pub dlf_hat: Array1<Complex64>,
    pub cg: f64,
    pub omega_pp: f64,
}

/// Maps any real quasimomentum into the Brillouin zone (-1/2, 1/2].
pub fn reduce_to_brillouin(l: f64) -> f64 {
    let mut r = l - l.round();
    if r <= -0.5 {
        r += 1.0;
    }
    r
}

/// Builds the truncated Bloch matrix M(l) over modes -K..K.
pub fn assemble_bloch_matrix(
    rho: &PeriodicCoefficient,
    l: f64,
    k_max: usize,
) -> Result<Array2<f64>> {
    if k_max < 1 {
        return Err(Error::invalid("bloch matrix requires K >= 1"));
    }
    if !l.is_finite() || l.abs() > 0.5 + 1e-12 {
        return Err(Error::invalid(format!(
            "quasimomentum l = {l} outside the Brillouin zone [-1/2, 1/2]"
        )));
    }
    if rho.degree() > 2 * k_max {
        return Err(Error::invalid(format!(
            "coefficient harmonic {} exceeds 2K = {}; raise K to avoid aliasing",
            rho.degree(),
            2 * k_max
        )));
    }
    let mut m = fourier::convolution_matrix(rho, k_max);
    for (i, k) in modes(k_max).enumerate() {
        m[[i, i]] += (k as f64 + l).powi(2);
    }
    Ok(m)
}

/// Diagonalizes a Bloch matrix; returns eigenpairs sorted ascending in ω,
/// gauge-fixed and normalized. Fails if any eigenvalue is nonpositive
/// (excluded for strictly positive ρ) or the eigensolver does not converge.
pub fn solve_bands(matrix: &Array2<f64>) -> Result<Vec<BandEig>> {
    let (vals, vecs) = matrix.eigh(UPLO::Lower)?;
    let n = vals.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let lambda = vals[j];
        if lambda <= 0.0 {
            return Err(Error::numerical(format!(
                "nonpositive Bloch eigenvalue {lambda:.3e}; coefficient not admissible"
            )));
        }
        let mut f_hat: Array1<Complex64> = vecs
            .column(j)
            .iter()
            .map(|&v| Complex64::new(v / TWO_PI.sqrt(), 0.0))
            .collect();
        apply_gauge(&mut f_hat);
        // Defensive residual guard on the returned pair.
        let mut r = 0.0f64;
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += matrix[[i, k]] * vecs[[k, j]];
            }
            let d = acc - lambda * vecs[[i, j]];
            r += d * d;
        }
        let r = r.sqrt();
        if r > 1e-10 * lambda.max(1.0) {
            return Err(Error::numerical(format!(
                "eigenpair residual {r:.3e} exceeds tolerance"
            )));
        }
        out.push(BandEig {
            lambda,
            omega: lambda.sqrt(),
            f_hat,
        });
    }
    Ok(out)
}

/// Rotates the largest-modulus coefficient to be real positive. Ties break on
/// the first maximal index so the gauge is deterministic.
pub fn apply_gauge(f_hat: &mut Array1<Complex64>) {
    let mut best = 0usize;
    let mut best_mod = -1.0f64;
    for (i, z) in f_hat.iter().enumerate() {
        let m = z.norm();
        if m > best_mod + 1e-300 {
            best_mod = m;
            best = i;
        }
    }
    if best_mod > 0.0 {
        let phase = f_hat[best] / best_mod;
        let rot = phase.conj();
        f_hat.mapv_inplace(|z| z * rot);
    }
}

/// Group velocity c_g = (l - ⟨f, i f'⟩)/ω with ⟨f, i f'⟩ = -2π Σ_k k |f̂_k|².
/// Manifestly gauge-invariant: only |f̂_k|² enters.
pub fn group_velocity(l: f64, omega: f64, f_hat: &Array1<Complex64>, k_max: usize) -> f64 {
    let mut s = 0.0;
    for (i, k) in modes(k_max).enumerate() {
        s += k as f64 * f_hat[i].norm_sqr();
    }
    (l + TWO_PI * s) / omega
}

/// Solves the bordered system for ∂_l f in the gauge ⟨f, ∂_l f⟩ = 0.
///
/// The singular system (M - ω²I) ∂_l f = 2(ω c_g - (k+l)) f̂ is augmented by
/// one row/column: the row enforces the gauge, the column absorbs the
/// Fredholm multiplier. Compatibility of the right side with ker(M - ω²I) is
/// exactly the group-velocity identity, so the multiplier vanishes up to
/// roundoff; its size is checked as the equation residual.
pub fn dl_eigenfunction(
    rho: &PeriodicCoefficient,
    l: f64,
    k_max: usize,
    eig: &BandEig,
    cg: f64,
) -> Result<Array1<Complex64>> {
    let m = assemble_bloch_matrix(rho, l, k_max)?;
    let n = dim(k_max);
    let mut a: Array2<Complex64> = Array2::zeros((n + 1, n + 1));
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] = Complex64::new(m[[i, j]], 0.0);
        }
        a[[i, i]] -= Complex64::new(eig.lambda, 0.0);
        a[[i, n]] = eig.f_hat[i];
        a[[n, i]] = eig.f_hat[i].conj();
    }
    let mut rhs: Array1<Complex64> = Array1::zeros(n + 1);
    for (i, k) in modes(k_max).enumerate() {
        rhs[i] = 2.0 * (eig.omega * cg - (k as f64 + l)) * eig.f_hat[i];
    }
    let sol = a.solve_into(rhs).map_err(|e| {
        Error::numerical(format!(
            "bordered derivative system singular (eigenvalue multiplicity?): {e}"
        ))
    })?;
    let dlf: Array1<Complex64> = sol.slice(ndarray::s![..n]).to_owned();
    // Residual of the unbordered equation equals |multiplier|·‖f‖.
    let mut res = 0.0f64;
    for (i, k) in modes(k_max).enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += m[[i, j]] * dlf[j];
        }
        acc -= eig.lambda * dlf[i];
        acc -= 2.0 * (eig.omega * cg - (k as f64 + l)) * eig.f_hat[i];
        res += acc.norm_sqr();
    }
    if res.sqrt() > 1e-8 {
        return Err(Error::numerical(format!(
            "derivative equation residual {:.3e} exceeds 1e-8",
            res.sqrt()
        )));
    }
    Ok(dlf)
}

/// Second band derivative from the projection identity
/// ω ω'' = 1 - c_g² - 2(ω c_g - l) Re⟨f, ∂_l f⟩ - 2 Re⟨f, i ∂_l f'⟩.
pub fn omega_second_derivative(
    l: f64,
    omega: f64,
    cg: f64,
    f_hat: &Array1<Complex64>,
    dlf_hat: &Array1<Complex64>,
    k_max: usize,
) -> f64 {
    let p = fourier::inner(f_hat, dlf_hat).re;
    let mut q = Complex64::new(0.0, 0.0);
    for (i, k) in modes(k_max).enumerate() {
        q += (k as f64) * f_hat[i].conj() * dlf_hat[i];
    }
    let q = -(TWO_PI) * q.re;
    (1.0 - cg * cg - 2.0 * (omega * cg - l) * p - 2.0 * q) / omega
}

impl BlochPoint {
    /// Resolves band n at quasimomentum l: eigenpair, simplicity check,
    /// group velocity, ∂_l f, and ω''.
    pub fn compute(rho: &PeriodicCoefficient, n: usize, l: f64, k_max: usize) -> Result<Self> {
        let matrix = assemble_bloch_matrix(rho, l, k_max)?;
        let bands = solve_bands(&matrix)?;
        if n >= bands.len() {
            return Err(Error::invalid(format!(
                "band index {n} out of range for K = {k_max}"
            )));
        }
        let sep = nearest_separation(&bands, n);
        if sep <= DEGENERACY_TOL {
            return Err(Error::numerical(format!(
                "band {n} at l = {l} is degenerate within {sep:.3e}; derivative identities invalid"
            )));
        }
        let eig = bands[n].clone();
        let cg = group_velocity(l, eig.omega, &eig.f_hat, k_max);
        let dlf_hat = dl_eigenfunction(rho, l, k_max, &eig, cg)?;
        let omega_pp = omega_second_derivative(l, eig.omega, cg, &eig.f_hat, &dlf_hat, k_max);
        Ok(Self {
            n,
            l,
            k_max,
            omega: eig.omega,
            omega_sq: eig.lambda,
            f_hat: eig.f_hat,
            dlf_hat,
            cg,
            omega_pp,
        })
    }
}

fn nearest_separation(bands: &[BandEig], n: usize) -> f64 {
    let mut sep = f64::INFINITY;
    for (j, b) in bands.iter().enumerate() {
        if j != n {
            sep = sep.min((b.omega - bands[n].omega).abs());
        }
    }
    sep
}

/// One row of a band-structure sweep. Derivatives are absent at points where
/// the band is numerically degenerate.
#[derive(Debug, Clone)]
pub struct BandRow {
    pub l: f64,
    pub n: usize,
    pub omega: f64,
    pub cg: Option<f64>,
    pub omega_pp: Option<f64>,
}

/// Sweeps the lowest `n_bands` bands over an l-grid (parallel over l).
///
/// With `track` set, band indices are reassigned after the solve so that each
/// index follows the eigenvector with maximal overlap from the previous grid
/// point, letting curves pass through crossings instead of being re-sorted by
/// magnitude at every l.
pub fn band_sweep(
    rho: &PeriodicCoefficient,
    l_values: &[f64],
    n_bands: usize,
    k_max: usize,
    track: bool,
) -> Result<Vec<BandRow>> {
    if n_bands == 0 || n_bands > dim(k_max) {
        return Err(Error::invalid(format!(
            "n_bands = {n_bands} out of range for K = {k_max}"
        )));
    }
    let per_l: Vec<(f64, Vec<BandEig>)> = l_values
        .par_iter()
        .map(|&l| {
            let m = assemble_bloch_matrix(rho, l, k_max)?;
            Ok((l, solve_bands(&m)?))
        })
        .collect::<Result<Vec<_>>>()?;

    // Per-l permutation of band slots; identity unless tracking.
    let mut orders: Vec<Vec<usize>> = Vec::with_capacity(per_l.len());
    for (step, (_, bands)) in per_l.iter().enumerate() {
        if !track || step == 0 {
            orders.push((0..n_bands).collect());
            continue;
        }
        let (_, prev_bands) = &per_l[step - 1];
        let prev_order = &orders[step - 1];
        let mut taken = vec![false; n_bands];
        let mut order = vec![usize::MAX; n_bands];
        for slot in 0..n_bands {
            let prev_vec = &prev_bands[prev_order[slot]].f_hat;
            let mut best = usize::MAX;
            let mut best_ov = -1.0;
            for (cand, b) in bands.iter().enumerate().take(n_bands) {
                if taken[cand] {
                    continue;
                }
                let ov = fourier::inner(prev_vec, &b.f_hat).norm();
                if ov > best_ov {
                    best_ov = ov;
                    best = cand;
                }
            }
            order[slot] = best;
            taken[best] = true;
        }
        orders.push(order);
    }

    let mut rows = Vec::with_capacity(per_l.len() * n_bands);
    for (step, (l, bands)) in per_l.iter().enumerate() {
        for slot in 0..n_bands {
            let idx = orders[step][slot];
            let eig = &bands[idx];
            let simple = nearest_separation(bands, idx) > DEGENERACY_TOL;
            let (cg, omega_pp) = if simple {
                let cg = group_velocity(*l, eig.omega, &eig.f_hat, k_max);
                match dl_eigenfunction(rho, *l, k_max, eig, cg) {
                    Ok(dlf) => (
                        Some(cg),
                        Some(omega_second_derivative(
                            *l, eig.omega, cg, &eig.f_hat, &dlf, k_max,
                        )),
                    ),
                    Err(_) => (Some(cg), None),
                }
            } else {
                (None, None)
            };
            rows.push(BandRow {
                l: *l,
                n: slot,
                omega: eig.omega,
                cg,
                omega_pp,
            });
        }
    }
    Ok(rows)
}
