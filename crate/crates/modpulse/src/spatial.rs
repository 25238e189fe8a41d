//! Spatial-dynamics operators of the comoving ansatz.
//!
//! Inserting u = Σ_m U_m(ξ, x) e^{im(l₀x - ωt)} with ξ = x - ct into the wave
//! equation and rewriting ∂_ξ as the evolution direction yields, per harmonic
//! m, a first-order system ∂_ξ(V, W) = A_m(ω, c)(V, W) with
//!
//!   A_m = [[0, I], [L_m, M_m]],
//!   L_m = (1-c²)^{-1}[diag((k+ml₀)²) + ρ̂-convolution - m²ω² I],
//!   M_m = 2(1-c²)^{-1} i·diag(mcω - (k+ml₀)).
//!
//! The spectrum of A_m decides which harmonics carry hyperbolic directions.
//! For a constant ρ the operator is block-diagonal over Fourier modes and the
//! per-mode quadratics are solved in closed form, which keeps the double zero
//! eigenvalue of the carrier block exact instead of letting a dense QR solver
//! split it by ~√machine-eps.

use ndarray::Array2;
use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::bloch::BlochPoint;
use crate::coeff::PeriodicCoefficient;
use crate::error::{Error, Result};
use crate::fourier::{self, dim, modes};

/// Eigenvalues with |Re λ| at or below this are classified as center.
pub const CLASS_TOL: f64 = 1e-8;

/// Dense-path eigenvectors with at least this relative mass on the outermost
/// Fourier shell are discarded as truncation artifacts.
pub const EDGE_MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SpectralClass {
    Stable,
    Center,
    Unstable,
}

impl SpectralClass {
    pub fn of(lambda: Complex64) -> Self {
        if lambda.re > CLASS_TOL {
            SpectralClass::Unstable
        } else if lambda.re < -CLASS_TOL {
            SpectralClass::Stable
        } else {
            SpectralClass::Center
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralPoint {
    pub lambda: Complex64,
    pub class: SpectralClass,
    /// Fourier mode carrying the eigenvector, when the operator decouples.
    pub mode: Option<i64>,
}

/// Truncated A_m together with the data needed to reassemble and perturb it.
/// `bm` is the frequency-shift block: replacing ω by ω + δ changes the
/// operator by δ(1-c²)^{-1}·bm + O(δ²), with bm = [[0,0],[-2m²ω I, 2imc I]].
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    pub m: u32,
    pub omega: f64,
    /// Raw ω² used in the assembly; at a Bloch point this is the eigenvalue
    /// itself so the carrier diagonal entry of L_1 cancels exactly.
    pub omega_sq: f64,
    pub c: f64,
    pub l0: f64,
    pub k_max: usize,
    pub rho: PeriodicCoefficient,
    pub matrix: Array2<Complex64>,
    pub bm: Array2<Complex64>,
}

/// Assembles A_m(ω, c) over modes -K..K. `omega_sq` must be ω² (callers at a
/// Bloch point pass the raw eigenvalue; see [`SpatialOperator::at_bloch_point`]).
pub fn assemble_am(
    rho: &PeriodicCoefficient,
    m: u32,
    omega: f64,
    omega_sq: f64,
    c: f64,
    l0: f64,
    k_max: usize,
) -> Result<SpatialOperator> {
    if m == 0 || m % 2 == 0 {
        return Err(Error::invalid(format!("harmonic index m = {m} must be odd")));
    }
    if c.abs() >= 1.0 - 1e-10 {
        return Err(Error::invalid(format!(
            "|c| = {} too close to the characteristic speed 1",
            c.abs()
        )));
    }
    if k_max < 1 || rho.degree() > 2 * k_max {
        return Err(Error::invalid("truncation K too small for the coefficient"));
    }
    let n = dim(k_max);
    let mf = m as f64;
    let ml0 = mf * l0;
    let mm = mf * mf;
    let inv = 1.0 / (1.0 - c * c);
    // Mirror the Bloch assembly order (convolution entry, then + (k+ml₀)²)
    // so the carrier diagonal cancels bit-for-bit against ω².
    let mut lblock = fourier::convolution_matrix(rho, k_max);
    for (i, k) in modes(k_max).enumerate() {
        lblock[[i, i]] += (k as f64 + ml0).powi(2);
        lblock[[i, i]] -= mm * omega_sq;
    }
    let mut matrix: Array2<Complex64> = Array2::zeros((2 * n, 2 * n));
    let mut bm: Array2<Complex64> = Array2::zeros((2 * n, 2 * n));
    for (i, k) in modes(k_max).enumerate() {
        matrix[[i, n + i]] = Complex64::new(1.0, 0.0);
        for j in 0..n {
            matrix[[n + i, j]] = Complex64::new(inv * lblock[[i, j]], 0.0);
        }
        matrix[[n + i, n + i]] = Complex64::new(0.0, 2.0 * inv * (mf * c * omega - (k as f64 + ml0)));
        bm[[n + i, i]] = Complex64::new(-2.0 * mm * omega, 0.0);
        bm[[n + i, n + i]] = Complex64::new(0.0, 2.0 * mf * c);
    }
    Ok(SpatialOperator {
        m,
        omega,
        omega_sq,
        c,
        l0,
        k_max,
        rho: rho.clone(),
        matrix,
        bm,
    })
}

impl SpatialOperator {
    /// A_m at the carrier's (ω₀, c_g), reusing the raw Bloch eigenvalue.
    pub fn at_bloch_point(rho: &PeriodicCoefficient, m: u32, point: &BlochPoint) -> Result<Self> {
        assemble_am(rho, m, point.omega, point.omega_sq, point.cg, point.l, point.k_max)
    }

    pub fn block_dim(&self) -> usize {
        dim(self.k_max)
    }
}

/// Roots of λ² - mλ - l = 0, larger-magnitude root first, computed without
/// cancellation (second root from the product identity λ₁λ₂ = -l).
pub fn quadratic_roots(m: Complex64, l: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    if m == zero && l == zero {
        return (zero, zero);
    }
    let disc = (m * m + 4.0 * l).sqrt();
    let cand1 = (m + disc) * 0.5;
    let cand2 = (m - disc) * 0.5;
    let big = if cand1.norm() >= cand2.norm() { cand1 } else { cand2 };
    if big == zero {
        return (zero, zero);
    }
    (big, -l / big)
}

/// Scalar dispersion residual of an eigenpair: with V the first block of the
/// eigenvector, ‖[diag((k+ml₀-iλ)²) + ρ̂-conv - (mω-icλ)²] V‖ / ‖V‖.
pub fn dispersion_residual(op: &SpatialOperator, lambda: Complex64, v: &[Complex64]) -> f64 {
    let ml0 = op.m as f64 * op.l0;
    let shift = (op.m as f64 * op.omega - Complex64::i() * op.c * lambda).powi(2);
    let mut nrm = 0.0f64;
    let mut res = 0.0f64;
    for (i, k) in modes(op.k_max).enumerate() {
        nrm += v[i].norm_sqr();
        let sym = (Complex64::new(k as f64 + ml0, 0.0) - Complex64::i() * lambda).powi(2);
        let mut acc = (sym - shift) * v[i];
        for (j, kk) in modes(op.k_max).enumerate() {
            let w = op.rho.exp_coeff(k - kk);
            if w != 0.0 {
                acc += w * v[j];
            }
        }
        res += acc.norm_sqr();
    }
    if nrm == 0.0 {
        return f64::INFINITY;
    }
    (res / nrm).sqrt()
}

/// Spectrum of A_m with center/stable/unstable classification.
///
/// Constant coefficient: per-mode 2×2 companion blocks solved by the stable
/// quadratic formula (machine-precision eigenvalues, exact Jordan zero).
/// General coefficient: dense nonsymmetric eigensolve with edge-mode
/// filtering. Both paths verify the scalar dispersion residual ≤ 1e-6.
pub fn spectrum(op: &SpatialOperator) -> Result<Vec<SpectralPoint>> {
    if op.rho.is_constant() {
        structured_spectrum(op)
    } else {
        dense_spectrum(op)
    }
}

fn structured_spectrum(op: &SpatialOperator) -> Result<Vec<SpectralPoint>> {
    let n = op.block_dim();
    let mut out = Vec::with_capacity(2 * n);
    for (i, k) in modes(op.k_max).enumerate() {
        let l_k = op.matrix[[n + i, i]];
        let m_k = op.matrix[[n + i, n + i]];
        let (a, b) = quadratic_roots(m_k, l_k);
        for lambda in [a, b] {
            let v = single_mode(op.k_max, i);
            let r = dispersion_residual(op, lambda, &v);
            if r > 1e-6 {
                return Err(Error::numerical(format!(
                    "mode {k} root {lambda} fails the dispersion residual: {r:.3e}"
                )));
            }
            out.push(SpectralPoint {
                lambda,
                class: SpectralClass::of(lambda),
                mode: Some(k),
            });
        }
    }
    Ok(out)
}

fn single_mode(k_max: usize, i: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); dim(k_max)];
    v[i] = Complex64::new(1.0, 0.0);
    v
}

fn dense_spectrum(op: &SpatialOperator) -> Result<Vec<SpectralPoint>> {
    let (vals, vecs) = op.matrix.eig()?;
    let n = op.block_dim();
    let edge = [0usize, n - 1, n, 2 * n - 1];
    let mut out = Vec::with_capacity(2 * n);
    for (j, &lambda) in vals.iter().enumerate() {
        let v = vecs.column(j);
        let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let edge_mass: f64 = edge.iter().map(|&i| v[i].norm_sqr()).sum::<f64>() / total;
        if edge_mass >= EDGE_MASS_TOL {
            continue;
        }
        // Defensive eigenpair residual.
        let mut res = 0.0f64;
        for i in 0..2 * n {
            let mut acc = -lambda * v[i];
            for l in 0..2 * n {
                acc += op.matrix[[i, l]] * v[l];
            }
            res += acc.norm_sqr();
        }
        if res.sqrt() > 1e-8 * total.sqrt() {
            return Err(Error::numerical(format!(
                "eigenpair residual {:.3e} for lambda = {lambda}",
                res.sqrt()
            )));
        }
        let vblock: Vec<Complex64> = v.iter().take(n).copied().collect();
        let r = dispersion_residual(op, lambda, &vblock);
        if r > 1e-6 {
            return Err(Error::numerical(format!(
                "dispersion residual {r:.3e} for lambda = {lambda}"
            )));
        }
        out.push(SpectralPoint {
            lambda,
            class: SpectralClass::of(lambda),
            mode: None,
        });
    }
    Ok(out)
}

/// Closed-form spectrum of A_m for the constant medium ρ ≡ 1 with carrier
/// exponent n₀: per κ = k - m·n₀,
///
///   λ = -iκω₀² ± iω₀√((m - κs)² - 1),   s = n₀ + l₀,  ω₀ = √(1+s²),
///
/// purely imaginary when (m-κs)² ≥ 1 and an off-axis pair with
/// Im λ = -κω₀² otherwise.
pub fn closed_form_eigenvalues(
    m: u32,
    n0: i64,
    l0: f64,
    kappa_range: std::ops::RangeInclusive<i64>,
) -> Vec<SpectralPoint> {
    let s = n0 as f64 + l0;
    let w0sq = 1.0 + s * s;
    let w0 = w0sq.sqrt();
    let mut out = Vec::new();
    for kappa in kappa_range {
        let a = m as f64 - kappa as f64 * s;
        let d = a * a - 1.0;
        let base_im = -(kappa as f64) * w0sq;
        let pair = if d >= 0.0 {
            let r = w0 * d.sqrt();
            [
                Complex64::new(0.0, base_im + r),
                Complex64::new(0.0, base_im - r),
            ]
        } else {
            let r = w0 * (-d).sqrt();
            [Complex64::new(r, base_im), Complex64::new(-r, base_im)]
        };
        for lambda in pair {
            out.push(SpectralPoint {
                lambda,
                class: SpectralClass::of(lambda),
                mode: Some(kappa + m as i64 * n0),
            });
        }
    }
    out
}

/// One-sided Hausdorff distance: sup over `from` of the distance to `to`.
pub fn one_sided_hausdorff(from: &[Complex64], to: &[Complex64]) -> f64 {
    from.iter()
        .map(|a| {
            to.iter()
                .map(|b| (a - b).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn const_one() -> PeriodicCoefficient {
        PeriodicCoefficient::constant(1.0).unwrap()
    }

    fn anchor_point() -> BlochPoint {
        BlochPoint::compute(&const_one(), 0, 0.35, 32).unwrap()
    }

    fn anchor_op(m: u32) -> SpatialOperator {
        SpatialOperator::at_bloch_point(&const_one(), m, &anchor_point()).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        let rho = const_one();
        assert!(assemble_am(&rho, 2, 1.0, 1.0, 0.3, 0.35, 8).is_err());
        assert!(assemble_am(&rho, 1, 1.0, 1.0, 1.0, 0.35, 8).is_err());
        assert!(assemble_am(&rho, 1, 1.0, 1.0, -0.9999999999999, 0.35, 8).is_err());
        assert!(assemble_am(&rho, 1, 1.0, 1.0, 0.999, 0.35, 8).is_ok());
    }

    #[test]
    fn block_structure_and_scaling() {
        let rho = PeriodicCoefficient::new(vec![1.0, 0.3], "rho").unwrap();
        let point = BlochPoint::compute(&rho, 0, 0.35, 12).unwrap();
        let op = SpatialOperator::at_bloch_point(&rho, 3, &point).unwrap();
        let n = op.block_dim();
        let c2 = 1.0 - op.c * op.c;
        for (i, k) in modes(op.k_max).enumerate() {
            // Identity block.
            assert_eq!(op.matrix[[i, n + i]], Complex64::new(1.0, 0.0));
            // Rescaling the L row by (1-c²) recovers the raw Hill-type row.
            let raw = op.matrix[[n + i, i]].re * c2;
            let expect = rho.exp_coeff(0) + (k as f64 + 3.0 * op.l0).powi(2) - 9.0 * op.omega_sq;
            assert_abs_diff_eq!(raw, expect, epsilon = 1e-12);
            // M block is purely imaginary diagonal.
            assert_eq!(op.matrix[[n + i, n + i]].re, 0.0);
        }
        // Non-hermitian for c ≠ 0.
        let mut dev = 0.0f64;
        for i in 0..2 * n {
            for j in 0..2 * n {
                dev = dev.max((op.matrix[[i, j]] - op.matrix[[j, i]].conj()).norm());
            }
        }
        assert!(dev > 0.1);
    }

    #[test]
    fn quadratic_roots_solve_polynomial() {
        let cases = [
            (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.7)),
            (Complex64::new(0.0, 0.0), Complex64::new(-4.0, 0.0)),
            (Complex64::new(1e-8, 0.0), Complex64::new(0.0, 0.0)),
        ];
        for (m, l) in cases {
            let (a, b) = quadratic_roots(m, l);
            for r in [a, b] {
                assert!((r * r - m * r - l).norm() < 1e-12 * (1.0 + r.norm_sqr()));
            }
            assert!((a + b - m).norm() < 1e-12);
        }
        assert_eq!(
            quadratic_roots(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        );
    }

    #[test]
    fn carrier_block_has_exact_double_zero() {
        let spec = spectrum(&anchor_op(1)).unwrap();
        let zeros: Vec<_> = spec.iter().filter(|p| p.lambda.norm() <= 1e-12).collect();
        assert_eq!(zeros.len(), 2, "double zero expected");
        assert!(zeros.iter().any(|p| p.lambda == Complex64::new(0.0, 0.0)));
        for z in zeros {
            assert_eq!(z.class, SpectralClass::Center);
        }
    }

    #[test]
    fn closed_form_matches_numeric_all_m() {
        for m in [1u32, 3, 5] {
            let spec = spectrum(&anchor_op(m)).unwrap();
            let numeric: Vec<Complex64> = spec.iter().map(|p| p.lambda).collect();
            let closed: Vec<Complex64> = closed_form_eigenvalues(m, 0, 0.35, -40..=40)
                .into_iter()
                .map(|p| p.lambda)
                .filter(|l| l.im.abs() <= 10.0)
                .collect();
            let d = one_sided_hausdorff(&closed, &numeric);
            assert!(d <= 1e-8, "m = {m}: closed-to-numeric distance {d:.3e}");
        }
    }

    #[test]
    fn m3_kappa0_pair() {
        let w0 = 1.1225f64.sqrt();
        let spec = spectrum(&anchor_op(3)).unwrap();
        for sign in [1.0, -1.0] {
            let target = Complex64::new(0.0, sign * w0 * 8.0f64.sqrt());
            let d = spec
                .iter()
                .map(|p| (p.lambda - target).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-10, "missing ±iω₀√8: {d:.3e}");
            assert!((target.im.abs() - 2.99666).abs() < 1e-5);
        }
    }

    #[test]
    fn off_axis_pair_m1() {
        // κ = 1: (1 - 0.35)² - 1 < 0 gives an off-axis pair with
        // Im λ = -ω₀² and Re λ = ±ω₀√0.5775.
        let w0sq = 1.1225;
        let closed = closed_form_eigenvalues(1, 0, 0.35, 1..=1);
        assert_eq!(closed.len(), 2);
        for p in &closed {
            assert_abs_diff_eq!(p.lambda.im, -w0sq, epsilon = 1e-12);
            assert!((p.lambda.re.abs() - w0sq.sqrt() * 0.5775f64.sqrt()).abs() < 1e-12);
            assert!((p.lambda.re.abs() - 0.80513).abs() < 1e-5);
            assert_ne!(p.class, SpectralClass::Center);
        }
        let spec = spectrum(&anchor_op(1)).unwrap();
        let numeric: Vec<Complex64> = spec.iter().map(|p| p.lambda).collect();
        let want: Vec<Complex64> = closed.iter().map(|p| p.lambda).collect();
        assert!(one_sided_hausdorff(&want, &numeric) < 1e-10);
    }

    #[test]
    fn reversibility_symmetry() {
        // Spectrum invariant under λ → -λ̄ for both solver paths.
        let rho = PeriodicCoefficient::new(vec![1.0, 0.3], "rho").unwrap();
        let point = BlochPoint::compute(&rho, 0, 0.35, 16).unwrap();
        for op in [
            anchor_op(3),
            SpatialOperator::at_bloch_point(&rho, 3, &point).unwrap(),
        ] {
            let spec = spectrum(&op).unwrap();
            let set: Vec<Complex64> = spec.iter().map(|p| p.lambda).collect();
            let mirrored: Vec<Complex64> = set.iter().map(|l| -l.conj()).collect();
            assert!(one_sided_hausdorff(&mirrored, &set) < 1e-8);
        }
    }

    #[test]
    fn dense_path_balanced_classes() {
        let rho = PeriodicCoefficient::new(vec![1.0, 0.3], "rho").unwrap();
        let point = BlochPoint::compute(&rho, 0, 0.35, 16).unwrap();
        let op = SpatialOperator::at_bloch_point(&rho, 3, &point).unwrap();
        let spec = spectrum(&op).unwrap();
        let stable = spec.iter().filter(|p| p.class == SpectralClass::Stable).count();
        let unstable = spec.iter().filter(|p| p.class == SpectralClass::Unstable).count();
        assert_eq!(stable, unstable);
        assert!(!spec.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn quadratic_roots_random(
            mr in -3.0f64..3.0, mi in -3.0f64..3.0,
            lr in -3.0f64..3.0, li in -3.0f64..3.0,
        ) {
            let m = Complex64::new(mr, mi);
            let l = Complex64::new(lr, li);
            let (a, b) = quadratic_roots(m, l);
            for r in [a, b] {
                prop_assert!((r * r - m * r - l).norm() < 1e-10);
            }
            prop_assert!((a * b + l).norm() < 1e-10);
        }
    }
}
