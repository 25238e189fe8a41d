//! Fourier-space utilities shared by the spectral solvers.
//!
//! Periodic functions on [0, 2π) are represented by exponential coefficients
//! f̂_k for k = -K..K stored in a flat array at index k + K, so a coefficient
//! vector has length 2K+1. The continuum conventions are
//!
//!   f(x) = Σ_k f̂_k e^{ikx},   ⟨φ, ψ⟩ = ∫₀^{2π} conj(φ) ψ dx = 2π Σ_k conj(φ̂_k) ψ̂_k,
//!
//! with the inner product conjugate-linear in its first slot. All norms and
//! pairings in this crate use these scalings.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::coeff::PeriodicCoefficient;

pub const TWO_PI: f64 = 2.0 * PI;

/// Mode index set -K..K for a coefficient vector of length 2K+1.
pub fn modes(k_max: usize) -> impl Iterator<Item = i64> {
    let k = k_max as i64;
    -k..=k
}

/// Number of coefficients for truncation order K.
pub fn dim(k_max: usize) -> usize {
    2 * k_max + 1
}

/// Uniform grid x_j = 2πj/n on [0, 2π).
pub fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| TWO_PI * j as f64 / n as f64).collect()
}

/// Evaluates f(x) = Σ_k f̂_k e^{ikx} at a single point.
pub fn eval_at(f_hat: &Array1<Complex64>, k_max: usize, x: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, k) in modes(k_max).enumerate() {
        acc += f_hat[i] * Complex64::from_polar(1.0, k as f64 * x);
    }
    acc
}

/// Synthesizes f on the uniform n-point grid.
pub fn synth(f_hat: &Array1<Complex64>, k_max: usize, n: usize) -> Vec<Complex64> {
    grid(n).iter().map(|&x| eval_at(f_hat, k_max, x)).collect()
}

/// Projects grid samples onto modes -K..K with the periodic trapezoid rule:
/// f̂_k = (1/2π) ∫ f e^{-ikx} dx ≈ (1/n) Σ_j f(x_j) e^{-ikx_j}.
/// Exact for trigonometric polynomials with degree + K < n.
pub fn project(samples: &[Complex64], k_max: usize) -> Array1<Complex64> {
    let n = samples.len();
    let mut out = Array1::zeros(dim(k_max));
    for (i, k) in modes(k_max).enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &s) in samples.iter().enumerate() {
            let phase = -TWO_PI * (k as f64) * (j as f64) / (n as f64);
            acc += s * Complex64::from_polar(1.0, phase);
        }
        out[i] = acc / n as f64;
    }
    out
}

/// Coefficients of f′ given coefficients of f: (f′)̂_k = i k f̂_k.
pub fn derivative(f_hat: &Array1<Complex64>, k_max: usize) -> Array1<Complex64> {
    let mut out = f_hat.clone();
    for (i, k) in modes(k_max).enumerate() {
        out[i] *= Complex64::new(0.0, k as f64);
    }
    out
}

/// ⟨φ, ψ⟩ = 2π Σ_k conj(φ̂_k) ψ̂_k, conjugate-linear in the first argument.
pub fn inner(phi_hat: &Array1<Complex64>, psi_hat: &Array1<Complex64>) -> Complex64 {
    TWO_PI
        * phi_hat
            .iter()
            .zip(psi_hat.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
}

/// L² norm ‖φ‖ = √⟨φ, φ⟩.
pub fn norm(phi_hat: &Array1<Complex64>) -> f64 {
    inner(phi_hat, phi_hat).re.max(0.0).sqrt()
}

/// Scales so that ‖φ‖ = 1 in the integral convention above.
pub fn normalize(phi_hat: &mut Array1<Complex64>) {
    let n = norm(phi_hat);
    if n > 0.0 {
        phi_hat.mapv_inplace(|z| z / n);
    }
}

/// Dense multiplication (convolution) matrix of a real even coefficient:
/// (Cf̂)_j = Σ_k ρ̂_{j-k} f̂_k over the truncated index set.
pub fn convolution_matrix(rho: &PeriodicCoefficient, k_max: usize) -> Array2<f64> {
    let n = dim(k_max);
    let mut m = Array2::zeros((n, n));
    for (i, kj) in modes(k_max).enumerate() {
        for (jj, kk) in modes(k_max).enumerate() {
            m[[i, jj]] = rho.exp_coeff(kj - kk);
        }
    }
    m
}

/// Applies the convolution by ρ directly to a complex coefficient vector.
pub fn convolve(rho: &PeriodicCoefficient, f_hat: &Array1<Complex64>, k_max: usize) -> Array1<Complex64> {
    let n = dim(k_max);
    let mut out = Array1::zeros(n);
    for (i, kj) in modes(k_max).enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (jj, kk) in modes(k_max).enumerate() {
            let w = rho.exp_coeff(kj - kk);
            if w != 0.0 {
                acc += w * f_hat[jj];
            }
        }
        out[i] = acc;
    }
    out
}
