//! Reduced center dynamics and the homoclinic refinement.
//!
//! On the two center directions of the carrier block the traveling-pulse
//! problem collapses to a pair of complex amplitudes with
//!
//!   ∂_ξ q₀ = q₁ + ε² Z₂(q₀, q₁),      ∂_ξ q₁ = ε² Z₁(q₀, q₁),
//!
//! where (Z₁, Z₂) is cubic with a linear part from the ε²-shift of ω² and
//! cubic coefficients from quadratures of r f³-type products against the
//! carrier eigenfunction pair. The NLS soliton A(εξ) solves this system only
//! to O(ε³); [`refine_homoclinic`] corrects it to a genuine orbit of the
//! truncated system by a collocation boundary-value solve on [0, L], closed
//! by the reversibility conditions Im q₀(0) = Re q₁(0) = 0 on the left and
//! the annihilation of the unstable direction of the ξ → ∞ limit matrix on
//! the right, then reflected to [-L, L].

use num_complex::Complex64;

use crate::banded::BandedMatrix;
use crate::bloch::BlochPoint;
use crate::coeff::PeriodicCoefficient;
use crate::envelope::{self, EnvelopeParams};
use crate::error::{Error, Result};
use crate::fourier::{self, TWO_PI};
use crate::jordan::JordanData;
use crate::normal_form;
use crate::spatial::quadratic_roots;

/// One point of the reduced center dynamics.
#[derive(Debug, Clone, Copy)]
pub struct ReducedState {
    pub q0: Complex64,
    pub q1: Complex64,
}

/// Polynomial reduced vector field: rows (Z₁, Z₂), each a linear part in
/// (q₀, q₁) plus six cubic monomial coefficients. Row 1 drives ∂_ξq₁, row 2
/// the correction ∂_ξq₀ - q₁.
#[derive(Debug, Clone)]
pub struct ReducedVectorField {
    /// Linear coefficients: `a[i]` = (q₀, q₁) coefficients of row i.
    pub a: [[Complex64; 2]; 2],
    /// Cubic coefficients over {|q₀|²q₀, q₀²q̄₁, |q₀|²q₁, q₀|q₁|², q̄₀q₁², |q₁|²q₁}.
    pub cubic: [[Complex64; 6]; 2],
}

impl ReducedVectorField {
    /// Builds both rows from the carrier data: linear part from the stored
    /// inner products, cubic part by trapezoid quadrature on ≥ 1024 points
    /// of r·(u²ū)-products against f and i(∂_l f - iνf).
    pub fn new(
        point: &BlochPoint,
        nu: Complex64,
        r: &PeriodicCoefficient,
        gamma: f64,
        omega_tilde: f64,
    ) -> Self {
        let w0 = point.omega;
        let pref = 2.0 * omega_tilde / (w0 * point.omega_pp);
        let i = Complex64::i();
        // ⟨f, ∂_l f⟩ and the pairings of ∂_l f - iνf against f and ∂_l f.
        let phi2_hat = (&point.dlf_hat - &point.f_hat.mapv(|z| i * nu * z)).mapv(|z| i * z);
        let ip_f_g = fourier::inner(&point.f_hat, &point.dlf_hat);
        let raw2 = &point.dlf_hat - &point.f_hat.mapv(|z| i * nu * z);
        let ip2_f = fourier::inner(&raw2, &point.f_hat);
        let ip2_g = fourier::inner(&raw2, &point.dlf_hat);
        let a = [
            [Complex64::new(-pref * w0, 0.0), pref * i * (w0 * ip_f_g + point.cg)],
            [pref * i * w0 * ip2_f, pref * (point.cg * ip2_f + w0 * ip2_g)],
        ];

        let mut n = 1024usize;
        while n < 4 * point.k_max + r.degree() + 2 {
            n *= 2;
        }
        let fx = fourier::synth(&point.f_hat, point.k_max, n);
        let gx = fourier::synth(&point.dlf_hat, point.k_max, n);
        let p2x = fourier::synth(&phi2_hat, point.k_max, n);
        let scale = -3.0 * gamma / (w0 * point.omega_pp) * TWO_PI / n as f64;
        let mut cubic = [[Complex64::new(0.0, 0.0); 6]; 2];
        for j in 0..n {
            let x = TWO_PI * j as f64 / n as f64;
            let rv = r.eval(x);
            let (f, g) = (fx[j], gx[j]);
            // u²ū expanded over the six cubic monomials, u = q₀f - iq₁ ∂_l f.
            let w = [
                f * f * f.conj(),
                i * f * f * g.conj(),
                -2.0 * i * f * f.conj() * g,
                2.0 * f * g * g.conj(),
                -f.conj() * g * g,
                -i * g * g * g.conj(),
            ];
            for (row, phi) in [(0usize, f), (1, p2x[j])] {
                let cphi = phi.conj() * rv;
                for (k, wv) in w.iter().enumerate() {
                    cubic[row][k] += cphi * wv;
                }
            }
        }
        for row in &mut cubic {
            for c in row.iter_mut() {
                *c *= scale;
            }
        }
        ReducedVectorField { a, cubic }
    }

    fn cubic_monomials(q0: Complex64, q1: Complex64) -> [Complex64; 6] {
        let m = normal_form::monomials(q0, q1);
        [m[2], m[3], m[4], m[5], m[6], m[7]]
    }

    /// (Z₁, Z₂) at one state.
    pub fn z(&self, q0: Complex64, q1: Complex64) -> (Complex64, Complex64) {
        let mon = Self::cubic_monomials(q0, q1);
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for row in 0..2 {
            out[row] = self.a[row][0] * q0 + self.a[row][1] * q1;
            for k in 0..6 {
                out[row] += self.cubic[row][k] * mon[k];
            }
        }
        (out[0], out[1])
    }

    /// Wirtinger derivatives of both rows with respect to (q₀, q̄₀, q₁, q̄₁).
    pub fn z_derivatives(&self, q0: Complex64, q1: Complex64) -> [[Complex64; 4]; 2] {
        let dm = normal_form::dmonomials(q0, q1);
        let mut out = [[Complex64::new(0.0, 0.0); 4]; 2];
        for row in 0..2 {
            out[row][0] = self.a[row][0];
            out[row][2] = self.a[row][1];
            for k in 0..6 {
                for v in 0..4 {
                    out[row][v] += self.cubic[row][k] * dm[k + 2][v];
                }
            }
        }
        out
    }
}

/// One-shot evaluation of the reduced field rows at a state.
pub fn compute_z1(
    jd: &JordanData,
    point: &BlochPoint,
    r: &PeriodicCoefficient,
    gamma: f64,
    omega_tilde: f64,
    state: &ReducedState,
) -> (Complex64, Complex64) {
    ReducedVectorField::new(point, jd.nu, r, gamma, omega_tilde).z(state.q0, state.q1)
}

/// The reduced system at fixed ε.
#[derive(Debug, Clone)]
pub struct TruncatedSystem {
    pub field: ReducedVectorField,
    pub epsilon: f64,
}

impl TruncatedSystem {
    /// (∂_ξq₁, ∂_ξq₀ - q₁) = ε²(Z₁, Z₂).
    pub fn truncated_rhs(&self, state: &ReducedState) -> (Complex64, Complex64) {
        let e2 = self.epsilon * self.epsilon;
        let (z1, z2) = self.field.z(state.q0, state.q1);
        (e2 * z1, e2 * z2)
    }

    /// Flow form (∂_ξq₀, ∂_ξq₁).
    pub fn flow(&self, q0: Complex64, q1: Complex64) -> (Complex64, Complex64) {
        let e2 = self.epsilon * self.epsilon;
        let (z1, z2) = self.field.z(q0, q1);
        (q1 + e2 * z2, e2 * z1)
    }

    fn f_real(&self, y: &[f64; 4]) -> [f64; 4] {
        let (d0, d1) = self.flow(
            Complex64::new(y[0], y[1]),
            Complex64::new(y[2], y[3]),
        );
        [d0.re, d0.im, d1.re, d1.im]
    }

    /// Analytic real 4×4 Jacobian of [`Self::f_real`].
    fn jac_real(&self, y: &[f64; 4]) -> [[f64; 4]; 4] {
        let q0 = Complex64::new(y[0], y[1]);
        let q1 = Complex64::new(y[2], y[3]);
        let e2 = self.epsilon * self.epsilon;
        let dz = self.field.z_derivatives(q0, q1);
        // Flow rows: F0 = q1 + ε²Z₂, F1 = ε²Z₁; assemble their Wirtinger
        // derivatives, then convert each complex row to two real rows.
        let mut w = [[Complex64::new(0.0, 0.0); 4]; 2];
        for v in 0..4 {
            w[0][v] = e2 * dz[1][v];
            w[1][v] = e2 * dz[0][v];
        }
        w[0][2] += 1.0;
        let mut jac = [[0.0f64; 4]; 4];
        for row in 0..2 {
            for col in 0..2 {
                let fq = w[row][2 * col];
                let fqb = w[row][2 * col + 1];
                let s = fq + fqb;
                let d = fq - fqb;
                jac[2 * row][2 * col] = s.re;
                jac[2 * row][2 * col + 1] = -d.im;
                jac[2 * row + 1][2 * col] = s.im;
                jac[2 * row + 1][2 * col + 1] = d.re;
            }
        }
        jac
    }

    /// Constant-coefficient limit of the linearization at the origin, acting
    /// on (q₀, q₁).
    pub fn limit_matrix(&self) -> [[Complex64; 2]; 2] {
        let e2 = self.epsilon * self.epsilon;
        [
            [e2 * self.field.a[1][0], 1.0 + e2 * self.field.a[1][1]],
            [e2 * self.field.a[0][0], e2 * self.field.a[0][1]],
        ]
    }

    /// Unstable eigenvalue of the limit matrix and a left eigenvector
    /// annihilating the stable complement; the right boundary condition is
    /// ℓ·(q₀, q₁)(L) = 0 (bilinear, no conjugation).
    pub fn unstable_left_vector(&self) -> Result<((Complex64, Complex64), f64)> {
        let b = self.limit_matrix();
        let tr = b[0][0] + b[1][1];
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        let (r1, r2) = quadratic_roots(tr, -det);
        let lam = if r1.re >= r2.re { r1 } else { r2 };
        if lam.re <= 0.0 {
            return Err(Error::numerical(
                "origin of the reduced system is not a saddle; no decaying direction to select",
            ));
        }
        let ell = (lam - b[1][1], b[0][1]);
        let nrm = (ell.0.norm_sqr() + ell.1.norm_sqr()).sqrt();
        Ok(((ell.0 / nrm, ell.1 / nrm), lam.re))
    }
}

/// Converged orbit on the symmetric grid with its diagnostics.
#[derive(Debug, Clone)]
pub struct HomoclinicOrbit {
    pub xi: Vec<f64>,
    pub q0: Vec<Complex64>,
    pub q1: Vec<Complex64>,
    pub epsilon: f64,
    /// ‖q₀ - A(ε·)‖∞ over the grid.
    pub proximity_q0: f64,
    /// ‖q₁ - εA'(ε·)‖∞ over the grid.
    pub proximity_q1: f64,
    /// Fitted tail rate α of |q₀| ~ C e^{-εα|ξ|}.
    pub decay_rate: f64,
    pub newton_iters: usize,
    pub final_residual: f64,
    /// Max of |Im q₀(0)|, |Re q₁(0)|.
    pub reversibility_residual: f64,
    /// Derivative jump of the reflected orbit at ξ = 0:
    /// |Re ∂_ξq₀(0)| + |Im ∂_ξq₁(0)|.
    pub c1_jump: f64,
}

const NEWTON_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 25;
const MAX_HALVINGS: usize = 6;
const MAX_SPACING: f64 = 0.5;

fn mat_mul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut c = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..4 {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

struct BvpWork {
    h: f64,
    m: usize,
    ell: (Complex64, Complex64),
}

impl BvpWork {
    fn n_unknowns(&self) -> usize {
        4 * (self.m + 1)
    }

    /// Residual of the collocation system; interval residuals use the
    /// fourth-order three-stage rule with the interior stage
    /// y* = (y_i + y_{i+1})/2 + (h/8)(F_i - F_{i+1}).
    fn residual(&self, sys: &TruncatedSystem, y: &[[f64; 4]]) -> Vec<f64> {
        let mut r = vec![0.0; self.n_unknowns()];
        r[0] = y[0][1];
        r[1] = y[0][2];
        let h = self.h;
        for i in 0..self.m {
            let fi = sys.f_real(&y[i]);
            let fi1 = sys.f_real(&y[i + 1]);
            let mut ymid = [0.0f64; 4];
            for c in 0..4 {
                ymid[c] = 0.5 * (y[i][c] + y[i + 1][c]) + h / 8.0 * (fi[c] - fi1[c]);
            }
            let fm = sys.f_real(&ymid);
            for c in 0..4 {
                r[2 + 4 * i + c] =
                    y[i + 1][c] - y[i][c] - h / 6.0 * (fi[c] + 4.0 * fm[c] + fi1[c]);
            }
        }
        let yl = y[self.m];
        let q0 = Complex64::new(yl[0], yl[1]);
        let q1 = Complex64::new(yl[2], yl[3]);
        let bc = self.ell.0 * q0 + self.ell.1 * q1;
        r[2 + 4 * self.m] = bc.re;
        r[3 + 4 * self.m] = bc.im;
        r
    }

    fn jacobian(&self, sys: &TruncatedSystem, y: &[[f64; 4]]) -> BandedMatrix {
        let n = self.n_unknowns();
        let mut jac = BandedMatrix::zeros(n, 5, 5);
        jac.set(0, 1, 1.0);
        jac.set(1, 2, 1.0);
        let h = self.h;
        for i in 0..self.m {
            let fi = sys.f_real(&y[i]);
            let fi1 = sys.f_real(&y[i + 1]);
            let ji = sys.jac_real(&y[i]);
            let ji1 = sys.jac_real(&y[i + 1]);
            let mut ymid = [0.0f64; 4];
            for c in 0..4 {
                ymid[c] = 0.5 * (y[i][c] + y[i + 1][c]) + h / 8.0 * (fi[c] - fi1[c]);
            }
            let jm = sys.jac_real(&ymid);
            // d ymid / dy_i = I/2 + (h/8) J_i, and with a minus sign at i+1.
            let mut dmid_i = ji.map(|row| row.map(|v| v * h / 8.0));
            let mut dmid_i1 = ji1.map(|row| row.map(|v| -v * h / 8.0));
            for c in 0..4 {
                dmid_i[c][c] += 0.5;
                dmid_i1[c][c] += 0.5;
            }
            let jm_i = mat_mul(&jm, &dmid_i);
            let jm_i1 = mat_mul(&jm, &dmid_i1);
            for rc in 0..4 {
                let row = 2 + 4 * i + rc;
                for cc in 0..4 {
                    let mut di = -h / 6.0 * (ji[rc][cc] + 4.0 * jm_i[rc][cc]);
                    let mut di1 = -h / 6.0 * (ji1[rc][cc] + 4.0 * jm_i1[rc][cc]);
                    if rc == cc {
                        di -= 1.0;
                        di1 += 1.0;
                    }
                    jac.add(row, 4 * i + cc, di);
                    jac.add(row, 4 * (i + 1) + cc, di1);
                }
            }
        }
        let base = 4 * self.m;
        let (l0, l1) = self.ell;
        let coeffs_re = [l0.re, -l0.im, l1.re, -l1.im];
        let coeffs_im = [l0.im, l0.re, l1.im, l1.re];
        for c in 0..4 {
            jac.set(2 + base, base + c, coeffs_re[c]);
            jac.set(3 + base, base + c, coeffs_im[c]);
        }
        jac
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// Refines the NLS soliton into an orbit of the truncated system.
///
/// Solves the collocation boundary-value problem on [0, `half_length`] with
/// spacing ≤ 0.5, a damped Newton iteration from the soliton guess, and the
/// boundary conditions described in the module docs, then reflects by
/// q₀(-ξ) = q̄₀(ξ), q₁(-ξ) = -q̄₁(ξ).
pub fn refine_homoclinic(
    field: &ReducedVectorField,
    params: &EnvelopeParams,
    epsilon: f64,
    half_length: f64,
) -> Result<HomoclinicOrbit> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::invalid("epsilon out of range (0, 0.5]"));
    }
    let min_l = 30.0 / (epsilon * params.gamma2);
    if half_length < min_l {
        return Err(Error::invalid(format!(
            "half length {half_length} too short; the tail needs at least {min_l:.1}"
        )));
    }
    let sys = TruncatedSystem {
        field: field.clone(),
        epsilon,
    };
    let m = (half_length / MAX_SPACING).ceil() as usize;
    let h = half_length / m as f64;
    let (ell, _lambda_u) = sys.unstable_left_vector()?;
    let work = BvpWork { h, m, ell };

    let mut y: Vec<[f64; 4]> = (0..=m)
        .map(|i| {
            let xi = i as f64 * h;
            let a = envelope::soliton(params, epsilon * xi);
            let ap = epsilon * envelope::soliton_prime(params, epsilon * xi);
            [a, 0.0, ap, 0.0]
        })
        .collect();

    let mut res = work.residual(&sys, &y);
    let mut res_norm = inf_norm(&res);
    let mut iters = 0usize;
    while res_norm > NEWTON_TOL {
        if iters >= MAX_NEWTON {
            return Err(Error::numerical(format!(
                "Newton did not converge in {MAX_NEWTON} iterations (residual {res_norm:.3e})"
            )));
        }
        let jac = work.jacobian(&sys, &y);
        let neg: Vec<f64> = res.iter().map(|v| -v).collect();
        let delta = jac.solve(&neg)?;
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<[f64; 4]> = y
                .iter()
                .enumerate()
                .map(|(i, yi)| {
                    let mut t = *yi;
                    for c in 0..4 {
                        t[c] += lambda * delta[4 * i + c];
                    }
                    t
                })
                .collect();
            let trial_res = work.residual(&sys, &trial);
            let trial_norm = inf_norm(&trial_res);
            if trial_norm < res_norm {
                y = trial;
                res = trial_res;
                res_norm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::numerical(
                "Newton step rejected after six halvings; no descent direction",
            ));
        }
        iters += 1;
    }

    // Reflect to the symmetric grid and collect diagnostics.
    let mut xi = Vec::with_capacity(2 * m + 1);
    let mut q0 = Vec::with_capacity(2 * m + 1);
    let mut q1 = Vec::with_capacity(2 * m + 1);
    for i in (1..=m).rev() {
        xi.push(-(i as f64) * h);
        let q0r = Complex64::new(y[i][0], y[i][1]);
        let q1r = Complex64::new(y[i][2], y[i][3]);
        q0.push(q0r.conj());
        q1.push(-q1r.conj());
    }
    for (i, yi) in y.iter().enumerate() {
        xi.push(i as f64 * h);
        q0.push(Complex64::new(yi[0], yi[1]));
        q1.push(Complex64::new(yi[2], yi[3]));
    }

    // Sup distances to the soliton pair, evaluated densely: node-only sampling
    // under-reads a peak that falls between nodes by O((εh)²), enough to bias
    // the fitted ε-order of the sweep. Cubic Hermite interpolation from node
    // values and flow derivatives recovers the continuum sup to O(h⁴).
    // Conjugation symmetry makes |q₀ - A| and |q₁ - εA'| even, so the right
    // half grid suffices.
    let mut proximity_q0 = 0.0f64;
    let mut proximity_q1 = 0.0f64;
    let flows: Vec<[f64; 4]> = y.iter().map(|yi| sys.f_real(yi)).collect();
    const SUBDIV: usize = 8;
    for i in 0..=m {
        for j in 0..SUBDIV {
            if j > 0 && i == m {
                break;
            }
            let t = j as f64 / SUBDIV as f64;
            let x = (i as f64 + t) * h;
            let mut p = [0.0f64; 4];
            for c in 0..4 {
                let (v0, v1) = (y[i][c], y[(i + 1).min(m)][c]);
                let (d0, d1) = (flows[i][c], flows[(i + 1).min(m)][c]);
                let t2 = t * t;
                let t3 = t2 * t;
                p[c] = (1.0 - 3.0 * t2 + 2.0 * t3) * v0
                    + (3.0 * t2 - 2.0 * t3) * v1
                    + h * ((t - 2.0 * t2 + t3) * d0 + (t3 - t2) * d1);
            }
            let a = envelope::soliton(params, epsilon * x);
            let ap = epsilon * envelope::soliton_prime(params, epsilon * x);
            let d0 = Complex64::new(p[0] - a, p[1]).norm();
            let d1 = Complex64::new(p[2] - ap, p[3]).norm();
            proximity_q0 = proximity_q0.max(d0);
            proximity_q1 = proximity_q1.max(d1);
        }
    }

    // Tail rate from the outer half of the right tail.
    let lo = (1.55 * m as f64 / 2.0) as usize;
    let hi = (1.9 * m as f64 / 2.0) as usize;
    let pts: Vec<(f64, f64)> = (m + lo..m + hi)
        .map(|j| (xi[j], q0[j].norm()))
        .filter(|(_, a)| *a > 1e-13)
        .map(|(x, a)| (x, a.ln()))
        .collect();
    let decay_rate = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        -(num / den) / epsilon
    } else {
        f64::NAN
    };

    let center = &y[0];
    let fc = sys.f_real(center);
    let c1_jump = fc[0].abs() + fc[3].abs();
    let reversibility_residual = center[1].abs().max(center[2].abs());

    Ok(HomoclinicOrbit {
        xi,
        q0,
        q1,
        epsilon,
        proximity_q0,
        proximity_q1,
        decay_rate,
        newton_iters: iters,
        final_residual: res_norm,
        reversibility_residual,
        c1_jump,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jordan::{self, pair2};
    use crate::normal_form::{carrier_sources, monomials};
    use crate::spatial::SpatialOperator;
    use ndarray::Array1;

    fn cosine_medium() -> PeriodicCoefficient {
        PeriodicCoefficient::new(vec![1.0, 0.3], "rho").unwrap()
    }

    fn unit() -> PeriodicCoefficient {
        PeriodicCoefficient::constant(1.0).unwrap()
    }

    struct Setup {
        point: BlochPoint,
        jd: JordanData,
        params: EnvelopeParams,
        field: ReducedVectorField,
    }

    fn setup(rho: &PeriodicCoefficient, weight: &PeriodicCoefficient, l0: f64) -> Setup {
        let point = BlochPoint::compute(rho, 0, l0, 16).unwrap();
        let op = SpatialOperator::at_bloch_point(rho, 1, &point).unwrap();
        let jd = jordan::jordan_chain_m1(&op, &point).unwrap();
        let params = EnvelopeParams::derive(&point, weight, 1.0, 0.1).unwrap();
        let field =
            ReducedVectorField::new(&point, jd.nu, weight, params.gamma, params.omega_tilde);
        Setup {
            point,
            jd,
            params,
            field,
        }
    }

    #[test]
    fn constant_medium_closed_form() {
        let s = setup(&unit(), &unit(), 0.35);
        let p = &s.params;
        let w0 = p.omega0;
        let wpp = p.omega_pp;
        for (q0, q1) in [
            (Complex64::new(0.7, -0.2), Complex64::new(0.1, 0.4)),
            (Complex64::new(-1.3, 0.5), Complex64::new(0.0, -0.9)),
        ] {
            let (z1, z2) = s.field.z(q0, q1);
            let expect = -(2.0 * p.omega_tilde * q0 + p.gamma_nl * q0.norm_sqr() * q0) / wpp
                + Complex64::i() * 2.0 * p.omega_tilde * p.cg / (w0 * wpp) * q1;
            assert!((z1 - expect).norm() <= 1e-10, "z1 = {z1}, expect = {expect}");
            // Second row vanishes identically: ∂_l f = 0 and ν = 0.
            assert!(z2.norm() <= 1e-12);
        }
    }

    #[test]
    fn matches_projector_pairings() {
        // Independent path: the same rows arise as ⟨G₀,H(q)⟩ and ⟨G₁,H(q)⟩
        // with the Galerkin source vectors of the carrier chain.
        for (rho, weight, l0) in [
            (cosine_medium(), unit(), 0.25),
            (unit(), cosine_medium(), 0.35),
        ] {
            let s = setup(&rho, &weight, l0);
            let sources =
                carrier_sources(&weight, &s.point, s.params.gamma, s.params.omega_tilde);
            for (q0, q1) in [
                (Complex64::new(0.6, 0.3), Complex64::new(-0.2, 0.5)),
                (Complex64::new(-0.1, 1.1), Complex64::new(0.8, 0.0)),
            ] {
                let mon = monomials(q0, q1);
                let mut hq: Array1<Complex64> = Array1::zeros(sources[0].len());
                for j in 0..8 {
                    hq = &hq + &sources[j].mapv(|z| mon[j] * z);
                }
                let z1_pair = pair2(&s.jd.g0, &hq);
                let z2_pair = pair2(&s.jd.g1, &hq);
                let (z1, z2) = s.field.z(q0, q1);
                assert!((z1 - z1_pair).norm() <= 1e-10, "row 1: {z1} vs {z1_pair}");
                assert!((z2 - z2_pair).norm() <= 1e-10, "row 2: {z2} vs {z2_pair}");
            }
        }
    }

    #[test]
    fn origin_and_equivariance() {
        let s = setup(&cosine_medium(), &unit(), 0.25);
        let sys = TruncatedSystem {
            field: s.field.clone(),
            epsilon: 0.1,
        };
        let zero = ReducedState {
            q0: Complex64::new(0.0, 0.0),
            q1: Complex64::new(0.0, 0.0),
        };
        let (r1, r2) = sys.truncated_rhs(&zero);
        assert_eq!(r1.norm(), 0.0);
        assert_eq!(r2.norm(), 0.0);
        // Phase rotation commutes with the field.
        let phase = Complex64::from_polar(1.0, 0.7);
        let q0 = Complex64::new(0.4, -0.8);
        let q1 = Complex64::new(-0.3, 0.2);
        let (z1, z2) = s.field.z(q0, q1);
        let (z1r, z2r) = s.field.z(phase * q0, phase * q1);
        assert!((z1r - phase * z1).norm() <= 1e-12);
        assert!((z2r - phase * z2).norm() <= 1e-12);
    }

    #[test]
    fn polynomial_structure_from_evaluations() {
        // Recover linear and cubic parts from evaluations at two scalings and
        // predict a third; only works if the field really is linear + cubic.
        let s = setup(&cosine_medium(), &unit(), 0.25);
        let q0 = Complex64::new(0.9, 0.2);
        let q1 = Complex64::new(-0.5, 0.7);
        let l = 0.31f64;
        for row in 0..2 {
            let zat = |lam: f64| {
                let (z1, z2) = s.field.z(lam * q0, lam * q1);
                if row == 0 {
                    z1
                } else {
                    z2
                }
            };
            let z1 = zat(l);
            let z3 = zat(3.0 * l);
            let lin = (27.0 * z1 - z3) / (24.0 * l);
            let cub = (z3 - 3.0 * z1) / (24.0 * l.powi(3));
            let predict = 2.0 * l * lin + 8.0 * l.powi(3) * cub;
            assert!((zat(2.0 * l) - predict).norm() <= 1e-10);
        }
    }

    #[test]
    fn soliton_residual_order() {
        // Inserting (A(εξ), εA'(εξ)) into the q₁-row leaves the group-velocity
        // coupling iε³(2c_gω̃/(ω₀ω''))A' as the leading mismatch: third order,
        // which is what motivates the boundary-value refinement.
        let s = setup(&unit(), &unit(), 0.35);
        let mut maxima = Vec::new();
        let epsilons = [0.2, 0.1, 0.05];
        for &eps in &epsilons {
            let params = EnvelopeParams {
                epsilon: eps,
                ..s.params.clone()
            };
            let sys = TruncatedSystem {
                field: s.field.clone(),
                epsilon: eps,
            };
            let mut worst = 0.0f64;
            for j in -200..=200 {
                let xi = j as f64 * 0.25 / eps / 40.0 * 30.0;
                let a = envelope::soliton(&params, eps * xi);
                let ap = eps * envelope::soliton_prime(&params, eps * xi);
                let app = eps * eps * envelope::soliton_second(&params, eps * xi);
                let (dq1, _) = sys.truncated_rhs(&ReducedState {
                    q0: Complex64::new(a, 0.0),
                    q1: Complex64::new(ap, 0.0),
                });
                worst = worst.max((dq1 - app).norm());
            }
            maxima.push(worst);
        }
        let order01 = (maxima[0] / maxima[1]).ln() / 2.0f64.ln();
        let order12 = (maxima[1] / maxima[2]).ln() / 2.0f64.ln();
        assert!(order01 >= 2.7 && order12 >= 2.7, "orders {order01:.2}, {order12:.2}");
    }

    #[test]
    fn saddle_eigenvalues_match_width_rate() {
        let s = setup(&unit(), &unit(), 0.35);
        let eps = 0.1;
        let sys = TruncatedSystem {
            field: s.field.clone(),
            epsilon: eps,
        };
        let (_, lambda_u) = sys.unstable_left_vector().unwrap();
        // ±ε√(-2ω̃/ω'') up to the ε²-small phase coupling.
        assert!((lambda_u - eps * s.params.gamma2).abs() <= 1e-3 * eps);
    }

    #[test]
    fn short_domain_rejected() {
        let s = setup(&unit(), &unit(), 0.35);
        let err = refine_homoclinic(&s.field, &s.params, 0.1, 10.0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn refine_at_eps_01() {
        let s = setup(&unit(), &unit(), 0.35);
        let eps = 0.1;
        let l = 30.0 / (eps * s.params.gamma2) + 5.0;
        let orbit = refine_homoclinic(&s.field, &s.params, eps, l).unwrap();
        assert!(orbit.final_residual <= NEWTON_TOL);
        assert!(orbit.newton_iters <= MAX_NEWTON);
        assert!(orbit.reversibility_residual <= 1e-10);
        assert!(orbit.c1_jump <= 1e-8);
        assert!(
            orbit.proximity_q0 <= 0.05 * s.params.gamma1,
            "proximity {:.3e}",
            orbit.proximity_q0
        );
        // Tail decays at the soliton width rate.
        assert!(
            (orbit.decay_rate - s.params.gamma2).abs() <= 0.1 * s.params.gamma2,
            "decay rate {:.4} vs {:.4}",
            orbit.decay_rate,
            s.params.gamma2
        );
        // Symmetric samples obey the reflection identities.
        let n = orbit.xi.len();
        for j in 0..n / 2 {
            let k = n - 1 - j;
            assert!((orbit.q0[j] - orbit.q0[k].conj()).norm() <= 1e-12);
            assert!((orbit.q1[j] + orbit.q1[k].conj()).norm() <= 1e-12);
        }
    }

    #[test]
    fn proximity_scales_with_epsilon() {
        let s = setup(&unit(), &unit(), 0.35);
        let epsilons = [0.2, 0.1, 0.05];
        let mut prox0 = Vec::new();
        let mut prox1 = Vec::new();
        for &eps in &epsilons {
            let params = EnvelopeParams {
                epsilon: eps,
                ..s.params.clone()
            };
            let l = 30.0 / (eps * params.gamma2) + 5.0;
            let orbit = refine_homoclinic(&s.field, &params, eps, l).unwrap();
            prox0.push(orbit.proximity_q0);
            prox1.push(orbit.proximity_q1);
        }
        let fit = |vals: &[f64]| {
            let o1 = (vals[0] / vals[1]).ln() / 2.0f64.ln();
            let o2 = (vals[1] / vals[2]).ln() / 2.0f64.ln();
            0.5 * (o1 + o2)
        };
        let order0 = fit(&prox0);
        let order1 = fit(&prox1);
        // The q0 distance follows eps * |kappa| gamma1 / (2 gamma2) * max|s sech s|
        // with kappa = 2 omega_tilde c_g / (omega0 omega''), here 0.4747 eps; the
        // next correction is a small negative eps^2 term, so the fitted order
        // sits at 0.9999 rather than exactly 1.
        assert!(
            (order0 - 1.0).abs() <= 5e-3,
            "q0 proximity order {order0:.4} ({prox0:?})"
        );
        assert!(order1 >= 1.9, "q1 proximity order {order1:.4} ({prox1:?})");
    }

    #[test]
    fn proximity_order_exceeds_one_at_small_momentum() {
        // At l0 = 0.1 in the cosine medium the next-order correction to the
        // soliton distance is positive, so the fitted order lands above 1.
        let s = setup(&cosine_medium(), &unit(), 0.1);
        let mut prox = Vec::new();
        for &eps in &[0.2f64, 0.1, 0.05] {
            let params = EnvelopeParams {
                epsilon: eps,
                ..s.params.clone()
            };
            let l = 30.0 / (eps * params.gamma2) + 5.0;
            let orbit = refine_homoclinic(&s.field, &params, eps, l).unwrap();
            prox.push(orbit.proximity_q0);
        }
        let o1 = (prox[0] / prox[1]).ln() / 2.0f64.ln();
        let o2 = (prox[1] / prox[2]).ln() / 2.0f64.ln();
        assert!(o1 >= 1.0 && o2 >= 1.0, "orders {o1:.4}, {o2:.4}");
    }

    #[test]
    fn cosine_medium_orbit_converges() {
        let rho = cosine_medium();
        let s = setup(&rho, &unit(), 0.25);
        let eps = 0.1;
        let l = 30.0 / (eps * s.params.gamma2) + 2.0;
        let orbit = refine_homoclinic(&s.field, &s.params, eps, l).unwrap();
        assert!(orbit.final_residual <= NEWTON_TOL);
        assert!(orbit.reversibility_residual <= 1e-10);
        assert!(orbit.c1_jump <= 1e-8);
        // The soliton-distance coefficient is much larger here than in the
        // constant medium (about 6.9 eps against 0.47 eps): the phase tilt is
        // driven by the full nu / <f, d_l f> coupling, not just c_g.
        assert!(orbit.proximity_q0 <= 0.75, "proximity {:.3}", orbit.proximity_q0);
    }
}
