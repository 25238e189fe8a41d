//! Generalized kernel of the carrier-harmonic operator A₁.
//!
//! At the carrier Bloch point (ω₀, c = c_g) the operator A₁ has an eigenvalue
//! zero of algebraic multiplicity two and geometric multiplicity one: the
//! eigenvector F₀ = (f̂, 0) extends to a Jordan chain A₁F₁ = F₀ with
//! F₁ = (-i ∂_l f̂, f̂). The adjoint chain G₀, G₁ (A₁*G₀ = 0, A₁*G₁ = G₀)
//! is normalized to the duality pattern ⟨G₀,F₁⟩ = ⟨G₁,F₀⟩ = 1,
//! ⟨G₀,F₀⟩ = ⟨G₁,F₁⟩ = 0, which yields the spectral projector onto the
//! complement of the chain,
//!
//!   ΠΨ = Ψ - ⟨G₀,Ψ⟩ F₁ - ⟨G₁,Ψ⟩ F₀.
//!
//! All pairings are 2π Σ conj(a)·b over the stacked two-block coefficient
//! vectors, conjugate-linear in the first slot.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Solve, SVD};
use num_complex::Complex64;

use crate::bloch::BlochPoint;
use crate::coeff::PeriodicCoefficient;
use crate::error::{Error, Result};
use crate::fourier::{modes, TWO_PI};
use crate::spatial::{self, SpatialOperator};

/// Duality pairing on stacked two-block vectors: 2π Σ conj(a)·b.
pub fn pair2(a: &Array1<Complex64>, b: &Array1<Complex64>) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let s: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    TWO_PI * s
}

/// Jordan chain of A₁ and the dual chain of A₁*, duality-normalized.
#[derive(Debug, Clone)]
pub struct JordanData {
    pub f0: Array1<Complex64>,
    pub f1: Array1<Complex64>,
    pub g0: Array1<Complex64>,
    pub g1: Array1<Complex64>,
    /// Multiple of G₀ mixed into G₁ to enforce ⟨G₁,F₁⟩ = 0.
    pub nu: Complex64,
    /// ‖A₁F₀‖, ‖A₁F₁-F₀‖, ‖A₁*G₀‖, ‖A₁*G₁-G₀‖.
    pub chain_residuals: [f64; 4],
    /// [[⟨G₀,F₀⟩, ⟨G₀,F₁⟩], [⟨G₁,F₀⟩, ⟨G₁,F₁⟩]]; target [[0,1],[1,0]].
    pub duality: [[Complex64; 2]; 2],
}

fn stack2(top: &Array1<Complex64>, bottom: &Array1<Complex64>) -> Array1<Complex64> {
    let n = top.len();
    let mut out = Array1::zeros(2 * n);
    for i in 0..n {
        out[i] = top[i];
        out[n + i] = bottom[i];
    }
    out
}

fn apply(matrix: &Array2<Complex64>, v: &Array1<Complex64>) -> Array1<Complex64> {
    matrix.dot(v)
}

fn apply_adjoint(matrix: &Array2<Complex64>, v: &Array1<Complex64>) -> Array1<Complex64> {
    let n = matrix.nrows();
    let mut out = Array1::zeros(n);
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += matrix[[j, i]].conj() * v[j];
        }
        out[i] = acc;
    }
    out
}

fn norm2(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Builds the chain and its dual for A₁ assembled at `point`.
///
/// The dual eigenvector and first dual chain vector have the closed forms
/// (with α = 1/(ω₀ω''), x_k = c_g ω₀ - (k+l₀), β = 1-c_g²)
///
///   G₀ = α (2i x_k f̂_k ; β f̂_k),
///   G₁ = α (β f̂_k - 2 x_k ∂_l f̂_k ; iβ ∂_l f̂_k) + ν G₀,
///
/// where ν is fixed numerically so that ⟨G₁,F₁⟩ = 0.
pub fn jordan_chain_m1(op: &SpatialOperator, point: &BlochPoint) -> Result<JordanData> {
    if op.m != 1 {
        return Err(Error::invalid("Jordan chain construction applies to the m = 1 block"));
    }
    if op.k_max != point.k_max || (op.l0 - point.l).abs() > 1e-14 || op.omega != point.omega {
        return Err(Error::invalid("operator was not assembled at the given Bloch point"));
    }
    if point.omega_pp.abs() < 1e-12 {
        return Err(Error::numerical(
            "band curvature vanishes; the dual chain normalization is undefined",
        ));
    }
    let n = op.block_dim();
    let zeros = Array1::zeros(n);
    let f0 = stack2(&point.f_hat, &zeros);
    let minus_i_dlf = point.dlf_hat.mapv(|z| -Complex64::i() * z);
    let f1 = stack2(&minus_i_dlf, &point.f_hat);

    let alpha = 1.0 / (point.omega * point.omega_pp);
    let beta = 1.0 - op.c * op.c;
    let mut g0_top = Array1::zeros(n);
    let mut g1_top = Array1::zeros(n);
    for (i, k) in modes(op.k_max).enumerate() {
        let x_k = point.cg * point.omega - (k as f64 + op.l0);
        g0_top[i] = Complex64::new(0.0, 2.0 * alpha * x_k) * point.f_hat[i];
        g1_top[i] = alpha * (beta * point.f_hat[i] - 2.0 * x_k * point.dlf_hat[i]);
    }
    let g0_bottom = point.f_hat.mapv(|z| alpha * beta * z);
    let g1_bottom = point.dlf_hat.mapv(|z| Complex64::i() * alpha * beta * z);
    let g0 = stack2(&g0_top, &g0_bottom);
    let g1_raw = stack2(&g1_top, &g1_bottom);
    let nu = -pair2(&g1_raw, &f1).conj();
    let g1 = &g1_raw + &g0.mapv(|z| nu * z);

    let chain_residuals = [
        norm2(&apply(&op.matrix, &f0)),
        norm2(&(&apply(&op.matrix, &f1) - &f0)),
        norm2(&apply_adjoint(&op.matrix, &g0)),
        norm2(&(&apply_adjoint(&op.matrix, &g1) - &g0)),
    ];
    let duality = [
        [pair2(&g0, &f0), pair2(&g0, &f1)],
        [pair2(&g1, &f0), pair2(&g1, &f1)],
    ];
    Ok(JordanData {
        f0,
        f1,
        g0,
        g1,
        nu,
        chain_residuals,
        duality,
    })
}

impl JordanData {
    /// ΠΨ = Ψ - ⟨G₀,Ψ⟩F₁ - ⟨G₁,Ψ⟩F₀.
    pub fn project(&self, psi: &Array1<Complex64>) -> Array1<Complex64> {
        let a = pair2(&self.g0, psi);
        let b = pair2(&self.g1, psi);
        psi - &self.f1.mapv(|z| a * z) - &self.f0.mapv(|z| b * z)
    }

    /// Dense Π = I - 2π F₁G₀* - 2π F₀G₁*.
    pub fn projector_matrix(&self) -> Array2<Complex64> {
        let n = self.f0.len();
        let mut p = Array2::eye(n);
        for i in 0..n {
            for j in 0..n {
                p[[i, j]] -= TWO_PI
                    * (self.f1[i] * self.g0[j].conj() + self.f0[i] * self.g1[j].conj());
            }
        }
        p
    }

    pub fn max_duality_deviation(&self) -> f64 {
        let target = [
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        ];
        let mut dev = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                dev = dev.max((self.duality[i][j] - target[i][j]).norm());
            }
        }
        dev
    }
}

/// Solves ΠA₁S = Πrhs with S in the range of Π, via the bordered system
/// [[A₁, F₀, F₁], [2πG₀*, 0, 0], [2πG₁*, 0, 0]]·[S; a; b] = [rhs; 0; 0].
/// The two multipliers absorb the kernel components of `rhs`.
pub fn deflated_solve(
    op: &SpatialOperator,
    jd: &JordanData,
    rhs: &Array1<Complex64>,
) -> Result<Array1<Complex64>> {
    let n2 = op.matrix.nrows();
    if rhs.len() != n2 {
        return Err(Error::invalid("right-hand side dimension mismatch"));
    }
    let mut big: Array2<Complex64> = Array2::zeros((n2 + 2, n2 + 2));
    for i in 0..n2 {
        for j in 0..n2 {
            big[[i, j]] = op.matrix[[i, j]];
        }
        big[[i, n2]] = jd.f0[i];
        big[[i, n2 + 1]] = jd.f1[i];
        big[[n2, i]] = TWO_PI * jd.g0[i].conj();
        big[[n2 + 1, i]] = TWO_PI * jd.g1[i].conj();
    }
    let mut b: Array1<Complex64> = Array1::zeros(n2 + 2);
    for i in 0..n2 {
        b[i] = rhs[i];
    }
    let sol = big.solve_into(b)?;
    Ok(sol.slice(ndarray::s![..n2]).to_owned())
}

/// Smallest singular values of the harmonic blocks, used as a proxy for the
/// uniform invertibility bound of the reduced system.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ResolventHealth {
    /// (m, σ_min); for m = 1 the value is σ_min of the deflated ΠA₁Π.
    pub per_harmonic: Vec<(u32, f64)>,
    /// max over harmonics of 1/σ_min.
    pub c0_estimate: f64,
}

fn smallest_singular(matrix: &Array2<Complex64>, drop: usize) -> Result<f64> {
    let (_, svals, _) = matrix.svd(false, false)?;
    let n = svals.len();
    if drop > 0 {
        // The deflated operator must be rank-deficient by exactly `drop`.
        for j in 0..drop {
            if svals[n - 1 - j] > 1e-10 {
                return Err(Error::numerical(format!(
                    "expected {drop} deflated directions, found singular value {:.3e}",
                    svals[n - 1 - j]
                )));
            }
        }
        if svals[n - 1 - drop] <= 1e-10 {
            return Err(Error::numerical(
                "more kernel directions than the Jordan chain accounts for",
            ));
        }
    }
    Ok(svals[n - 1 - drop])
}

/// σ_min of ΠA₁Π (two deflated directions dropped) and of A_m for odd
/// m = 3..=max_m. A value below 1e-10 on the m ≥ 3 blocks means the harmonic
/// is resonant and the reduction is ill-posed.
pub fn resolvent_health(
    rho: &PeriodicCoefficient,
    point: &BlochPoint,
    max_m: u32,
) -> Result<ResolventHealth> {
    let mut per_harmonic = Vec::new();
    let op1 = SpatialOperator::at_bloch_point(rho, 1, point)?;
    let jd = jordan_chain_m1(&op1, point)?;
    let p = jd.projector_matrix();
    let deflated = p.dot(&op1.matrix).dot(&p);
    per_harmonic.push((1, smallest_singular(&deflated, 2)?));
    let mut m = 3;
    while m <= max_m {
        let op = spatial::assemble_am(rho, m, point.omega, point.omega_sq, point.cg, point.l, point.k_max)?;
        let sigma = smallest_singular(&op.matrix, 0)?;
        if sigma < 1e-10 {
            return Err(Error::numerical(format!(
                "harmonic m = {m} is resonant: sigma_min = {sigma:.3e}"
            )));
        }
        per_harmonic.push((m, sigma));
        m += 2;
    }
    let c0_estimate = per_harmonic
        .iter()
        .map(|(_, s)| 1.0 / s)
        .fold(0.0f64, f64::max);
    Ok(ResolventHealth {
        per_harmonic,
        c0_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(rho: &PeriodicCoefficient, l0: f64, k_max: usize) -> (SpatialOperator, BlochPoint, JordanData) {
        let point = BlochPoint::compute(rho, 0, l0, k_max).unwrap();
        let op = SpatialOperator::at_bloch_point(rho, 1, &point).unwrap();
        let jd = jordan_chain_m1(&op, &point).unwrap();
        (op, point, jd)
    }

    fn cosine_medium() -> PeriodicCoefficient {
        PeriodicCoefficient::new(vec![1.0, 0.3], "rho").unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<Complex64> {
        Array1::from_iter((0..n).map(|_| {
            Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        }))
    }

    #[test]
    fn chain_residuals_and_duality() {
        for (rho, l0) in [(cosine_medium(), 0.25), (PeriodicCoefficient::constant(1.0).unwrap(), 0.35)] {
            let (_, _, jd) = setup(&rho, l0, 16);
            for r in jd.chain_residuals {
                assert!(r <= 1e-8, "chain residual {r:.3e}");
            }
            assert!(jd.max_duality_deviation() <= 1e-8);
        }
    }

    #[test]
    fn nu_matches_closed_form() {
        // ν = (2i/(ω₀ω''))[(c_g ω₀ - l₀) Σ|∂_l f̂|² - Σ k |∂_l f̂_k|²]·2π
        // in the gauge with ⟨f, ∂_l f⟩ = 0.
        let rho = cosine_medium();
        let (op, point, jd) = setup(&rho, 0.25, 16);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (i, k) in modes(op.k_max).enumerate() {
            s1 += point.dlf_hat[i].norm_sqr();
            s2 += k as f64 * point.dlf_hat[i].norm_sqr();
        }
        s1 *= TWO_PI;
        s2 *= TWO_PI;
        let closed = Complex64::new(0.0, 2.0 / (point.omega * point.omega_pp))
            * ((point.cg * point.omega - op.l0) * s1 - s2);
        assert!((jd.nu - closed).norm() <= 1e-10, "nu = {}, closed = {closed}", jd.nu);
        // Purely imaginary in this gauge, and nonzero for a genuine medium.
        assert!(jd.nu.re.abs() < 1e-12);
        assert!(jd.nu.norm() > 0.1);
    }

    #[test]
    fn constant_medium_nu_vanishes() {
        let rho = PeriodicCoefficient::constant(1.0).unwrap();
        let (_, point, jd) = setup(&rho, 0.35, 16);
        // f̂ is a single mode independent of l, so ∂_l f̂ = 0 and ν = 0.
        assert!(point.dlf_hat.iter().all(|z| z.norm() < 1e-12));
        assert!(jd.nu.norm() < 1e-12);
    }

    #[test]
    fn projector_is_spectral() {
        let rho = cosine_medium();
        let (op, _, jd) = setup(&rho, 0.25, 16);
        let p = jd.projector_matrix();
        let p2 = p.dot(&p);
        let mut dev = 0.0f64;
        for i in 0..p.nrows() {
            for j in 0..p.ncols() {
                dev = dev.max((p2[[i, j]] - p[[i, j]]).norm());
            }
        }
        assert!(dev <= 1e-10, "idempotence deviation {dev:.3e}");
        // Kernel contains the chain.
        assert!(norm2(&jd.project(&jd.f0)) <= 1e-10);
        assert!(norm2(&jd.project(&jd.f1)) <= 1e-10);
        // Range is the annihilator of the dual chain; Π commutes with A₁.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let psi = random_vec(&mut rng, 2 * op.block_dim());
            let proj = jd.project(&psi);
            assert!(pair2(&jd.g0, &proj).norm() <= 1e-10);
            assert!(pair2(&jd.g1, &proj).norm() <= 1e-10);
            let lhs = jd.project(&op.matrix.dot(&psi));
            let rhs = op.matrix.dot(&jd.project(&psi));
            assert!(norm2(&(&lhs - &rhs)) <= 1e-8 * norm2(&psi).max(1.0));
        }
        // Matrix and functional forms agree.
        let psi = random_vec(&mut rng, 2 * op.block_dim());
        assert!(norm2(&(&p.dot(&psi) - &jd.project(&psi))) <= 1e-12);
    }

    #[test]
    fn deflated_solve_recovers_ranged_solution() {
        let rho = cosine_medium();
        let (op, _, jd) = setup(&rho, 0.25, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = jd.project(&random_vec(&mut rng, 2 * op.block_dim()));
        let rhs = op.matrix.dot(&w);
        let s = deflated_solve(&op, &jd, &rhs).unwrap();
        // S lies in the range of Π and solves the projected equation.
        assert!(norm2(&(&jd.project(&s) - &s)) <= 1e-9);
        let res = jd.project(&(&op.matrix.dot(&s) - &rhs));
        assert!(norm2(&res) <= 1e-9);
        assert!(norm2(&(&s - &w)) <= 1e-8, "deviation {:.3e}", norm2(&(&s - &w)));
        // Kernel components in the rhs are absorbed, not amplified.
        let rhs2 = &rhs + &jd.f0.mapv(|z| z * 0.5) + &jd.f1.mapv(|z| z * 0.25);
        let s2 = deflated_solve(&op, &jd, &rhs2).unwrap();
        assert!(norm2(&(&s2 - &w)) <= 1e-8);
    }

    #[test]
    fn resolvent_health_constant_medium() {
        let rho = PeriodicCoefficient::constant(1.0).unwrap();
        let point = BlochPoint::compute(&rho, 0, 0.35, 16).unwrap();
        let health = resolvent_health(&rho, &point, 5).unwrap();
        assert_eq!(health.per_harmonic.len(), 3);
        // Near-normal blocks: σ_min within a modest factor of min |λ|.
        let op3 = SpatialOperator::at_bloch_point(&rho, 3, &point).unwrap();
        let min_abs = spatial::spectrum(&op3)
            .unwrap()
            .iter()
            .map(|p| p.lambda.norm())
            .fold(f64::INFINITY, f64::min);
        let sigma3 = health.per_harmonic[1].1;
        assert!(sigma3 >= 0.1 * min_abs && sigma3 <= min_abs + 1e-8);
        assert!(health.per_harmonic[0].1 > 1e-3);
        assert!(health.c0_estimate.is_finite() && health.c0_estimate > 0.0);
    }

    #[test]
    fn resolvent_health_stable_under_truncation() {
        let rho = cosine_medium();
        let coarse = BlochPoint::compute(&rho, 0, 0.25, 16).unwrap();
        let fine = BlochPoint::compute(&rho, 0, 0.25, 32).unwrap();
        let hc = resolvent_health(&rho, &coarse, 3).unwrap();
        let hf = resolvent_health(&rho, &fine, 3).unwrap();
        for (a, b) in hc.per_harmonic.iter().zip(hf.per_harmonic.iter()) {
            assert_eq!(a.0, b.0);
            assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-6);
        }
    }
}
