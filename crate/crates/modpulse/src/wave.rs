//! Time-domain integration of ∂²ₜu = ∂²ₓu − ρ(x)u + γ r(x)u³ on a periodic
//! domain of Q coefficient cells, plus the measurements that test a launched
//! modulating pulse: demodulated envelope position and speed, tail amplitude,
//! distance to the two-mode approximation, and backward-light-cone energy.
//!
//! The stepper is a second-order leapfrog on a uniform grid. Two properties
//! make it the right tool here rather than a spectral integrator. First, it
//! conserves a discrete energy exactly when γ = 0, so energy audits resolve
//! roundoff rather than scheme drift. Second, its domain of dependence is one
//! cell per step, so with dt ≤ 0.9·dx the numerical light cone contains the
//! physical one and finite propagation speed can be tested to machine
//! precision with twin runs.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::bloch::BlochPoint;
use crate::coeff::PeriodicCoefficient;
use crate::envelope::{self, EnvelopeParams, PulseProfile, Taper, XGrid};
use crate::error::{Error, Result};
use crate::fourier::{self, TWO_PI};

/// Largest allowed dt/dx ratio; keeps the physical cone (speed 1) strictly
/// inside the numerical one.
pub const MAX_CFL: f64 = 0.9;

/// Medium coefficients sampled at every grid point, with the cubic strength.
#[derive(Debug, Clone)]
pub struct GridMedium {
    pub rho_x: Vec<f64>,
    pub r_x: Vec<f64>,
    pub gamma: f64,
}

impl GridMedium {
    pub fn sample(
        rho: &PeriodicCoefficient,
        r: &PeriodicCoefficient,
        gamma: f64,
        grid: &XGrid,
    ) -> Self {
        let n = grid.n();
        let rho_x = (0..n).map(|j| rho.eval(grid.x(j))).collect();
        let r_x = (0..n).map(|j| r.eval(grid.x(j))).collect();
        GridMedium { rho_x, r_x, gamma }
    }
}

/// Leapfrog pair: `u_curr` at time `t`, `u_prev` one step earlier.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub grid: XGrid,
    pub dt: f64,
    pub t: f64,
    pub u_curr: Vec<f64>,
    pub u_prev: Vec<f64>,
}

/// D₂u − ρu + γru³ at every point, periodic wrap.
fn acceleration(u: &[f64], medium: &GridMedium, dx: f64) -> Vec<f64> {
    let n = u.len();
    let inv_dx2 = 1.0 / (dx * dx);
    (0..n)
        .map(|j| {
            let left = u[(j + n - 1) % n];
            let right = u[(j + 1) % n];
            let lap = (right - 2.0 * u[j] + left) * inv_dx2;
            lap - medium.rho_x[j] * u[j] + medium.gamma * medium.r_x[j] * u[j] * u[j] * u[j]
        })
        .collect()
}

impl WaveField {
    /// Seeds the pair from (u, ∂ₜu) at t = 0: u_prev = u⁰ and u_curr the
    /// second-order Taylor step u⁰ + dt·u¹ + dt²/2·(D₂u⁰ − ρu⁰ + γr(u⁰)³).
    pub fn from_initial_data(
        grid: &XGrid,
        dt_factor: f64,
        u0: &[f64],
        u1: &[f64],
        medium: &GridMedium,
    ) -> Result<Self> {
        let n = grid.n();
        if u0.len() != n || u1.len() != n || medium.rho_x.len() != n {
            return Err(Error::invalid("initial data and medium must match the grid"));
        }
        if !(dt_factor > 0.0 && dt_factor <= MAX_CFL) {
            return Err(Error::invalid(format!(
                "dt factor {dt_factor} outside (0, {MAX_CFL}]; the numerical cone must contain the physical one"
            )));
        }
        if u0.iter().chain(u1.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial data contains non-finite samples"));
        }
        let dt = dt_factor * grid.dx();
        let acc = acceleration(u0, medium, grid.dx());
        let u_curr = (0..n)
            .map(|j| u0[j] + dt * u1[j] + 0.5 * dt * dt * acc[j])
            .collect();
        Ok(WaveField {
            grid: *grid,
            dt,
            t: dt,
            u_curr,
            u_prev: u0.to_vec(),
        })
    }

    /// Direct two-level seed for callers that already hold consecutive
    /// samples (exact traveling waves, restart data).
    pub fn from_pair(
        grid: &XGrid,
        dt_factor: f64,
        u_prev: Vec<f64>,
        u_curr: Vec<f64>,
        t: f64,
    ) -> Result<Self> {
        if u_prev.len() != grid.n() || u_curr.len() != grid.n() {
            return Err(Error::invalid("pair length must match the grid"));
        }
        if !(dt_factor > 0.0 && dt_factor <= MAX_CFL) {
            return Err(Error::invalid("dt factor outside (0, 0.9]"));
        }
        Ok(WaveField {
            grid: *grid,
            dt: dt_factor * grid.dx(),
            t,
            u_curr,
            u_prev,
        })
    }

    /// The next line u^{n+1} = 2u^n − u^{n−1} + dt²(D₂u^n − ρu^n + γr(u^n)³),
    /// without committing it. Fails on the first non-finite sample, naming the
    /// last valid time.
    pub fn next_state(&self, medium: &GridMedium) -> Result<Vec<f64>> {
        let acc = acceleration(&self.u_curr, medium, self.grid.dx());
        let dt2 = self.dt * self.dt;
        let next: Vec<f64> = (0..self.u_curr.len())
            .map(|j| 2.0 * self.u_curr[j] - self.u_prev[j] + dt2 * acc[j])
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "field blew up; last valid time t = {:.6}",
                self.t
            )));
        }
        Ok(next)
    }

    /// Commits a line produced by `next_state`.
    pub fn advance(&mut self, next: Vec<f64>) {
        std::mem::swap(&mut self.u_prev, &mut self.u_curr);
        self.u_curr = next;
        self.t += self.dt;
    }

    /// One leapfrog step.
    pub fn step(&mut self, medium: &GridMedium) -> Result<()> {
        let next = self.next_state(medium)?;
        self.advance(next);
        Ok(())
    }

    /// Time of the pair's half-step energy, t − dt/2.
    pub fn half_time(&self) -> f64 {
        self.t - 0.5 * self.dt
    }

    /// The discrete energy the leapfrog conserves exactly when γ = 0:
    /// ½·dx·Σ ((u⁺−u)/dt)² + D₊u⁺·D₊u + ρu⁺u over the stored pair. Its change
    /// across one step equals the forcing work ½·dx·Σ γru³(u^{n+1}−u^{n−1}).
    pub fn global_energy(&self, medium: &GridMedium) -> f64 {
        let dx = self.grid.dx();
        let n = self.u_curr.len();
        let mut e = 0.0;
        for j in 0..n {
            e += self.energy_density(medium, j, n, dx);
        }
        e * dx
    }

    fn energy_density(&self, medium: &GridMedium, j: usize, n: usize, dx: f64) -> f64 {
        let jp = (j + 1) % n;
        let du = (self.u_curr[j] - self.u_prev[j]) / self.dt;
        let gc = (self.u_curr[jp] - self.u_curr[j]) / dx;
        let gp = (self.u_prev[jp] - self.u_prev[j]) / dx;
        0.5 * (du * du + gc * gp + medium.rho_x[j] * self.u_curr[j] * self.u_prev[j])
    }
}

/// Backward light cone with apex (x0, t0): at time t the energy window is
/// |x − x0| ≤ t0 − t.
#[derive(Debug, Clone, Copy)]
pub struct Cone {
    pub x0: f64,
    pub t0: f64,
}

/// Trapezoidal energy of the stored pair over the cone's window at the pair's
/// half-step time. Errors when the cone has closed or leaves the domain.
pub fn cone_energy(field: &WaveField, medium: &GridMedium, cone: &Cone) -> Result<f64> {
    let t = field.half_time();
    let radius = cone.t0 - t;
    if radius < 0.0 {
        return Err(Error::invalid(format!(
            "cone with apex time {} has closed before t = {t:.3}",
            cone.t0
        )));
    }
    let dx = field.grid.dx();
    let length = field.grid.length();
    let (lo, hi) = (cone.x0 - radius, cone.x0 + radius);
    if lo < 0.0 || hi >= length {
        return Err(Error::invalid(format!(
            "cone window [{lo:.2}, {hi:.2}] leaves the domain [0, {length:.2})"
        )));
    }
    let j_lo = (lo / dx).ceil() as usize;
    let j_hi = (hi / dx).floor() as usize;
    if j_lo > j_hi {
        return Ok(0.0);
    }
    let n = field.u_curr.len();
    let mut e = 0.0;
    for j in j_lo..=j_hi {
        let w = if j == j_lo || j == j_hi { 0.5 } else { 1.0 };
        e += w * field.energy_density(medium, j, n, dx);
    }
    if j_lo == j_hi {
        e = field.energy_density(medium, j_lo, n, dx);
    }
    Ok(e * dx)
}

/// Work done by the cubic forcing during one step, dx·Σ γru³·(u^{n+1}−u^{n−1})/2,
/// restricted to the cone's window at the step's centre time when given.
fn forcing_work(
    field: &WaveField,
    next: &[f64],
    medium: &GridMedium,
    cone: Option<&Cone>,
) -> f64 {
    if medium.gamma == 0.0 {
        return 0.0;
    }
    let dx = field.grid.dx();
    let window = cone.map(|c| (c.x0, c.t0 - field.t));
    let mut w = 0.0;
    for j in 0..next.len() {
        if let Some((x0, radius)) = window {
            if (field.grid.x(j) - x0).abs() > radius {
                continue;
            }
        }
        let u = field.u_curr[j];
        w += medium.gamma * medium.r_x[j] * u * u * u * (next[j] - field.u_prev[j]);
    }
    0.5 * dx * w
}

/// Extracts the slow complex envelope riding the e^{i(l₀x−ωt)} carrier:
/// (u + i∂ₜu/ω)/2 demodulated, projected on the carrier Bloch function and
/// low-pass filtered at wavenumber 1/4.
pub struct Demodulator {
    l0: f64,
    omega: f64,
    keep: usize,
    fbar: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Demodulator {
    pub fn new(point: &BlochPoint, omega: f64, grid: &XGrid) -> Self {
        let n = grid.n();
        let cell = fourier::synth(&point.f_hat, point.k_max, grid.points_per_cell);
        let fbar = (0..n).map(|j| cell[j % grid.points_per_cell].conj()).collect();
        let mut planner = FftPlanner::new();
        Demodulator {
            l0: point.l,
            omega,
            keep: grid.cells / 4,
            fbar,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        }
    }

    /// Envelope samples at the pair's half-step time.
    pub fn envelope(&self, field: &WaveField) -> Vec<Complex64> {
        let n = field.u_curr.len();
        let t = field.half_time();
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| {
                let u = 0.5 * (field.u_curr[j] + field.u_prev[j]);
                let du = (field.u_curr[j] - field.u_prev[j]) / field.dt;
                let z = 0.5 * Complex64::new(u, du / self.omega);
                let phase =
                    Complex64::from_polar(1.0, self.omega * t - self.l0 * field.grid.x(j));
                z * phase * self.fbar[j]
            })
            .collect();
        self.fft.process(&mut buf);
        for (m, v) in buf.iter_mut().enumerate() {
            let k = if m <= n / 2 { m } else { n - m };
            if k > self.keep {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        self.ifft.process(&mut buf);
        let scale = TWO_PI / n as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }
}

/// Weighted circular mean of |env|² positions on the periodic domain, in
/// [0, length).
pub fn envelope_centroid(env: &[Complex64], grid: &XGrid) -> f64 {
    let length = grid.length();
    let mut sum = Complex64::new(0.0, 0.0);
    for (j, v) in env.iter().enumerate() {
        let w = v.norm_sqr();
        sum += w * Complex64::from_polar(1.0, TWO_PI * grid.x(j) / length);
    }
    if sum.norm() < 1e-300 {
        return 0.0;
    }
    let mut c = sum.arg() / TWO_PI * length;
    if c < 0.0 {
        c += length;
    }
    c
}

/// Least-squares slope of y against t.
pub fn fit_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let den: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    num / den
}

/// Everything that defines the launched pulse.
pub struct PulseLaunch<'a> {
    pub params: &'a EnvelopeParams,
    pub point: &'a BlochPoint,
    pub profile: &'a PulseProfile,
    pub taper: &'a Taper,
    pub grid: &'a XGrid,
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// dt = dt_factor·dx; must lie in (0, 0.9].
    pub dt_factor: f64,
    /// Requested horizon; the run stops at min(t_final, ε⁻²).
    pub t_final: f64,
    /// Steps between diagnostic records.
    pub stride: usize,
    /// Light-cone energy window; cone energy and cone-restricted forcing work
    /// are recorded when present.
    pub cone: Option<Cone>,
    /// Steps between stored field snapshots; 0 stores none.
    pub snapshot_stride: usize,
}

/// Time series recorded every `stride` steps (t column holds the u_curr time;
/// energies live at t − dt/2).
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub t: Vec<f64>,
    /// Unwrapped envelope centroid (monotone across the periodic seam).
    pub centroid: Vec<f64>,
    /// Max |u| outside the window of half-width 3/(εγ₂) around the centroid.
    pub tail_amp: Vec<f64>,
    /// Sup distance to the traveling two-mode approximation.
    pub approx_err: Vec<f64>,
    pub global_energy: Vec<f64>,
    /// Cone energy when a cone is configured, else empty.
    pub cone_energy: Vec<f64>,
    /// Cumulative forcing work (cone-restricted when a cone is configured).
    pub forcing_work: Vec<f64>,
    /// Least-squares centroid speed.
    pub speed_fit: f64,
}

impl Diagnostics {
    pub fn max_approx_err(&self) -> f64 {
        self.approx_err.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest violation of E(t₂) ≤ E(t₁) + ΔW + 1e−6·E(t₁) + 1e−12 over all
    /// recorded pairs t₁ < t₂; non-positive means the light-cone energy
    /// inequality holds everywhere. None without cone data.
    pub fn cone_inequality_margin(&self) -> Option<f64> {
        if self.cone_energy.is_empty() {
            return None;
        }
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.cone_energy.len() {
            for j in i + 1..self.cone_energy.len() {
                let dw = self.forcing_work[j] - self.forcing_work[i];
                let slack = 1e-6 * self.cone_energy[i] + 1e-12;
                worst = worst.max(self.cone_energy[j] - self.cone_energy[i] - dw - slack);
            }
        }
        Some(worst)
    }
}

pub struct SimOutput {
    pub diagnostics: Diagnostics,
    pub field: WaveField,
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

/// Launches the pulse and integrates to min(t_final, ε⁻²), recording
/// diagnostics every `stride` steps and always at the final step.
pub fn simulate(
    launch: &PulseLaunch,
    rho: &PeriodicCoefficient,
    r: &PeriodicCoefficient,
    gamma: f64,
    opts: &SimOptions,
) -> Result<SimOutput> {
    if opts.stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if !(opts.t_final > 0.0) {
        return Err(Error::invalid("t_final must be positive"));
    }
    let params = launch.params;
    let medium = GridMedium::sample(rho, r, gamma, launch.grid);
    let (u0, u1) = envelope::build_initial_data(
        params,
        launch.point,
        launch.profile,
        launch.taper,
        launch.grid,
    )?;
    let mut field =
        WaveField::from_initial_data(launch.grid, opts.dt_factor, &u0, &u1, &medium)?;
    let horizon = opts.t_final.min(1.0 / (params.epsilon * params.epsilon));
    let steps = ((horizon - field.t) / field.dt).ceil().max(0.0) as usize;

    let demod = Demodulator::new(launch.point, params.omega_eps(), launch.grid);
    let window = 3.0 / (params.epsilon * params.gamma2);
    let length = launch.grid.length();

    let mut diag = Diagnostics {
        t: Vec::new(),
        centroid: Vec::new(),
        tail_amp: Vec::new(),
        approx_err: Vec::new(),
        global_energy: Vec::new(),
        cone_energy: Vec::new(),
        forcing_work: Vec::new(),
        speed_fit: f64::NAN,
    };
    let mut snapshots = Vec::new();
    let mut work_total = 0.0;
    let mut prev_raw: Option<f64> = None;
    let mut unwrapped = 0.0;

    let mut record = |field: &WaveField, diag: &mut Diagnostics, work_total: f64| -> Result<()> {
        let env = demod.envelope(field);
        let raw = envelope_centroid(&env, launch.grid);
        match prev_raw {
            None => unwrapped = raw,
            Some(p) => {
                let mut d = raw - p;
                if d > 0.5 * length {
                    d -= length;
                } else if d < -0.5 * length {
                    d += length;
                }
                unwrapped += d;
            }
        }
        prev_raw = Some(raw);
        let mut tail = 0.0f64;
        for (j, &u) in field.u_curr.iter().enumerate() {
            let mut d = (field.grid.x(j) - raw).abs();
            if d > 0.5 * length {
                d = length - d;
            }
            if d > window {
                tail = tail.max(u.abs());
            }
        }
        let u_app = envelope::approximate_pulse(
            params,
            launch.point,
            launch.profile,
            launch.taper,
            launch.grid,
            field.t,
        )?;
        let err = field
            .u_curr
            .iter()
            .zip(&u_app)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        diag.t.push(field.t);
        diag.centroid.push(unwrapped);
        diag.tail_amp.push(tail);
        diag.approx_err.push(err);
        diag.global_energy.push(field.global_energy(&medium));
        if let Some(c) = &opts.cone {
            diag.cone_energy.push(cone_energy(field, &medium, c)?);
            diag.forcing_work.push(work_total);
        } else {
            diag.forcing_work.push(work_total);
        }
        Ok(())
    };

    record(&field, &mut diag, work_total)?;
    if opts.snapshot_stride > 0 {
        snapshots.push((field.t, field.u_curr.clone()));
    }
    for n in 1..=steps {
        let next = field.next_state(&medium)?;
        work_total += forcing_work(&field, &next, &medium, opts.cone.as_ref());
        field.advance(next);
        if n % opts.stride == 0 || n == steps {
            record(&field, &mut diag, work_total)?;
        }
        if opts.snapshot_stride > 0 && (n % opts.snapshot_stride == 0 || n == steps) {
            snapshots.push((field.t, field.u_curr.clone()));
        }
    }
    diag.speed_fit = fit_slope(&diag.t, &diag.centroid);
    if diag
        .centroid
        .iter()
        .chain(&diag.tail_amp)
        .chain(&diag.approx_err)
        .any(|v| !v.is_finite())
    {
        return Err(Error::numerical("non-finite diagnostic series"));
    }
    Ok(SimOutput {
        diagnostics: diag,
        field,
        snapshots,
    })
}
