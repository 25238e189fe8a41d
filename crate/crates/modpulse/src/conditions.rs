//! Numerical verification of the hypotheses behind the pulse construction.
//!
//! The construction needs, at the chosen carrier (n₀, l₀):
//!
//! * nd1: the band ω_{n₀}(l₀) is simple;
//! * nd2: the carrier is noncharacteristic (|c_g| ≠ 1) and the band has
//!   curvature (ω'' ≠ 0);
//! * non-resonance: for each odd m ≤ 2N+1 no band satisfies
//!   ω_n(ml₀)² = m²ω₀² (band values taken at ml₀ reduced to the zone);
//! * a zero-eigenvalue exclusion for the higher-harmonic spatial operators,
//!   phrased through the closed-form dispersion of the reference medium via
//!   the rationals (m² - 1 - κ²)/(2mκ);
//! * positive gap constants D_m keeping purely imaginary spectrum away from
//!   the origin.
//!
//! All quantifiers over infinite index sets are truncated with explicit
//! monotone tail bounds, and every margin is reported, not just the verdict.

use serde::{Deserialize, Serialize};

use crate::bloch::{self, BandEig, BlochPoint};
use crate::coeff::PeriodicCoefficient;
use crate::error::{Error, Result};

/// A margin at or below this counts as a failed hypothesis.
pub const MARGIN_TOL: f64 = 1e-8;

/// Default enumeration cutoff for the κ sums; the linear-growth tail bound is
/// checked against it.
pub const KAPPA_MAX: u32 = 200;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonresonanceRow {
    pub m: u32,
    /// ml₀ reduced into (-1/2, 1/2].
    pub reduced_l: f64,
    /// min over bands of |ω_n²(reduced) - m²ω₀²|.
    pub margin: f64,
    /// Band index attaining the margin (magnitude order at reduced_l).
    pub nearest_band: usize,
    /// Bands enumerated before the monotone cutoff ω² > m²ω₀² + 1.
    pub bands_checked: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroEvRow {
    pub m: u32,
    pub kappa: u32,
    /// (m² - 1 - κ²)/(2mκ).
    pub rational: f64,
    /// |carrier exponent + l₀ - rational|.
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DmRow {
    pub m: u32,
    pub value: f64,
    /// κ attaining the infimum, if any κ was admissible.
    pub attained_kappa: Option<u32>,
    /// Lower bound for the κ > κ_max tail; the enumeration is conclusive
    /// because this exceeds the enumerated minimum.
    pub tail_bound: f64,
}

/// Full hypothesis report with explicit margins. `pass` requires every margin
/// to clear [`MARGIN_TOL`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n0: usize,
    pub l0: f64,
    pub n_harmonics: u32,
    pub k_max: usize,
    pub nd1_margin: f64,
    /// (|1 - |c_g||, |ω''|); absent when nd1 already failed, since the
    /// derivative identities need a simple band.
    pub nd2_margins: Option<(f64, f64)>,
    pub nr_margins: Vec<NonresonanceRow>,
    pub zero_ev_distances: Vec<ZeroEvRow>,
    pub dm: Vec<DmRow>,
    pub pass: bool,
}

/// Distance from band n₀ to the nearest other band at the same l.
pub fn nd1_margin(bands: &[BandEig], n0: usize) -> f64 {
    bands
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != n0)
        .map(|(_, b)| (b.omega - bands[n0].omega).abs())
        .fold(f64::INFINITY, f64::min)
}

/// (|1 - |c_g||, |ω''|) from a resolved point.
pub fn nd2_margins(point: &BlochPoint) -> (f64, f64) {
    ((1.0 - point.cg.abs()).abs(), point.omega_pp.abs())
}

/// Non-resonance margins for all odd m in 3..=2N+1. Needs K large enough
/// that the computed spectrum passes the cutoff m²ω₀² + 1.
pub fn check_nonresonance(
    rho: &PeriodicCoefficient,
    l0: f64,
    omega0_sq: f64,
    big_n: u32,
    k_max: usize,
) -> Result<Vec<NonresonanceRow>> {
    let mut rows = Vec::new();
    for m in (3..=2 * big_n + 1).step_by(2) {
        let reduced = bloch::reduce_to_brillouin(m as f64 * l0);
        let matrix = bloch::assemble_bloch_matrix(rho, reduced, k_max)?;
        let bands = bloch::solve_bands(&matrix)?;
        let target = (m * m) as f64 * omega0_sq;
        if bands.last().map(|b| b.lambda) <= Some(target + 1.0) {
            return Err(Error::invalid(format!(
                "K = {k_max} too small to clear the non-resonance cutoff for m = {m}"
            )));
        }
        let mut margin = f64::INFINITY;
        let mut nearest = 0usize;
        let mut checked = 0usize;
        for (n, b) in bands.iter().enumerate() {
            let d = (b.lambda - target).abs();
            if d < margin {
                margin = d;
                nearest = n;
            }
            checked = n + 1;
            // Bands are ascending; past this point |ω² - target| only grows
            // and already exceeds 1.
            if b.lambda > target + 1.0 {
                break;
            }
        }
        rows.push(NonresonanceRow {
            m,
            reduced_l: reduced,
            margin,
            nearest_band: nearest,
            bands_checked: checked,
        });
    }
    Ok(rows)
}

/// Distances |s - (m² - 1 - κ²)/(2mκ)| for odd m ≤ 2N+1, where s is the
/// carrier exponent plus l₀. κ runs from 1 until the rational has left the
/// interval [-10, ∞) for good (it decreases like -κ/(2m)).
pub fn check_zero_ev_cond2(s: f64, big_n: u32) -> Vec<ZeroEvRow> {
    let mut rows = Vec::new();
    for m in (3..=2 * big_n + 1).step_by(2) {
        let mut kappa = 1u32;
        loop {
            let r = ((m * m) as f64 - 1.0 - (kappa * kappa) as f64) / (2.0 * (m * kappa) as f64);
            if r < -10.0 {
                break;
            }
            rows.push(ZeroEvRow {
                m,
                kappa,
                rational: r,
                distance: (s - r).abs(),
            });
            kappa += 1;
        }
    }
    rows
}

/// Gap constant D_m = ω₀ · inf over κ ≥ 1 with (m - κs)² ≥ 1 of
/// |√((m - κs)² - 1) - κω₀|, enumerated to κ_max with the linear tail bound
/// |·| ≥ κ(ω₀ - s) used to certify the truncation (requires ω₀ > s).
pub fn compute_dm(s: f64, omega0: f64, m: u32, kappa_max: u32) -> Result<DmRow> {
    if omega0 <= s {
        return Err(Error::invalid(format!(
            "tail bound needs omega0 > carrier exponent + l0 ({omega0} <= {s})"
        )));
    }
    let mut best = f64::INFINITY;
    let mut attained = None;
    for kappa in 1..=kappa_max {
        let a = m as f64 - kappa as f64 * s;
        if a * a < 1.0 {
            continue;
        }
        let v = ((a * a - 1.0).sqrt() - kappa as f64 * omega0).abs();
        if v < best {
            best = v;
            attained = Some(kappa);
        }
    }
    let tail_bound = omega0 * (kappa_max + 1) as f64 * (omega0 - s);
    let value = if best.is_finite() { omega0 * best } else { f64::INFINITY };
    if value > tail_bound {
        return Err(Error::invalid(format!(
            "kappa_max = {kappa_max} too small: tail bound {tail_bound:.3e} below \
             enumerated minimum {value:.3e}"
        )));
    }
    Ok(DmRow {
        m,
        value,
        attained_kappa: attained,
        tail_bound,
    })
}

/// Runs every check at (n₀, l₀). Degeneracy and failed margins produce a
/// report with `pass = false`, not an error; errors are reserved for
/// inadequate discretization parameters.
pub fn check_all(
    rho: &PeriodicCoefficient,
    n0: usize,
    l0: f64,
    big_n: u32,
    k_max: usize,
) -> Result<ConditionReport> {
    let matrix = bloch::assemble_bloch_matrix(rho, l0, k_max)?;
    let bands = bloch::solve_bands(&matrix)?;
    if n0 >= bands.len() {
        return Err(Error::invalid(format!("band index {n0} out of range")));
    }
    let nd1 = nd1_margin(&bands, n0);
    let omega0_sq = bands[n0].lambda;
    let omega0 = bands[n0].omega;

    let nd2 = if nd1 > MARGIN_TOL {
        let point = BlochPoint::compute(rho, n0, l0, k_max)?;
        Some(nd2_margins(&point))
    } else {
        None
    };

    // Carrier exponent: dominant Fourier mode of the eigenfunction; the
    // closed-form diagnostics are phrased in terms of s = exponent + l₀.
    let carrier_k = {
        let f = &bands[n0].f_hat;
        let mut best = 0usize;
        let mut bm = -1.0;
        for (i, z) in f.iter().enumerate() {
            if z.norm() > bm {
                bm = z.norm();
                best = i;
            }
        }
        best as i64 - k_max as i64
    };
    let s = carrier_k as f64 + l0;

    // N = 0 leaves the odd-harmonic range 3..=2N+1 empty: only the
    // non-degeneracy checks run.
    let nr = if big_n >= 1 {
        check_nonresonance(rho, l0, omega0_sq, big_n, k_max)?
    } else {
        Vec::new()
    };
    let zero_ev = check_zero_ev_cond2(s, big_n);
    let mut dm = Vec::new();
    for m in std::iter::once(1).chain((3..=2 * big_n + 1).step_by(2)) {
        dm.push(compute_dm(s, omega0, m, KAPPA_MAX)?);
    }

    let mut pass = nd1 > MARGIN_TOL;
    match nd2 {
        Some((a, b)) => pass &= a > MARGIN_TOL && b > MARGIN_TOL,
        None => pass = false,
    }
    pass &= nr.iter().all(|r| r.margin > MARGIN_TOL);
    pass &= zero_ev.iter().all(|r| r.distance > MARGIN_TOL);
    pass &= dm.iter().all(|r| r.value > MARGIN_TOL);

    Ok(ConditionReport {
        n0,
        l0,
        n_harmonics: big_n,
        k_max,
        nd1_margin: nd1,
        nd2_margins: nd2,
        nr_margins: nr,
        zero_ev_distances: zero_ev,
        dm,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn const_one() -> PeriodicCoefficient {
        PeriodicCoefficient::constant(1.0).unwrap()
    }

    fn anchor_report() -> ConditionReport {
        check_all(&const_one(), 0, 0.35, 2, 24).unwrap()
    }

    #[test]
    fn anchor_passes_with_expected_margins() {
        let rep = anchor_report();
        assert!(rep.pass);
        // Nearest band at l = 0.35 is the k = -1 branch √(1 + 0.65²).
        let expect_nd1 = (1.0 + 0.65f64 * 0.65).sqrt() - 1.1225f64.sqrt();
        assert_abs_diff_eq!(rep.nd1_margin, expect_nd1, epsilon = 1e-10);
        let (c_margin, wpp_margin) = rep.nd2_margins.unwrap();
        assert!((c_margin - (1.0 - 0.35 / 1.1225f64.sqrt())).abs() < 1e-10);
        assert!((wpp_margin - 0.840854).abs() < 1e-5);
    }

    #[test]
    fn nonresonance_anchor_closed_form() {
        let rep = anchor_report();
        // m = 3: 3·0.35 reduces to 0.05; nearest candidate 1 + 3.05² against
        // 9·1.1225 leaves a margin of 0.2.
        let row3 = rep.nr_margins.iter().find(|r| r.m == 3).unwrap();
        assert_abs_diff_eq!(row3.reduced_l, 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(row3.margin, 0.2, epsilon = 1e-9);
        // Closed-form enumeration oracle for every m in the table.
        for row in &rep.nr_margins {
            let target = (row.m * row.m) as f64 * 1.1225;
            let mut closed = f64::INFINITY;
            for k in -30i64..=30 {
                let v = 1.0 + (k as f64 + row.reduced_l).powi(2);
                closed = closed.min((v - target).abs());
            }
            assert_abs_diff_eq!(row.margin, closed, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_ev_anchor_minimum() {
        let rep = anchor_report();
        let min = rep
            .zero_ev_distances
            .iter()
            .min_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap())
            .unwrap();
        // m = 3, κ = 2: (9 - 1 - 4)/12 = 1/3, distance |0.35 - 1/3|.
        assert_eq!((min.m, min.kappa), (3, 2));
        assert_abs_diff_eq!(min.distance, 0.35 - 1.0 / 3.0, epsilon = 1e-12);
        assert!((min.distance - 0.0166667).abs() < 1e-6);
        // m = 3, κ = 1: (9 - 1 - 1)/6 = 7/6.
        let r31 = rep
            .zero_ev_distances
            .iter()
            .find(|r| r.m == 3 && r.kappa == 1)
            .unwrap();
        assert_abs_diff_eq!(r31.distance, 7.0 / 6.0 - 0.35, epsilon = 1e-12);
        // Cutoff rule: every tabulated rational is ≥ -10.
        assert!(rep.zero_ev_distances.iter().all(|r| r.rational >= -10.0));
    }

    #[test]
    fn dm_anchor_enumeration_oracle() {
        let omega0 = 1.1225f64.sqrt();
        let d3 = compute_dm(0.35, omega0, 3, KAPPA_MAX).unwrap();
        // Independent brute-force enumeration over a wider range.
        let mut brute = f64::INFINITY;
        for kappa in 1..=400u32 {
            let a = 3.0 - kappa as f64 * 0.35;
            if a * a >= 1.0 {
                brute = brute.min(((a * a - 1.0).sqrt() - kappa as f64 * omega0).abs());
            }
        }
        assert_abs_diff_eq!(d3.value, omega0 * brute, epsilon = 1e-12);
        assert_eq!(d3.attained_kappa, Some(2));
        assert!((d3.value - 0.050569).abs() < 1e-5);
        // Doubling the range changes nothing (tail bound active).
        let d3b = compute_dm(0.35, omega0, 3, 2 * KAPPA_MAX).unwrap();
        assert_abs_diff_eq!(d3.value, d3b.value, epsilon = 0.0);
        // m = 1: κ = 1..5 inadmissible ((1 - 0.35κ)² < 1); first admissible 6.
        let d1 = compute_dm(0.35, omega0, 1, KAPPA_MAX).unwrap();
        assert_eq!(d1.attained_kappa, Some(6));
        assert!(d1.value > 1.0);
    }

    #[test]
    fn margins_stable_under_k_doubling() {
        let a = check_all(&const_one(), 0, 0.35, 2, 24).unwrap();
        let b = check_all(&const_one(), 0, 0.35, 2, 48).unwrap();
        assert!((a.nd1_margin - b.nd1_margin).abs() < 1e-10);
        for (ra, rb) in a.nr_margins.iter().zip(b.nr_margins.iter()) {
            assert!((ra.margin - rb.margin).abs() < 1e-10);
        }
        let rho = PeriodicCoefficient::new(vec![1.0, 0.3], "rho").unwrap();
        let c = check_all(&rho, 0, 0.35, 2, 24).unwrap();
        let d = check_all(&rho, 0, 0.35, 2, 48).unwrap();
        assert!((c.nd1_margin - d.nd1_margin).abs() < 1e-10);
        for (rc, rd) in c.nr_margins.iter().zip(d.nr_margins.iter()) {
            assert!((rc.margin - rd.margin).abs() < 1e-10);
        }
    }

    #[test]
    fn irrational_l0_all_margins_positive() {
        let l0 = std::f64::consts::FRAC_1_SQRT_2 - 0.5;
        let rep = check_all(&const_one(), 0, l0, 3, 32).unwrap();
        assert!(rep.pass, "report: nd1={}, pass should hold", rep.nd1_margin);
    }

    #[test]
    fn engineered_resonance_detected() {
        // For the constant medium, the m = 3 resonance condition
        // ω_n(3l)² = 9ω₀(l)² has a root at l = 1/3 (band exponent 3).
        // Locate it by bisection on engine band values, then confirm the
        // margin collapses there.
        let rho = const_one();
        let k_max = 16;
        let signed = |l0: f64| -> f64 {
            let red = bloch::reduce_to_brillouin(3.0 * l0);
            let m0 = bloch::assemble_bloch_matrix(&rho, l0, k_max).unwrap();
            let w0sq = bloch::solve_bands(&m0).unwrap()[0].lambda;
            let m3 = bloch::assemble_bloch_matrix(&rho, red, k_max).unwrap();
            let bands = bloch::solve_bands(&m3).unwrap();
            // Track the branch with exponent 3: closed-form guided selection
            // among engine eigenvalues.
            let guide = 1.0 + (3.0 + red).powi(2);
            let lam = bands
                .iter()
                .map(|b| b.lambda)
                .min_by(|a, b| (a - guide).abs().partial_cmp(&(b - guide).abs()).unwrap())
                .unwrap();
            lam - 9.0 * w0sq
        };
        let (mut lo, mut hi) = (0.32, 0.34);
        assert!(signed(lo) < 0.0 && signed(hi) > 0.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if signed(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((root - 1.0 / 3.0).abs() < 1e-9, "root {root}");
        let rep = check_all(&rho, 0, root, 1, 16).unwrap();
        let row = rep.nr_margins.iter().find(|r| r.m == 3).unwrap();
        assert!(row.margin < 1e-6, "margin {};", row.margin);
        assert!(!rep.pass);
    }

    #[test]
    fn forced_degeneracy_fails() {
        // At l₀ = 0 the second band belongs to a symmetric pair; nd1 = 0.
        let rep = check_all(&const_one(), 1, 0.0, 2, 24).unwrap();
        assert!(rep.nd1_margin < 1e-12);
        assert!(rep.nd2_margins.is_none());
        assert!(!rep.pass);
    }

    #[test]
    fn inadequate_k_rejected() {
        // K = 2 cannot reach bands past the m = 3 cutoff.
        assert!(check_all(&const_one(), 0, 0.35, 2, 2).is_err());
    }
}
