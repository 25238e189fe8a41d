//! Validity checks for the envelope reduction at a chosen Bloch point.
//!
//! The reduction to a single-band envelope equation needs the selected band to
//! be simple, its group velocity to stay subsonic, its curvature nonzero, the
//! odd carrier harmonics m l0 to avoid every band (no resonance), and two
//! families of small-divisor quantities to remain bounded away from zero.
//! This example runs the full battery twice: once at the working point
//! (lowest band, l0 = 0.35), which passes with quantified margins, and once
//! at the symmetric point l0 = 0 on the second band, which must fail because
//! the +k and -k branches collide there.
//!
//! Run with: cargo run --release --example hypothesis_check

use modpulse::conditions::check_all;
use modpulse::PeriodicCoefficient;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rho = PeriodicCoefficient::constant(1.0)?;

    let report = check_all(&rho, 0, 0.35, 2, 16)?;
    println!("working point: band {}, l0 = {}, harmonics up to {}", report.n0, report.l0, report.n_harmonics);
    println!("  band separation margin        {:.6}", report.nd1_margin);
    if let Some((nd2a, nd2b)) = report.nd2_margins {
        println!("  subsonic margin |1 - |cg||    {:.6}", nd2a);
        println!("  curvature margin |omega''|    {:.6}", nd2b);
    }
    for row in &report.nr_margins {
        println!(
            "  non-resonance m = {}: reduced l = {:+.3}, margin {:.6} (nearest band {}, {} checked)",
            row.m, row.reduced_l, row.margin, row.nearest_band, row.bands_checked
        );
    }
    // The crossing-distance table enumerates many kappa per harmonic; the
    // margin that matters is the per-harmonic minimum.
    for m in [3u32, 5] {
        let rows: Vec<_> = report.zero_ev_distances.iter().filter(|r| r.m == m).collect();
        if let Some(worst) = rows
            .iter()
            .min_by(|a, b| a.distance.total_cmp(&b.distance))
        {
            println!(
                "  eigenvalue-crossing distance m = {}: min {:.6} at kappa = {} ({} kappa values enumerated)",
                m,
                worst.distance,
                worst.kappa,
                rows.len()
            );
        }
    }
    for row in &report.dm {
        let at = row
            .attained_kappa
            .map(|k| format!("kappa = {k}"))
            .unwrap_or_else(|| "no admissible kappa".into());
        println!(
            "  divisor bound m = {}: D_m = {:.6} ({}, tail bound {:.3})",
            row.m, row.value, at, row.tail_bound
        );
    }
    println!("  verdict: {}", if report.pass { "PASS" } else { "FAIL" });

    // At l0 = 0 every band with k != 0 is degenerate with its mirror, so
    // selecting the second band forces the separation margin to zero.
    let bad = check_all(&rho, 1, 0.0, 2, 16)?;
    println!();
    println!(
        "degenerate point: band {}, l0 = {} -> separation margin {:.3e}, verdict {}",
        bad.n0,
        bad.l0,
        bad.nd1_margin,
        if bad.pass { "PASS" } else { "FAIL" }
    );

    Ok(())
}
