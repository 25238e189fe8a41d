//! Launching the modulating pulse in the full wave equation.
//!
//! Builds two-level initial data for the tapered two-mode pulse, integrates
//! the semilinear wave equation with the leapfrog scheme to the envelope time
//! horizon 1/eps^2, and tracks the envelope by demodulating the carrier: the
//! centroid should travel at the group velocity, the sup distance to the
//! traveling approximation should stay of size eps^2 t, and the amplitude
//! outside the pulse window (the "tail") should stay small. A light-cone
//! energy window around the pulse verifies the energy inequality on the fly.
//!
//! Run with: cargo run --release --example pulse_simulation

use modpulse::bloch::BlochPoint;
use modpulse::envelope::{EnvelopeParams, PulseProfile, Taper, XGrid};
use modpulse::wave::{simulate, Cone, PulseLaunch, SimOptions};
use modpulse::PeriodicCoefficient;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rho = PeriodicCoefficient::constant(1.0)?;
    let weight = PeriodicCoefficient::constant(1.0)?;
    let point = BlochPoint::compute(&rho, 0, 0.35, 8)?;
    let eps = 0.1;
    let params = EnvelopeParams::derive(&point, &weight, 1.0, eps)?;

    let profile = PulseProfile::leading_order(&params, 4.5 / eps, 2048)?;
    let taper = Taper::for_profile(&params, &profile)?;
    let grid = XGrid::new(48, 128)?;
    let launch = PulseLaunch {
        params: &params,
        point: &point,
        profile: &profile,
        taper: &taper,
        grid: &grid,
    };

    let opts = SimOptions {
        dt_factor: 0.9,
        t_final: 100.0,
        stride: 20,
        cone: Some(Cone { x0: grid.center(), t0: 140.0 }),
        snapshot_stride: 0,
    };
    let out = simulate(&launch, &rho, &weight, 1.0, &opts)?;
    let d = &out.diagnostics;

    println!(
        "integrated to t = {:.2} on {} points (dx = {:.4}, dt = {:.4})",
        out.field.t,
        grid.n(),
        grid.dx(),
        0.9 * grid.dx()
    );
    println!();
    println!("{:>8} {:>12} {:>12} {:>12} {:>14}", "t", "centroid", "tail", "approx err", "cone energy");
    let m = d.t.len();
    for k in 0..=8 {
        let i = (m - 1) * k / 8;
        println!(
            "{:8.2} {:12.4} {:12.4e} {:12.4e} {:14.8}",
            d.t[i], d.centroid[i], d.tail_amp[i], d.approx_err[i], d.cone_energy[i]
        );
    }

    println!();
    println!(
        "envelope speed: fitted {:.5} vs group velocity {:.5} ({:+.2}%)",
        d.speed_fit,
        params.cg,
        100.0 * (d.speed_fit - params.cg) / params.cg
    );
    println!("max sup-distance to the two-mode approximation: {:.4e}", d.max_approx_err());
    if let Some(margin) = d.cone_inequality_margin() {
        println!(
            "light-cone energy inequality: worst margin {:+.3e} over all recorded pairs ({})",
            margin,
            if margin <= 0.0 { "holds" } else { "violated" }
        );
    }

    Ok(())
}
