//! Envelope equation constants and the sech pulse.
//!
//! A wave packet centered on one Bloch band evolves, to leading order, by a
//! nonlinear Schroedinger equation for its envelope. This example derives all
//! constants of that reduction for the constant medium at l0 = 0.35: carrier
//! frequency, group velocity, band curvature, the cubic coefficient, and the
//! amplitude/width of the resulting sech-shaped standing pulse. It then
//! substitutes the pulse back into the stationary envelope equation and prints
//! the residual, which should sit at rounding level.
//!
//! Run with: cargo run --release --example envelope_constants

use modpulse::bloch::BlochPoint;
use modpulse::envelope::{soliton, stationary_nls_residual, EnvelopeParams};
use modpulse::PeriodicCoefficient;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rho = PeriodicCoefficient::constant(1.0)?;
    let weight = PeriodicCoefficient::constant(1.0)?;
    let point = BlochPoint::compute(&rho, 0, 0.35, 16)?;
    let params = EnvelopeParams::derive(&point, &weight, 1.0, 0.1)?;

    println!("envelope reduction at band {}, l0 = {}", params.n0, params.l0);
    println!("  carrier frequency  omega0   = {:.12}", params.omega0);
    println!("  group velocity     cg       = {:.12}", params.cg);
    println!("  band curvature     omega''  = {:.12}", params.omega_pp);
    println!("  cubic coefficient  gamma_nl = {:.12}", params.gamma_nl);
    println!("  detuning           omega~   = {:.12}", params.omega_tilde);
    println!("  pulse amplitude    gamma1   = {:.12}", params.gamma1);
    println!("  inverse width      gamma2   = {:.12}", params.gamma2);
    println!(
        "  shifted frequency  omega0 + eps^2 omega~ = {:.12}  (eps = {})",
        params.omega_eps(),
        params.epsilon
    );

    // The pulse A(X) = gamma1 sech(gamma2 X) solves
    //   -(omega''/2) A'' - omega~ A + (gamma_nl/4) A^3 = 0.
    let n = 4096;
    let xs: Vec<f64> = (0..n).map(|i| -30.0 + 60.0 * i as f64 / (n - 1) as f64).collect();
    let a: Vec<f64> = xs.iter().map(|&x| soliton(&params, x)).collect();
    let res = stationary_nls_residual(&params, &xs, &a)?;
    println!();
    println!("stationary equation residual of the sech pulse: {:.3e}", res);
    println!("pulse peak A(0) = {:.6}, half-height width = {:.4}", soliton(&params, 0.0), 2.0 * (2.0 + 3.0f64.sqrt()).ln() / params.gamma2);

    Ok(())
}
