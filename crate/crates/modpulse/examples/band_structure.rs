//! Band structure of the periodic wave operator.
//!
//! Sweeps the Bloch eigenvalue problem over the Brillouin zone for a cosine
//! medium and prints the lowest bands together with their first two
//! l-derivatives (group velocity and curvature). Also evaluates the constant
//! medium, where every band is known in closed form, and reports the largest
//! deviation from sqrt(1 + (k + l)^2) as a built-in accuracy check.
//!
//! Run with: cargo run --release --example band_structure

use modpulse::bloch::band_sweep;
use modpulse::PeriodicCoefficient;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k_max = 16;

    // Structured medium: rho(x) = 1 + 0.3 cos x.
    let rho = PeriodicCoefficient::new(vec![1.0, 0.3], "rho")?;
    let l_values: Vec<f64> = (0..=20).map(|j| -0.5 + (j + 1) as f64 / 21.0).collect();
    let rows = band_sweep(&rho, &l_values, 4, k_max, true)?;

    println!("bands of -u'' + rho u = omega^2 u, rho = 1 + 0.3 cos x");
    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "l", "omega_0", "omega_1", "omega_2", "omega_3");
    for chunk in rows.chunks(4) {
        print!("{:8.4}", chunk[0].l);
        for row in chunk {
            print!(" {:12.8}", row.omega);
        }
        println!();
    }

    // Derivatives at the working point l = 0.35 of the lowest band.
    let at = rows
        .iter()
        .filter(|r| r.n == 0)
        .min_by(|a, b| (a.l - 0.35).abs().total_cmp(&(b.l - 0.35).abs()))
        .unwrap();
    println!();
    println!(
        "lowest band near l = {:.3}: omega = {:.8}, cg = {:+.6}, omega'' = {:+.6}",
        at.l,
        at.omega,
        at.cg.unwrap(),
        at.omega_pp.unwrap()
    );

    // Constant-medium oracle: omega_n(l) enumerates sqrt(1 + (k + l)^2).
    let unit = PeriodicCoefficient::constant(1.0)?;
    let rows = band_sweep(&unit, &l_values, 6, k_max, false)?;
    let mut worst = 0.0f64;
    for row in &rows {
        // Band n at l picks the n-th smallest |k + l| over integer k.
        let mut shifts: Vec<f64> = (-(k_max as i64)..=k_max as i64)
            .map(|k| (k as f64 + row.l).abs())
            .collect();
        shifts.sort_by(f64::total_cmp);
        let exact = (1.0 + shifts[row.n] * shifts[row.n]).sqrt();
        worst = worst.max((row.omega - exact).abs());
    }
    println!();
    println!(
        "constant medium, {} eigenvalues vs sqrt(1 + (k + l)^2): max |error| = {:.3e}",
        rows.len(),
        worst
    );

    Ok(())
}
