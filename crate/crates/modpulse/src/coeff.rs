//! Even, strictly positive, 2π-periodic coefficients stored as cosine series.
//!
//! Both the linear potential and the nonlinearity weight are elements of this
//! class. Cosine-only storage makes evenness structural: `eval(-x) == eval(x)`
//! holds exactly, which downstream modules rely on for the reversibility
//! symmetry of the traveling-wave problem.

use crate::error::{Error, Result};

/// Grid used to certify strict positivity at construction time.
const POSITIVITY_GRID: usize = 1024;

/// Even real 2π-periodic coefficient ρ(x) = Σ_j c_j cos(j x).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCoefficient {
    cos_coeffs: Vec<f64>,
    label: String,
    /// Certified lower bound: min of the coefficient on the validation grid.
    min_value: f64,
}

impl PeriodicCoefficient {
    /// Builds a coefficient from cosine coefficients `c_j`, j = 0..
    /// Fails unless the series is strictly positive on a 1024-point grid.
    pub fn new(cos_coeffs: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if cos_coeffs.is_empty() {
            return Err(Error::invalid(format!(
                "coefficient '{label}': empty cosine coefficient list"
            )));
        }
        if cos_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "coefficient '{label}': non-finite cosine coefficient"
            )));
        }
        let mut min_value = f64::INFINITY;
        for i in 0..POSITIVITY_GRID {
            let x = 2.0 * std::f64::consts::PI * i as f64 / POSITIVITY_GRID as f64;
            let v = eval_cos_series(&cos_coeffs, x);
            min_value = min_value.min(v);
        }
        if min_value <= 0.0 {
            return Err(Error::invalid(format!(
                "coefficient '{label}': must be strictly positive, min on grid = {min_value:.6e}"
            )));
        }
        Ok(Self { cos_coeffs, label, min_value })
    }

    /// The constant coefficient ρ ≡ c.
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![c], format!("const({c})"))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos_coeffs
    }

    /// Certified positive lower bound from the validation grid.
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    /// Highest harmonic with a nonzero cosine coefficient.
    pub fn degree(&self) -> usize {
        self.cos_coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    /// True when only the constant harmonic is present; several operators
    /// become diagonal over Fourier modes in this case.
    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_cos_series(&self.cos_coeffs, x)
    }

    /// Samples on the uniform n-point grid x_i = 2πi/n over [0, 2π).
    pub fn sample(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.eval(2.0 * std::f64::consts::PI * i as f64 / n as f64))
            .collect()
    }

    /// Exponential-basis coefficient ρ̂_k for ρ(x) = Σ_k ρ̂_k e^{ikx}:
    /// ρ̂_0 = c_0 and ρ̂_{±j} = c_j / 2.
    pub fn exp_coeff(&self, k: i64) -> f64 {
        let j = k.unsigned_abs() as usize;
        match (j, self.cos_coeffs.get(j)) {
            (0, Some(&c)) => c,
            (_, Some(&c)) => 0.5 * c,
            (_, None) => 0.0,
        }
    }
}

fn eval_cos_series(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c * (j as f64 * x).cos())
        .sum()
}
