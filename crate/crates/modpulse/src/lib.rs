//! Numerical laboratory for traveling modulating pulse solutions of the
//! semilinear wave equation ∂_t²u = ∂_x²u − ρ(x)u + γ r(x)u³ with smooth,
//! even, strictly positive 2π-periodic coefficients ρ and r.
//!
//! The crate follows one construction end to end:
//!
//! 1. [`bloch`] solves the periodic band problem and supplies the carrier
//!    wave: frequency ω₀, group velocity c_g, curvature ω'' and the Bloch
//!    eigenfunction with its l-derivative.
//! 2. [`envelope`] extracts the cubic NLS envelope parameters and the sech
//!    soliton that modulates the carrier.
//! 3. [`conditions`] checks the non-degeneracy and non-resonance hypotheses
//!    behind the construction, with explicit numerical margins.
//! 4. [`spatial`] builds the first-order spatial-dynamics operators in the
//!    comoving frame and computes their spectra.
//! 5. [`jordan`] resolves the length-2 Jordan chain at the origin of the
//!    m = ±1 operator together with the adjoint chain and spectral projector.
//! 6. [`normal_form`] performs the elimination steps that reduce the coupled
//!    mode system to a perturbed two-dimensional reversible system.
//! 7. [`homoclinic`] solves the reduced system's homoclinic orbit by
//!    collocation and Newton iteration.
//! 8. [`wave`] runs the full wave equation from the constructed initial data
//!    and measures how well the modulating pulse survives, including
//!    light-cone energy accounting.
//!
//! Everything is a pure function of its inputs; the binary in `src/main.rs`
//! and the runnable examples are thin wrappers over this library.

pub mod banded;
pub mod bloch;
pub mod coeff;
pub mod conditions;
pub mod config;
pub mod envelope;
pub mod error;
pub mod fourier;
pub mod homoclinic;
pub mod jordan;
pub mod normal_form;
pub mod report;
pub mod spatial;
pub mod wave;

pub use coeff::PeriodicCoefficient;
pub use error::{Error, Result};
