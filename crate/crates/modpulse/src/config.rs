//! Run configuration: a single JSON document that pins the medium, the
//! carrier selection, every discretization knob, and the output layout, so a
//! run is reproducible from the file alone. Validation happens before any
//! computation and reports the offending field by name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bloch::BlochPoint;
use crate::coeff::PeriodicCoefficient;
use crate::envelope::{EnvelopeParams, PulseProfile, Taper, XGrid};
use crate::error::{Error, Result};

/// Medium coefficients as cosine series plus the cubic strength γ.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    /// Cosine coefficients of ρ: ρ(x) = c₀ + Σ c_j cos(jx).
    pub rho: Vec<f64>,
    /// Cosine coefficients of the nonlinearity weight r.
    pub r: Vec<f64>,
    pub gamma: f64,
}

/// Which carrier the run modulates and how far the analysis reaches.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    /// Band index of the carrier (0 = lowest).
    pub n0: usize,
    /// Carrier quasimomentum in (-1/2, 1/2].
    pub l0: f64,
    /// Tail order: odd harmonics up to 2N+1 are checked and eliminated.
    #[serde(rename = "N")]
    pub big_n: u32,
    /// Amplitude scale of the launched pulse.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    /// Fourier truncation: modes -K..K per 2π cell.
    #[serde(rename = "K")]
    pub k_max: usize,
    /// Spatial samples per 2π cell in the time-domain grid.
    pub x_points: usize,
    /// Number of 2π cells in the periodic simulation domain.
    pub domain_cells: usize,
    /// dt = dt_factor·dx; must stay in (0, 0.9].
    pub dt_factor: f64,
    /// Requested simulation horizon (capped at ε⁻² by the simulator).
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Points of the uniform l-grid used by the band sweep.
    #[serde(default = "default_l_points")]
    pub l_points: usize,
}

fn default_l_points() -> usize {
    101
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    /// Steps between diagnostic records.
    pub stride: usize,
    /// Any subset of {"csv", "json"}.
    pub formats: Vec<String>,
    /// Steps between field snapshots; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub medium: MediumConfig,
    pub selection: SelectionConfig,
    pub discretization: DiscretizationConfig,
    pub outputs: OutputConfig,
    /// Single seed behind every randomized probe (spot-check vectors).
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Parses and validates a JSON config file. Any parse or validation
    /// failure is a configuration error (exit code 2).
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The constant-medium reference setup used throughout the test suite.
    pub fn example() -> RunConfig {
        RunConfig {
            medium: MediumConfig {
                rho: vec![1.0],
                r: vec![1.0],
                gamma: 1.0,
            },
            selection: SelectionConfig {
                n0: 0,
                l0: 0.35,
                big_n: 2,
                epsilon: 0.1,
            },
            discretization: DiscretizationConfig {
                k_max: 16,
                x_points: 128,
                domain_cells: 48,
                dt_factor: 0.9,
                t_final: 100.0,
                l_points: 101,
            },
            outputs: OutputConfig {
                directory: "out".into(),
                stride: 20,
                formats: vec!["csv".into(), "json".into()],
                snapshot_stride: 0,
            },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: String| Err(Error::config(format!("{field}: {msg}")));
        if self.medium.rho.is_empty() {
            return fail("medium.rho", "needs at least the constant coefficient".into());
        }
        if self.medium.r.is_empty() {
            return fail("medium.r", "needs at least the constant coefficient".into());
        }
        if !self.medium.gamma.is_finite() {
            return fail("medium.gamma", format!("{} is not finite", self.medium.gamma));
        }
        // Positivity and finiteness of the series are the coefficient type's
        // own invariants; surface its message under the field name.
        if let Err(e) = PeriodicCoefficient::new(self.medium.rho.clone(), "rho") {
            return fail("medium.rho", e.to_string());
        }
        if let Err(e) = PeriodicCoefficient::new(self.medium.r.clone(), "r") {
            return fail("medium.r", e.to_string());
        }
        let k = self.discretization.k_max;
        if k < 4 {
            return fail("discretization.K", format!("{k} is below the minimum of 4"));
        }
        let deg = (self.medium.rho.len() - 1).max(self.medium.r.len() - 1);
        if deg > 2 * k {
            return fail(
                "discretization.K",
                format!("coefficient degree {deg} exceeds the alias-free bound 2K = {}", 2 * k),
            );
        }
        if self.selection.n0 > 2 * k {
            return fail(
                "selection.n0",
                format!("band {} out of range for K = {k}", self.selection.n0),
            );
        }
        let l0 = self.selection.l0;
        if !(l0 > -0.5 && l0 <= 0.5) {
            return fail("selection.l0", format!("{l0} outside the Brillouin zone (-1/2, 1/2]"));
        }
        let eps = self.selection.epsilon;
        if !(eps > 0.0 && eps <= 0.5) {
            return fail("selection.epsilon", format!("{eps} outside (0, 0.5]"));
        }
        let d = &self.discretization;
        if d.x_points < 4 {
            return fail("discretization.x_points", format!("{} is below 4", d.x_points));
        }
        if d.domain_cells < 1 {
            return fail("discretization.domain_cells", "must be at least 1".into());
        }
        if !(d.dt_factor > 0.0 && d.dt_factor <= 0.9) {
            return fail("discretization.dt_factor", format!("{} outside (0, 0.9]", d.dt_factor));
        }
        if !(d.t_final > 0.0) {
            return fail("discretization.T", format!("{} must be positive", d.t_final));
        }
        if d.l_points < 1 {
            return fail("discretization.l_points", "must be at least 1".into());
        }
        let o = &self.outputs;
        if o.directory.is_empty() {
            return fail("outputs.directory", "must not be empty".into());
        }
        if o.stride < 1 {
            return fail("outputs.stride", "must be at least 1".into());
        }
        if o.formats.is_empty() {
            return fail("outputs.formats", "needs \"csv\", \"json\", or both".into());
        }
        for f in &o.formats {
            if f != "csv" && f != "json" {
                return fail("outputs.formats", format!("unknown format {f:?}"));
            }
        }
        Ok(())
    }

    pub fn rho(&self) -> PeriodicCoefficient {
        PeriodicCoefficient::new(self.medium.rho.clone(), "rho").expect("validated")
    }

    pub fn weight(&self) -> PeriodicCoefficient {
        PeriodicCoefficient::new(self.medium.r.clone(), "r").expect("validated")
    }

    pub fn bloch_point(&self) -> Result<BlochPoint> {
        BlochPoint::compute(
            &self.rho(),
            self.selection.n0,
            self.selection.l0,
            self.discretization.k_max,
        )
    }

    pub fn envelope_params(&self, point: &BlochPoint) -> Result<EnvelopeParams> {
        EnvelopeParams::derive(point, &self.weight(), self.medium.gamma, self.selection.epsilon)
    }

    pub fn x_grid(&self) -> Result<XGrid> {
        XGrid::new(self.discretization.domain_cells, self.discretization.x_points)
    }

    /// Uniform l-grid over the Brillouin zone; a single point degenerates to
    /// the selected l₀.
    pub fn l_grid(&self) -> Vec<f64> {
        let n = self.discretization.l_points;
        if n == 1 {
            return vec![self.selection.l0];
        }
        (0..n)
            .map(|j| -0.5 + (j as f64 + 1.0) / n as f64)
            .collect()
    }

    /// Pulse profile spanning 4.5/ε on each side (sech down to ~1e-3 of its
    /// peak), which must fit the periodic domain around its center.
    pub fn pulse_profile(&self, params: &EnvelopeParams) -> Result<PulseProfile> {
        let grid = self.x_grid()?;
        let room = grid.center().min(grid.length() - grid.center());
        let l_half = 4.5 / self.selection.epsilon;
        if l_half > room {
            return Err(Error::config(format!(
                "discretization.domain_cells: pulse support {l_half:.1} exceeds the room {room:.1}; \
                 need at least {} cells",
                (2.0 * l_half / crate::fourier::TWO_PI).ceil() as usize * 2 + 2
            )));
        }
        PulseProfile::leading_order(params, l_half, 2048)
    }

    pub fn taper(&self, params: &EnvelopeParams, profile: &PulseProfile) -> Result<Taper> {
        Taper::for_profile(params, profile)
    }
}
