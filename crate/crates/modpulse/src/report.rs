//! Plot-ready artifacts: CSV tables and JSON reports with stable layout, plus
//! a manifest that lists every produced file with its SHA-256 checksum so a
//! rerun can be compared byte for byte.
//!
//! CSV uses comma separators, '.' decimals, one header row. Floats print in
//! the shortest round-trip form, so identical inputs give identical bytes.
//! JSON maps serialize with sorted keys for the same reason.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bloch::BandRow;
use crate::conditions::ConditionReport;
use crate::envelope::{EnvelopeParams, XGrid};
use crate::error::{Error, Result};
use crate::homoclinic::HomoclinicOrbit;
use crate::jordan::{JordanData, ResolventHealth};
use crate::spatial::SpectralPoint;
use crate::wave::Diagnostics;

/// Collects files under one directory and remembers their checksums for the
/// manifest. Formats gate which families are written; the manifest itself is
/// always JSON.
pub struct Reporter {
    dir: PathBuf,
    csv_on: bool,
    json_on: bool,
    written: Vec<(String, usize, String)>,
}

impl Reporter {
    pub fn create(dir: &Path, formats: &[String]) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Reporter {
            dir: dir.to_path_buf(),
            csv_on: formats.iter().any(|f| f == "csv"),
            json_on: formats.iter().any(|f| f == "json"),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        let digest = hex(&Sha256::digest(&bytes));
        std::fs::write(self.dir.join(name), &bytes)?;
        self.written.push((name.to_string(), bytes.len(), digest));
        Ok(())
    }

    /// Writes a CSV file (when the format is enabled): one header row, then
    /// the provided comma-joined rows.
    pub fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<()>
    where
        I: IntoIterator<Item = String>,
    {
        if !self.csv_on {
            return Ok(());
        }
        let mut text = String::with_capacity(4096);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        self.put(name, text.into_bytes())
    }

    /// Writes a pretty-printed JSON report (when the format is enabled).
    pub fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        if !self.json_on {
            return Ok(());
        }
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        self.put(name, bytes)
    }

    /// Writes manifest.json covering everything emitted so far plus the
    /// caller's metadata (config echo, seed, flags). Always written.
    pub fn manifest(&mut self, mut meta: serde_json::Map<String, Value>) -> Result<()> {
        let files: Vec<Value> = self
            .written
            .iter()
            .map(|(name, bytes, sha)| json!({ "name": name, "bytes": bytes, "sha256": sha }))
            .collect();
        meta.insert("files".into(), Value::Array(files));
        meta.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        let mut bytes = serde_json::to_vec_pretty(&Value::Object(meta)).expect("serializable");
        bytes.push(b'\n');
        std::fs::write(self.dir.join("manifest.json"), &bytes)?;
        Ok(())
    }
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip decimal form; empty string for a missing value.
fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const BANDS_HEADER: &str = "l,n,omega,cg,omega_pp";

pub fn band_rows(rows: &[BandRow]) -> Vec<String> {
    rows.iter()
        .map(|r| format!("{},{},{},{},{}", r.l, r.n, r.omega, opt(r.cg), opt(r.omega_pp)))
        .collect()
}

pub const CONDITIONS_HEADER: &str = "m,index,margin";

/// Margin table rows: non-resonance (index = band), zero-eigenvalue distances
/// (index = κ), then the D_m values (index = attaining κ).
pub fn condition_rows(rep: &ConditionReport) -> Vec<String> {
    let mut rows = Vec::new();
    for r in &rep.nr_margins {
        rows.push(format!("{},{},{}", r.m, r.nearest_band, r.margin));
    }
    for r in &rep.zero_ev_distances {
        rows.push(format!("{},{},{}", r.m, r.kappa, r.distance));
    }
    for r in &rep.dm {
        rows.push(format!(
            "{},{},{}",
            r.m,
            r.attained_kappa.map(|k| k.to_string()).unwrap_or_default(),
            r.value
        ));
    }
    rows
}

pub fn condition_json(rep: &ConditionReport) -> Value {
    serde_json::to_value(rep).expect("serializable report")
}

pub fn envelope_json(params: &EnvelopeParams) -> Value {
    json!({
        "n0": params.n0,
        "l0": params.l0,
        "omega0": params.omega0,
        "cg": params.cg,
        "omega_pp": params.omega_pp,
        "gamma_nl": params.gamma_nl,
        "gamma1": params.gamma1,
        "gamma2": params.gamma2,
        "gamma": params.gamma,
        "omega_tilde": params.omega_tilde,
        "epsilon": params.epsilon,
        "omega_eps": params.omega_eps(),
    })
}

pub const INITIAL_DATA_HEADER: &str = "x,u0,u1";

pub fn initial_data_rows(grid: &XGrid, u0: &[f64], u1: &[f64]) -> Vec<String> {
    (0..grid.n())
        .map(|j| format!("{},{},{}", grid.x(j), u0[j], u1[j]))
        .collect()
}

pub const SPECTRUM_HEADER: &str = "m,re_lambda,im_lambda,class";

pub fn spectrum_rows(per_m: &[(u32, Vec<SpectralPoint>)]) -> Vec<String> {
    let mut rows = Vec::new();
    for (m, points) in per_m {
        for p in points {
            rows.push(format!("{},{},{},{:?}", m, p.lambda.re, p.lambda.im, p.class));
        }
    }
    rows
}

pub fn jordan_json(jd: &JordanData, health: &ResolventHealth) -> Value {
    json!({
        "nu": [jd.nu.re, jd.nu.im],
        "chain_residuals": jd.chain_residuals,
        "duality_deviation": jd.max_duality_deviation(),
        "duality": jd.duality.iter()
            .map(|row| row.iter().map(|z| vec![z.re, z.im]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "resolvent": {
            "per_harmonic": health.per_harmonic.iter()
                .map(|(m, s)| json!({ "m": m, "sigma_min": s }))
                .collect::<Vec<_>>(),
            "c0_estimate": health.c0_estimate,
        },
    })
}

pub const ORBIT_HEADER: &str = "xi,re_q0,im_q0,re_q1,im_q1";

pub fn orbit_rows(orbit: &HomoclinicOrbit) -> Vec<String> {
    orbit
        .xi
        .iter()
        .zip(orbit.q0.iter().zip(&orbit.q1))
        .map(|(xi, (q0, q1))| format!("{},{},{},{},{}", xi, q0.re, q0.im, q1.re, q1.im))
        .collect()
}

pub fn orbit_json(orbit: &HomoclinicOrbit, half_length: f64) -> Value {
    json!({
        "epsilon": orbit.epsilon,
        "half_length": half_length,
        "newton_iters": orbit.newton_iters,
        "final_residual": orbit.final_residual,
        "reversibility_residual": orbit.reversibility_residual,
        "c1_jump": orbit.c1_jump,
        "proximity_q0": orbit.proximity_q0,
        "proximity_q1": orbit.proximity_q1,
        "decay_rate": orbit.decay_rate,
        "grid_points": orbit.xi.len(),
    })
}

pub const DIAGNOSTICS_HEADER: &str = "t,centroid,tail_amp,approx_err,cone_energy,forcing_work";

pub fn diagnostics_rows(diag: &Diagnostics) -> Vec<String> {
    (0..diag.t.len())
        .map(|i| {
            let cone = diag
                .cone_energy
                .get(i)
                .map(|e| e.to_string())
                .unwrap_or_default();
            format!(
                "{},{},{},{},{},{}",
                diag.t[i],
                diag.centroid[i],
                diag.tail_amp[i],
                diag.approx_err[i],
                cone,
                diag.forcing_work[i]
            )
        })
        .collect()
}

pub const SNAPSHOT_HEADER: &str = "x,u";

pub fn snapshot_rows(grid: &XGrid, u: &[f64]) -> Vec<String> {
    (0..grid.n()).map(|j| format!("{},{}", grid.x(j), u[j])).collect()
}

/// Complex eigenvalue list for a closed-form comparison dump.
pub fn complex_rows(values: &[Complex64]) -> Vec<String> {
    values.iter().map(|z| format!("{},{}", z.re, z.im)).collect()
}
