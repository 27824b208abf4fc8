//! Run artifacts: field checkpoints (flat little-endian f64 pairs plus a JSON
//! sidecar), training-record CSV streams, sweep tables, and run manifests.

use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::TrainRecord;
use crate::field::{CanonicalField, Region};
use crate::oracle::SweepRow;
use crate::{HebError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
/// sidecars are small JSON documents; binaries are capped too
const MAX_SIDECAR_BYTES: usize = 1 << 20;
const MAX_FIELD_MODES: usize = 1 << 24;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    modes: usize,
    byte_order: String,
    regions: Vec<Region>,
}

/// Serialize a field to (binary, sidecar) byte buffers.
pub fn field_to_bytes(field: &CanonicalField) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut bin = Vec::with_capacity(field.len() * 16);
    for v in field.values() {
        bin.write_f64::<LittleEndian>(v.re)?;
        bin.write_f64::<LittleEndian>(v.im)?;
    }
    let sidecar = Sidecar {
        version: CHECKPOINT_VERSION,
        modes: field.len(),
        byte_order: "le".into(),
        regions: field.regions().to_vec(),
    };
    Ok((bin, serde_json::to_vec_pretty(&sidecar)?))
}

/// Rebuild a field from checkpoint bytes; all declared sizes are validated
/// against the binary payload.
pub fn field_from_bytes(sidecar: &[u8], bin: &[u8]) -> Result<CanonicalField> {
    if sidecar.len() > MAX_SIDECAR_BYTES {
        return Err(HebError::Data("sidecar too large".into()));
    }
    let sc: Sidecar = serde_json::from_slice(sidecar)?;
    if sc.version != CHECKPOINT_VERSION {
        return Err(HebError::Data(format!("unsupported checkpoint version {}", sc.version)));
    }
    if sc.byte_order != "le" {
        return Err(HebError::Data("unsupported byte order".into()));
    }
    if sc.modes > MAX_FIELD_MODES {
        return Err(HebError::Data("mode count exceeds cap".into()));
    }
    if bin.len() != sc.modes * 16 {
        return Err(HebError::ShapeMismatch { expected: sc.modes * 16, got: bin.len() });
    }
    let mut field = CanonicalField::new(sc.regions)?;
    if field.len() != sc.modes {
        return Err(HebError::ShapeMismatch { expected: sc.modes, got: field.len() });
    }
    let mut rd = bin;
    for v in field.values_mut() {
        let re = rd.read_f64::<LittleEndian>()?;
        let im = rd.read_f64::<LittleEndian>()?;
        *v = C64::new(re, im);
    }
    Ok(field)
}

pub fn save_checkpoint(dir: &Path, name: &str, field: &CanonicalField) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (bin, sidecar) = field_to_bytes(field)?;
    std::fs::write(dir.join(format!("{name}.f64")), bin)?;
    std::fs::write(dir.join(format!("{name}.json")), sidecar)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path, name: &str) -> Result<CanonicalField> {
    let bin = std::fs::read(dir.join(format!("{name}.f64")))?;
    let sidecar = std::fs::read(dir.join(format!("{name}.json")))?;
    field_from_bytes(&sidecar, &bin)
}

/// One row per training step. Wall time is deliberately not a column: record
/// files must be byte-identical across runs with the same config and seed.
pub fn write_records_csv(path: &Path, records: &[TrainRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "step",
        "sample_id",
        "cost_before",
        "cost_after",
        "delta_theta_norm",
        "echo_residual",
        "norm_drift",
        "energy_drift",
    ])
    .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            r.sample_id.to_string(),
            r.cost_before.to_string(),
            r.cost_after.to_string(),
            r.delta_theta_norm.to_string(),
            r.echo_residual.to_string(),
            r.norm_drift.to_string(),
            r.energy_drift.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["epsilon", "sigma_noise", "rel_error", "rms_error", "n_reps", "seed"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.sigma_noise.to_string(),
            r.rel_error.to_string(),
            r.rms_error.to_string(),
            r.n_reps.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> HebError {
    HebError::Data(format!("csv: {e}"))
}

#[derive(Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub final_metrics: serde_json::Value,
    pub wall_s: f64,
}

pub fn config_sha256(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(&bytes);
    format!("{:x}", h.finalize())
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(manifest)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}
