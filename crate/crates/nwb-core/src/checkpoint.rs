//! Checkpoint persistence: a JSON manifest describing the run plus one flat
//! little-endian f64 binary per named array.
//!
//! A checkpoint is self-contained: model configuration, codec and schedule
//! specs, training progress, optimizer moments, and every parameter array.
//! Loading validates shapes against the manifest so a corrupt or mismatched
//! directory fails loudly instead of producing a silently wrong model.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::codec::CodecSpec;
use crate::diffusion::ScheduleSpec;
use crate::error::{NwbError, Result};
use crate::net::{ModelConfig, ModelParameters};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainProgress {
    pub step: usize,
    pub epoch: usize,
}

/// Everything needed to resume training or run inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParameters,
    /// First/second optimizer moments, same shapes as the parameters.
    pub opt_m: ModelParameters,
    pub opt_v: ModelParameters,
    pub codec_spec: CodecSpec,
    pub lattice_rows: usize,
    pub lattice_cols: usize,
    pub schedule: ScheduleSpec,
    pub progress: TrainProgress,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayEntry {
    name: String,
    dtype: String,
    shape: [usize; 2],
    file: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    model: ModelConfig,
    codec: CodecManifest,
    schedule: ScheduleSpec,
    progress: TrainProgress,
    arrays: Vec<ArrayEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodecManifest {
    spec: CodecSpec,
    rows: usize,
    cols: usize,
}

fn write_array(path: &Path, arr: &Array2<f64>) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for &v in arr.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array(path: &Path, shape: [usize; 2]) -> Result<Array2<f64>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let want = shape[0] * shape[1] * 8;
    if buf.len() < want {
        return Err(NwbError::Truncated(format!(
            "{}: {} bytes, expected {want}",
            path.display(),
            buf.len()
        )));
    }
    if buf.len() > want {
        return Err(NwbError::IncompatibleCheckpoint(format!(
            "{}: {} trailing bytes",
            path.display(),
            buf.len() - want
        )));
    }
    let mut arr = Array2::zeros(( shape[0], shape[1] ));
    for (i, v) in arr.iter_mut().enumerate() {
        *v = f64::from_le_bytes(buf[i * 8..i * 8 + 8].try_into().unwrap());
    }
    Ok(arr)
}

/// All arrays of a checkpoint in serialization order: parameters first, then
/// optimizer moments under the `opt.m.` / `opt.v.` prefixes.
fn array_names(ck: &Checkpoint) -> Vec<(String, &Array2<f64>)> {
    let mut out = ck.params.named_arrays();
    for (name, arr) in ck.opt_m.named_arrays() {
        out.push((format!("opt.m.{name}"), arr));
    }
    for (name, arr) in ck.opt_v.named_arrays() {
        out.push((format!("opt.v.{name}"), arr));
    }
    out
}

/// Write a checkpoint directory (manifest.json + one .bin per array).
pub fn save_checkpoint(dir: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (i, (name, arr)) in array_names(ck).into_iter().enumerate() {
        let file = format!("a{i:04}.bin");
        write_array(&dir.join(&file), arr)?;
        entries.push(ArrayEntry {
            name,
            dtype: "f64".into(),
            shape: [arr.nrows(), arr.ncols()],
            file,
        });
    }
    let manifest = Manifest {
        format_version: CHECKPOINT_FORMAT_VERSION,
        model: ck.params.config,
        codec: CodecManifest {
            spec: ck.codec_spec,
            rows: ck.lattice_rows,
            cols: ck.lattice_cols,
        },
        schedule: ck.schedule,
        progress: ck.progress,
        arrays: entries,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Load and validate a checkpoint directory.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let manifest_text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| NwbError::IncompatibleCheckpoint(format!("manifest: {e}")))?;
    if manifest.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(NwbError::IncompatibleCheckpoint(format!(
            "format version {} (supported: {CHECKPOINT_FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let mut ck = Checkpoint {
        params: ModelParameters::zeros(manifest.model)?,
        opt_m: ModelParameters::zeros(manifest.model)?,
        opt_v: ModelParameters::zeros(manifest.model)?,
        codec_spec: manifest.codec.spec,
        lattice_rows: manifest.codec.rows,
        lattice_cols: manifest.codec.cols,
        schedule: manifest.schedule,
        progress: manifest.progress,
    };
    let mut by_name: std::collections::HashMap<String, &ArrayEntry> =
        manifest.arrays.iter().map(|e| (e.name.clone(), e)).collect();
    let mut fill = |prefix: &str, target: &mut ModelParameters| -> Result<()> {
        for (name, arr) in target.named_arrays_mut() {
            let full = format!("{prefix}{name}");
            let entry = by_name.remove(&full).ok_or_else(|| {
                NwbError::IncompatibleCheckpoint(format!("array {full} missing from manifest"))
            })?;
            if entry.dtype != "f64" {
                return Err(NwbError::IncompatibleCheckpoint(format!(
                    "array {full}: dtype {} unsupported",
                    entry.dtype
                )));
            }
            if entry.shape != [arr.nrows(), arr.ncols()] {
                return Err(NwbError::IncompatibleCheckpoint(format!(
                    "array {full}: shape {:?} does not match config {:?}",
                    entry.shape,
                    [arr.nrows(), arr.ncols()]
                )));
            }
            *arr = read_array(&dir.join(&entry.file), entry.shape)?;
        }
        Ok(())
    };
    fill("", &mut ck.params)?;
    fill("opt.m.", &mut ck.opt_m)?;
    fill("opt.v.", &mut ck.opt_v)?;
    if !by_name.is_empty() {
        let extra: Vec<_> = by_name.keys().cloned().collect();
        return Err(NwbError::IncompatibleCheckpoint(format!(
            "unexpected arrays in manifest: {}",
            extra.join(", ")
        )));
    }
    Ok(ck)
}

/// Most recent `epoch-NNNN` checkpoint directory under `dir`, if any.
pub fn latest_checkpoint(dir: impl AsRef<Path>) -> Result<Option<PathBuf>> {
    let dir = dir.as_ref();
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(num) = name.strip_prefix("epoch-") {
            if let Ok(n) = num.parse::<u64>() {
                if entry.path().join("manifest.json").exists()
                    && best.as_ref().is_none_or(|(b, _)| n > *b)
                {
                    best = Some((n, entry.path()));
                }
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}
