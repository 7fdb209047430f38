//! Embedding files: the EMB1 binary layout, its optional sidecar manifest,
//! and the JSON fixture form.
//!
//! EMB1 is little-endian: magic `EMB1`, `u16` version 1, `u32` dim, `u32`
//! count, then `count * dim` `f32` values row-major.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stylemask_core::{EmbeddingSet, FeatureVector};

use crate::error::{AppError, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 14;

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ids: Option<Vec<String>>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonFixture {
    dim: usize,
    vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ids: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

/// `<stem>.manifest.json` next to an EMB1 file.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

/// Read an EMB1 or JSON fixture file, chosen by content, not extension.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        let mut set = decode_emb1(&bytes, path)?;
        let sidecar = manifest_path(path);
        if sidecar.exists() {
            apply_manifest(&mut set, &sidecar)?;
        }
        Ok(set)
    } else if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        decode_json(&bytes, path)
    } else {
        Err(AppError::format(path, "not an embedding file: expected EMB1 magic or a JSON object"))
    }
}

/// Write EMB1, plus a manifest when ids are not the defaults or metadata is
/// present. A manifest left over from an earlier write is removed.
pub fn save_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let bytes = encode_emb1(set)?;
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))?;
    let sidecar = manifest_path(path);
    if set.has_default_ids() && set.metadata.is_empty() {
        if sidecar.exists() {
            fs::remove_file(&sidecar).map_err(|e| AppError::io(&sidecar, e))?;
        }
        return Ok(());
    }
    let manifest = Manifest {
        ids: (!set.has_default_ids()).then(|| set.ids().map(str::to_owned).collect()),
        metadata: set.metadata.clone(),
    };
    write_json(&sidecar, &manifest)
}

/// Write the JSON fixture form with values narrowed to `f32`, as in EMB1.
pub fn save_json_fixture(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let vectors = set
        .vectors()
        .map(|v| narrow(v).map(|row| row.into_iter().map(f64::from).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let fixture = JsonFixture {
        dim: set.dim(),
        vectors,
        ids: (!set.has_default_ids()).then(|| set.ids().map(str::to_owned).collect()),
        metadata: set.metadata.clone(),
    };
    write_json(path, &fixture)
}

pub fn encode_emb1(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let dim = u32::try_from(set.dim()).map_err(|_| AppError::validation("dim does not fit in 32 bits"))?;
    let count = u32::try_from(set.len()).map_err(|_| AppError::validation("row count does not fit in 32 bits"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + set.len() * set.dim() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for v in set.vectors() {
        for x in narrow(v)? {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_emb1(bytes: &[u8], path: &Path) -> Result<EmbeddingSet> {
    if !bytes.starts_with(MAGIC) {
        return Err(AppError::format(path, "bad magic, expected EMB1"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(AppError::format(path, format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len())));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(AppError::format(path, format!("unsupported EMB1 version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = count as u64 * dim as u64 * 4;
    if payload.len() as u64 != expected {
        return Err(AppError::Truncated { path: path.to_path_buf(), expected, found: payload.len() as u64 });
    }
    let mut set = EmbeddingSet::new(dim).map_err(|e| AppError::from(e).in_file(path))?;
    for (row, chunk) in payload.chunks_exact(dim * 4).enumerate() {
        let values: Vec<f32> = chunk.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        let v = FeatureVector::from_f32(&values).map_err(|e| row_error(path, row, e))?;
        set.push(stylemask_core::vector::default_id(row), v).map_err(|e| AppError::from(e).in_file(path))?;
    }
    Ok(set)
}

fn decode_json(bytes: &[u8], path: &Path) -> Result<EmbeddingSet> {
    let fixture: JsonFixture =
        serde_json::from_slice(bytes).map_err(|e| AppError::format(path, format!("invalid JSON fixture: {e}")))?;
    if let Some(ids) = &fixture.ids {
        if ids.len() != fixture.vectors.len() {
            return Err(AppError::validation(format!(
                "{}: {} ids for {} vectors",
                path.display(),
                ids.len(),
                fixture.vectors.len()
            )));
        }
    }
    let mut set = EmbeddingSet::new(fixture.dim).map_err(|e| AppError::from(e).in_file(path))?;
    for (row, values) in fixture.vectors.into_iter().enumerate() {
        let v = FeatureVector::new(values).map_err(|e| row_error(path, row, e))?;
        let id = match &fixture.ids {
            Some(ids) => ids[row].clone(),
            None => stylemask_core::vector::default_id(row),
        };
        set.push(id, v).map_err(|e| row_error(path, row, e))?;
    }
    set.metadata = fixture.metadata;
    Ok(set)
}

fn row_error(path: &Path, row: usize, e: stylemask_core::Error) -> AppError {
    match e {
        stylemask_core::Error::NonFinite { .. } => AppError::from(e.in_row(row)).in_file(path),
        other => AppError::validation(format!("{}: row {row}: {other}", path.display())),
    }
}

fn apply_manifest(set: &mut EmbeddingSet, sidecar: &Path) -> Result<()> {
    let text = fs::read(sidecar).map_err(|e| AppError::io(sidecar, e))?;
    let manifest: Manifest =
        serde_json::from_slice(&text).map_err(|e| AppError::format(sidecar, format!("invalid manifest: {e}")))?;
    if let Some(ids) = manifest.ids {
        if ids.len() != set.len() {
            return Err(AppError::validation(format!(
                "{}: {} ids for {} rows",
                sidecar.display(),
                ids.len(),
                set.len()
            )));
        }
        let mut renamed = EmbeddingSet::new(set.dim())?;
        for (id, (_, v)) in ids.into_iter().zip(set.rows()) {
            renamed.push(id, v.clone()).map_err(|e| AppError::from(e).in_file(sidecar))?;
        }
        *set = renamed;
    }
    set.metadata = manifest.metadata;
    Ok(())
}

fn narrow(v: &FeatureVector) -> Result<Vec<f32>> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let y = x as f32;
            if y.is_finite() {
                Ok(y)
            } else {
                Err(AppError::validation(format!("value {x} at index {i} overflows a 32-bit float")))
            }
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::validation(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}
