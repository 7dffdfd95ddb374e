//! Little-endian binary64 tensor files paired with JSON manifests.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn write_f64s<S: Scalar>(path: &Path, values: impl IntoIterator<Item = S>) -> Result<()> {
    let bytes: Vec<u8> = values
        .into_iter()
        .flat_map(|v| v.as_f64().to_le_bytes())
        .collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_f64s<S: Scalar>(path: &Path) -> Result<Vec<S>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "{}: length {} is not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| S::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Splits a flat tensor stream into consecutive pieces of the given sizes.
pub(crate) fn split_sizes<S: Clone>(flat: &[S], sizes: &[usize]) -> Result<Vec<Vec<S>>> {
    let total: usize = sizes.iter().sum();
    if total != flat.len() {
        return Err(Error::Format(format!(
            "tensor file holds {} values, manifest expects {total}",
            flat.len()
        )));
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for &n in sizes {
        out.push(flat[at..at + n].to_vec());
        at += n;
    }
    Ok(out)
}
