//! `SVPR1` binary descriptor files and their JSON manifests.
//!
//! Layout (little-endian): the 5 ASCII bytes `SVPR1`, `u32` row count `N`,
//! `u32` column count `D`, then `N * D` `f32` values in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Descriptor, DescriptorSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"SVPR1";
pub const HEADER_LEN: usize = MAGIC.len() + 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub technique_name: String,
    pub encode_time_per_frame_sec: f64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let t = manifest.encode_time_per_frame_sec;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                message: format!("encode_time_per_frame_sec must be finite and >= 0, got {t}"),
            });
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Serialises a row-major `rows x cols` matrix.
pub fn encode_matrix(rows: usize, cols: usize, values: impl IntoIterator<Item = f32>) -> Result<Vec<u8>> {
    let header = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{what} {n} does not fit in u32")))
    };
    let (n, d) = (header(rows, "row count")?, header(cols, "column count")?);
    let mut buf = Vec::with_capacity(HEADER_LEN + rows * cols * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&d.to_le_bytes());
    let mut written = 0usize;
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
        written += 1;
    }
    if written != rows * cols {
        return Err(Error::InvalidArgument(format!(
            "expected {} values for {rows}x{cols}, got {written}",
            rows * cols
        )));
    }
    Ok(buf)
}

/// Parses an `SVPR1` buffer into `(rows, cols, values)`.
pub fn decode_matrix(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f32>), String> {
    if bytes.len() < HEADER_LEN || &bytes[..MAGIC.len()] != MAGIC {
        return Err("magic mismatch (expected SVPR1)".into());
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let rows = word(5);
    let cols = word(9);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(format!(
            "size mismatch: header promises {rows}x{cols} values, file has {} payload bytes",
            bytes.len() - HEADER_LEN
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, cols, values))
}

pub fn write_matrix(path: &Path, rows: usize, cols: usize, values: impl IntoIterator<Item = f32>) -> Result<()> {
    let buf = encode_matrix(rows, cols, values)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes).map_err(|message| Error::DescriptorFormat {
        path: path.to_path_buf(),
        message,
    })
}

pub fn export_descriptors(set: &DescriptorSet, data_path: &Path) -> Result<()> {
    write_matrix(
        data_path,
        set.len(),
        set.dim(),
        set.descriptors().iter().flat_map(|d| d.values().iter().copied()),
    )
}

/// Loads externally computed descriptors, taking the technique name and
/// per-frame encoding time from the manifest.
pub fn import_descriptors(data_path: &Path, manifest_path: &Path) -> Result<DescriptorSet> {
    let manifest = Manifest::load(manifest_path)?;
    let (rows, cols, values) = read_matrix(data_path)?;
    let format_err = |message: String| Error::DescriptorFormat {
        path: data_path.to_path_buf(),
        message,
    };
    if rows == 0 || cols == 0 {
        return Err(format_err(format!("empty descriptor matrix ({rows}x{cols})")));
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(format_err(format!(
            "non-finite value at row {}, column {}",
            pos / cols,
            pos % cols
        )));
    }
    let descriptors = values
        .chunks_exact(cols)
        .map(|row| Descriptor::new(row.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    DescriptorSet::new(manifest.technique_name, descriptors, manifest.encode_time_per_frame_sec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_manifest(dir: &Path, name: &str, t: f64) -> std::path::PathBuf {
        let path = dir.join("manifest.json");
        fs::write(
            &path,
            format!(r#"{{"technique_name": "{name}", "encode_time_per_frame_sec": {t}}}"#),
        )
        .unwrap();
        path
    }

    #[test]
    fn header_layout_is_little_endian() {
        let buf = encode_matrix(2, 3, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(&buf[..5], b"SVPR1");
        assert_eq!(&buf[5..9], &[2, 0, 0, 0]);
        assert_eq!(&buf[9..13], &[3, 0, 0, 0]);
        assert_eq!(&buf[13..17], &1.0f32.to_le_bytes());
        assert_eq!(buf.len(), 13 + 6 * 4);
    }

    #[test]
    fn imports_unit_descriptors() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.svpr");
        write_matrix(&data, 2, 3, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let manifest = write_manifest(dir.path(), "NetVLAD", 0.77);
        let set = import_descriptors(&data, &manifest).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.dim(), 3);
        assert!(set.descriptors().iter().all(|d| d.l2_norm() == 1.0));
        assert_eq!(set.technique_name(), "NetVLAD");
        assert_eq!(set.encode_time_per_frame(), 0.77);
    }

    #[test]
    fn truncated_payload_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.svpr");
        let mut buf = encode_matrix(2, 3, [0.0; 6]).unwrap();
        buf.truncate(buf.len() - 3);
        fs::write(&data, buf).unwrap();
        let manifest = write_manifest(dir.path(), "x", 0.1);
        let err = import_descriptors(&data, &manifest).unwrap_err();
        assert!(err.to_string().contains("size mismatch"), "{err}");
    }

    #[test]
    fn bad_magic_and_values() {
        assert!(decode_matrix(b"SVPR2\0\0\0\0\0\0\0\0").unwrap_err().contains("magic"));
        assert!(decode_matrix(b"SVP").unwrap_err().contains("magic"));

        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.svpr");
        write_matrix(&data, 1, 2, [1.0, f32::NAN]).unwrap();
        let manifest = write_manifest(dir.path(), "x", 0.1);
        let err = import_descriptors(&data, &manifest).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn negative_manifest_time_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.svpr");
        write_matrix(&data, 1, 1, [1.0]).unwrap();
        let manifest = write_manifest(dir.path(), "x", -0.5);
        let err = import_descriptors(&data, &manifest).unwrap_err();
        assert!(err.to_string().contains("encode_time_per_frame_sec"), "{err}");
    }

    proptest! {
        #[test]
        fn export_import_is_bit_exact(
            rows in 1usize..6,
            cols in 1usize..9,
            seed in proptest::collection::vec(-1e30f32..1e30, 54),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let descriptors = (0..rows)
                .map(|r| Descriptor::new(seed[r * cols..(r + 1) * cols].to_vec()).unwrap())
                .collect();
            let set = DescriptorSet::new("t", descriptors, 0.25).unwrap();
            let data = dir.path().join("d.svpr");
            export_descriptors(&set, &data).unwrap();
            let manifest = write_manifest(dir.path(), "t", 0.25);
            let back = import_descriptors(&data, &manifest).unwrap();
            let bits = |s: &DescriptorSet| s.descriptors().iter()
                .flat_map(|d| d.values().iter().map(|v| v.to_bits())).collect::<Vec<_>>();
            prop_assert_eq!(bits(&set), bits(&back));
        }
    }
}
