//! Directory container for model checkpoints and exported mappings.
//!
//! ```text
//! <dir>/manifest.txt        key=value lines
//! <dir>/<tensor name>.bin   raw little-endian f32, row-major
//! ```
//!
//! Each tensor is listed in the manifest as `tensor.<name>=<d0>x<d1>...`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::LinearMap;
use crate::nets::{Parameters, TensorRef};

pub const FORMAT_VERSION: &str = "1";
pub const MANIFEST: &str = "manifest.txt";

/// Values of the manifest `kind` key.
pub const KIND_CHECKPOINT: &str = "checkpoint";
pub const KIND_MAPPING: &str = "mapping";
pub const KIND_PROJECTION: &str = "projection";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    pub manifest: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, StoredTensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl StoredTensor {
    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Self {
        StoredTensor {
            shape,
            data: data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_owned()
    } else {
        format!("{prefix}.{name}")
    }
}

impl Archive {
    pub fn new() -> Self {
        let mut a = Archive::default();
        a.manifest.insert("format_version".into(), FORMAT_VERSION.into());
        a
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.manifest.insert(key.to_owned(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.manifest
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("manifest is missing `{key}`")))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::Checkpoint(format!("manifest value `{key}={raw}` does not parse")))
    }

    pub fn insert_tensor(&mut self, name: &str, shape: Vec<usize>, data: &[f64]) {
        self.tensors.insert(name.to_owned(), StoredTensor::from_f64(shape, data));
    }

    /// Adds every tensor of `params`, names prefixed with `prefix.` unless
    /// `prefix` is empty.
    pub fn insert_params<P: Parameters>(&mut self, prefix: &str, params: &P) {
        for TensorRef { name, shape, data } in params.tensors() {
            self.insert_tensor(&join(prefix, &name), shape, data);
        }
    }

    /// Stores `map` as `<prefix>.matrix` (out×in) and `<prefix>.offset`.
    pub fn insert_map(&mut self, prefix: &str, map: &LinearMap) {
        let (rows, cols) = map.matrix.dim();
        let matrix = map.matrix.as_standard_layout();
        self.insert_tensor(&join(prefix, "matrix"), vec![rows, cols], matrix.as_slice().expect("standard layout"));
        self.insert_tensor(&join(prefix, "offset"), vec![rows], map.offset.as_slice().expect("contiguous"));
    }

    pub fn map(&self, prefix: &str) -> Result<LinearMap> {
        let name = join(prefix, "matrix");
        let m = self.tensor(&name)?;
        let &[rows, cols] = m.shape.as_slice() else {
            return Err(Error::Checkpoint(format!("`{name}` is not a matrix")));
        };
        let matrix = Array2::from_shape_vec((rows, cols), m.to_f64()).expect("shape checked on read");
        let name = join(prefix, "offset");
        let offset = Array1::from(self.tensor(&name)?.to_f64());
        if offset.len() != rows {
            return Err(Error::Checkpoint(format!("`{name}` has {} values, expected {rows}", offset.len())));
        }
        Ok(LinearMap { matrix, offset })
    }

    pub fn tensor(&self, name: &str) -> Result<&StoredTensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    /// Overwrites every tensor of `params` from the archive. Shapes must
    /// already agree.
    pub fn load_params<P: Parameters>(&self, prefix: &str, params: &mut P) -> Result<()> {
        for (name, dst) in params.tensors_mut() {
            let full = join(prefix, &name);
            let src = self.tensor(&full)?;
            if src.data.len() != dst.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{full}` has {} values, expected {}",
                    src.data.len(),
                    dst.len()
                )));
            }
            for (d, s) in dst.iter_mut().zip(&src.data) {
                *d = *s as f64;
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = self.manifest.clone();
        for (name, t) in &self.tensors {
            let shape: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            manifest.insert(format!("tensor.{name}"), shape.join("x"));
            let mut bytes = Vec::with_capacity(t.data.len() * 4);
            for v in &t.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            let path = dir.join(format!("{name}.bin"));
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        let text: String = manifest.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let path = dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut archive = Archive::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.clone(),
                line: i + 1,
                reason: "expected key=value".into(),
            })?;
            match k.strip_prefix("tensor.") {
                Some(name) => {
                    let shape = v
                        .split('x')
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::Checkpoint(format!("bad shape `{v}` for `{name}`")))?;
                    let bin = dir.join(format!("{name}.bin"));
                    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
                    let expected: usize = shape.iter().product();
                    if bytes.len() != expected * 4 {
                        return Err(Error::Checkpoint(format!(
                            "`{name}.bin` holds {} bytes, shape {v} needs {}",
                            bytes.len(),
                            expected * 4
                        )));
                    }
                    let data = bytes
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect();
                    archive.tensors.insert(name.to_owned(), StoredTensor { shape, data });
                }
                None => {
                    archive.manifest.insert(k.to_owned(), v.to_owned());
                }
            }
        }
        if archive.manifest.get("format_version").map(String::as_str) != Some(FORMAT_VERSION) {
            return Err(Error::Checkpoint("unsupported or missing format_version".into()));
        }
        Ok(archive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::Dense;
    use ndarray::array;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let layer = Dense::new(array![[0.1, -2.5e-8], [3.0, f64::from(f32::MAX)]], array![1.0 / 3.0, -0.0]);
        let mut a = Archive::new();
        a.set("seed", 42);
        a.insert_params("d_s.layer0", &layer);
        a.write(dir.path()).unwrap();

        let b = Archive::read(dir.path()).unwrap();
        assert_eq!(a, b);
        let first = std::fs::read(dir.path().join("d_s.layer0.weight.bin")).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        b.write(dir2.path()).unwrap();
        assert_eq!(first, std::fs::read(dir2.path().join("d_s.layer0.weight.bin")).unwrap());

        let mut loaded = Dense::zeros(2, 2);
        b.load_params("d_s.layer0", &mut loaded).unwrap();
        assert_eq!(loaded.bias[0], (1.0f64 / 3.0) as f32 as f64);
        assert_eq!(b.get_parsed::<u64>("seed").unwrap(), 42);
    }

    #[test]
    fn map_round_trip() {
        let map = LinearMap {
            matrix: array![[1.0, 2.0, 3.0], [-4.0, 0.5, 0.25]],
            offset: array![0.125, -1.0],
        };
        let mut a = Archive::new();
        a.insert_map("st", &map);
        assert_eq!(a.tensor("st.matrix").unwrap().shape, vec![2, 3]);
        assert_eq!(a.map("st").unwrap(), map);
        assert!(a.map("ts").is_err());
    }

    #[test]
    fn missing_tensor_is_reported() {
        let a = Archive::new();
        let mut d = Dense::zeros(1, 1);
        assert!(matches!(a.load_params("x", &mut d), Err(Error::Checkpoint(_))));
    }
}
