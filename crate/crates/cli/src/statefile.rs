//! `{"dims": [..], "matrix": [[[re, im], ..], ..]}` state files.

use std::path::Path;

use qmarginal::matcore::{ComplexMatrix, FactorShape};
use qmarginal::states::DensityMatrix;
use qmarginal::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::canon::{num, to_canonical_string};
use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    dims: Vec<usize>,
    matrix: Vec<Vec<[f64; 2]>>,
}

/// A square complex matrix with its factor dimensions, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFile {
    pub dims: Vec<usize>,
    pub matrix: ComplexMatrix,
}

impl StateFile {
    pub fn from_density(rho: &DensityMatrix) -> Self {
        Self {
            dims: rho.shape().dims().to_vec(),
            matrix: rho.matrix().clone(),
        }
    }

    /// Checks structure only: dims product matches a square matrix.
    pub fn from_value(v: Value) -> Result<Self, String> {
        let raw: RawState = serde_json::from_value(v).map_err(|e| e.to_string())?;
        Self::from_raw(raw)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let raw: RawState = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawState) -> Result<Self, String> {
        if raw.dims.is_empty() || raw.dims.contains(&0) {
            return Err(format!("dims must be a non-empty list of positive integers, got {:?}", raw.dims));
        }
        let n = raw
            .dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or("dims product overflows")?;
        if raw.matrix.len() != n {
            return Err(format!("dims {:?} need {n} rows, found {}", raw.dims, raw.matrix.len()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in raw.matrix.iter().enumerate() {
            if row.len() != n {
                return Err(format!("row {i} has {} entries, expected {n}", row.len()));
            }
            data.extend(row.iter().map(|[re, im]| Complex64::new(*re, *im)));
        }
        let matrix = ComplexMatrix::new(n, n, data).map_err(|e| e.to_string())?;
        Ok(Self { dims: raw.dims, matrix })
    }

    pub fn to_value(&self) -> Value {
        let n = self.matrix.rows();
        let rows: Vec<Value> = self
            .matrix
            .data()
            .chunks(n)
            .map(|row| Value::Array(row.iter().map(|z| json!([num(z.re), num(z.im)])).collect()))
            .collect();
        json!({ "dims": self.dims, "matrix": rows })
    }

    pub fn to_canonical(&self) -> String {
        to_canonical_string(&self.to_value())
    }

    /// Validates as a density matrix at tolerance `tol`.
    pub fn density(&self, tol: f64) -> qmarginal::Result<DensityMatrix> {
        let shape = FactorShape::new(self.dims.clone())?;
        DensityMatrix::with_tolerance(self.matrix.clone(), shape, tol)
    }
}

/// Path and SHA-256 of a file the command consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &str, bytes: &[u8]) -> Self {
        Self {
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json(path: &Path) -> CliResult<(Value, InputDigest)> {
    let bytes = read_bytes(path)?;
    let digest = InputDigest::of(&path.display().to_string(), &bytes);
    let value = serde_json::from_slice(&bytes).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((value, digest))
}

/// Parses a state file from a JSON value and validates it as a density
/// matrix; errors name `label`.
pub fn state_from_value(label: &str, v: Value, tol: f64) -> CliResult<DensityMatrix> {
    let file = StateFile::from_value(v).map_err(|message| CliError::Parse {
        path: label.into(),
        message,
    })?;
    file.density(tol)
        .map_err(|e| CliError::invalid(label, format!("not a density matrix: {e}")))
}

/// Reads, parses and validates a state file.
pub fn read_state(path: &Path, tol: f64) -> CliResult<(DensityMatrix, InputDigest)> {
    let (value, digest) = read_json(path)?;
    let rho = state_from_value(&path.display().to_string(), value, tol)?;
    Ok((rho, digest))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_state(path: &Path, rho: &DensityMatrix) -> CliResult<()> {
    write_text(path, &StateFile::from_density(rho).to_canonical())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let m = ComplexMatrix::new(
            2,
            2,
            vec![
                Complex64::new(0.7, 0.0),
                Complex64::new(0.1, -0.2),
                Complex64::new(0.1, 0.2),
                Complex64::new(0.3, 0.0),
            ],
        )
        .unwrap();
        let f = StateFile { dims: vec![2], matrix: m };
        let text = f.to_canonical();
        let back = StateFile::parse(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_canonical(), text);
        assert!(text.ends_with("}\n") && !text.contains('\r'));
    }

    #[test]
    fn structural_errors_are_reported() {
        assert!(StateFile::parse(r#"{"dims":[2],"matrix":[[[1,0]]]}"#).unwrap_err().contains("rows"));
        assert!(StateFile::parse(r#"{"dims":[1],"matrix":[[[1,0],[0,0]]]}"#).unwrap_err().contains("row 0"));
        assert!(StateFile::parse(r#"{"dims":[0],"matrix":[]}"#).is_err());
        assert!(StateFile::parse(r#"{"dims":[1],"matrix":[[[1,0]]],"x":1}"#).is_err());
    }

    #[test]
    fn density_validation_uses_tolerance() {
        let f = StateFile::parse(r#"{"dims":[1],"matrix":[[[1.0000001,0]]]}"#).unwrap();
        assert!(f.density(1e-10).is_err());
        assert!(f.density(1e-6).is_ok());
    }
}
