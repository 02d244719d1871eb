//! Parameter checkpoints: a little-endian `u64` dimension followed by that
//! many little-endian `f64` values.

use std::fs;
use std::path::Path;

use eeo_core::objective::ParamVector;

use crate::HarnessError;

pub fn save(params: &ParamVector, path: &Path) -> Result<(), HarnessError> {
    let mut bytes = Vec::with_capacity(8 + 8 * params.dim());
    bytes.extend_from_slice(&(params.dim() as u64).to_le_bytes());
    for x in params.as_slice() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a checkpoint, checking its dimension against `expected_dim` when given.
pub fn load(path: &Path, expected_dim: Option<usize>) -> Result<ParamVector, HarnessError> {
    let bytes = fs::read(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let corrupt = |msg: String| HarnessError::Checkpoint(format!("{}: {msg}", path.display()));
    let Some((head, body)) = bytes.split_first_chunk::<8>() else {
        return Err(corrupt(format!("file has {} bytes, too short for a header", bytes.len())));
    };
    let dim = u64::from_le_bytes(*head);
    if body.len() as u64 != dim.saturating_mul(8) {
        return Err(corrupt(format!("header says {dim} values but {} bytes follow", body.len())));
    }
    let dim = dim as usize;
    if let Some(want) = expected_dim {
        if want != dim {
            return Err(HarnessError::Checkpoint(format!(
                "{}: dimension mismatch: checkpoint has {dim} values, expected {want}",
                path.display()
            )));
        }
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ParamVector::new(values).map_err(|e| corrupt(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use eeo_core::rng::{standard_normals, stream_rng, Stream};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let mut rng = stream_rng(1, Stream::Init, 0);
        let mut v = standard_normals(&mut rng, 1000);
        v[3] = -0.0;
        v[4] = f64::MIN_POSITIVE / 3.0;
        let w = ParamVector::new(v).unwrap();
        save(&w, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 8 + 8000);
        let back = load(&path, Some(1000)).unwrap();
        let bits = |p: &ParamVector| p.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&w));
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save(&ParamVector::zeros(3), &path).unwrap();
        let msg = load(&path, Some(4)).unwrap_err().to_string();
        assert!(msg.contains("dimension mismatch"), "{msg}");

        fs::write(&path, b"").unwrap();
        assert!(load(&path, None).unwrap_err().to_string().contains("too short"));

        let mut bytes = 2u64.to_le_bytes().to_vec();
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(load(&path, None).is_err());

        bytes.extend_from_slice(&f64::NAN.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(load(&path, None).unwrap_err().to_string().contains("non-finite"));
    }
}
