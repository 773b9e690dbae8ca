//! Binary tensor and matrix files.
//!
//! Layout: 4-byte magic, three little-endian `u64` dims, then `n1·n2·n3`
//! little-endian `f64` values (slice-major, column-major within a slice),
//! then optionally a little-endian `u64` byte length followed by that many
//! bytes of UTF-8 JSON metadata. Matrices use magic `STMM` and dims
//! `(rows, cols, 1)`.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tensor::{Dims, Tensor3};

pub const TENSOR_MAGIC: [u8; 4] = *b"STM1";
pub const MATRIX_MAGIC: [u8; 4] = *b"STMM";
const HEADER_LEN: usize = 4 + 3 * 8;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorFile {
    pub tensor: Tensor3,
    pub metadata: Option<Value>,
}

fn encode(magic: [u8; 4], dims: Dims, values: &[f64], metadata: Option<&Value>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    out.extend_from_slice(&magic);
    for d in [dims.0, dims.1, dims.2] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(meta) = metadata {
        let json = serde_json::to_vec(meta)?;
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
    }
    Ok(out)
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

fn decode(magic: [u8; 4], bytes: &[u8]) -> Result<(Dims, Vec<f64>, Option<Value>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("file too short for a header ({} bytes)", bytes.len())));
    }
    if bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(&magic)
        )));
    }
    let dims = [read_u64(bytes, 4), read_u64(bytes, 12), read_u64(bytes, 20)];
    let to_usize = |d: u64| usize::try_from(d).map_err(|_| Error::Format(format!("dimension {d} too large")));
    let dims = (to_usize(dims[0])?, to_usize(dims[1])?, to_usize(dims[2])?);
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(Error::InvalidDims(dims));
    }
    let count = dims
        .0
        .checked_mul(dims.1)
        .and_then(|v| v.checked_mul(dims.2))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    let payload_end = count
        .checked_mul(8)
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    if bytes.len() < payload_end {
        return Err(Error::Format(format!("truncated payload: {} bytes, header needs {}", bytes.len(), payload_end)));
    }
    let values: Vec<f64> =
        bytes[HEADER_LEN..payload_end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let rest = &bytes[payload_end..];
    let metadata = if rest.is_empty() {
        None
    } else {
        if rest.len() < 8 {
            return Err(Error::Format("truncated metadata length".into()));
        }
        let len = read_u64(rest, 0);
        if len != (rest.len() - 8) as u64 {
            return Err(Error::Format(format!("metadata length {} does not match the {} trailing bytes", len, rest.len() - 8)));
        }
        let text = std::str::from_utf8(&rest[8..]).map_err(|e| Error::Format(format!("metadata is not UTF-8: {e}")))?;
        Some(serde_json::from_str(text)?)
    };
    Ok((dims, values, metadata))
}

/// Writes `bytes` next to `path` and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn encode_tensor(a: &Tensor3, metadata: Option<&Value>) -> Result<Vec<u8>> {
    encode(TENSOR_MAGIC, a.dims(), a.data(), metadata)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<TensorFile> {
    let (dims, values, metadata) = decode(TENSOR_MAGIC, bytes)?;
    Ok(TensorFile { tensor: Tensor3::new(dims, values)?, metadata })
}

pub fn write_tensor(path: &Path, a: &Tensor3, metadata: Option<&Value>) -> Result<()> {
    write_atomic(path, &encode_tensor(a, metadata)?)
}

pub fn read_tensor_file(path: &Path) -> Result<TensorFile> {
    decode_tensor(&std::fs::read(path)?)
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    Ok(read_tensor_file(path)?.tensor)
}

pub fn encode_matrix(m: &Matrix) -> Result<Vec<u8>> {
    encode(MATRIX_MAGIC, (m.nrows(), m.ncols(), 1), m.as_slice(), None)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let ((rows, cols, depth), values, _) = decode(MATRIX_MAGIC, bytes)?;
    if depth != 1 {
        return Err(Error::Format(format!("matrix file has depth {depth}")));
    }
    Ok(Matrix::from_vec(rows, cols, values))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_atomic(path, &encode_matrix(m)?)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    decode_matrix(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms;
    use rand::SeedableRng;

    #[test]
    fn tensor_round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut a = Tensor3::random_normal((3, 2, 4), &mut rng);
        a.set(0, 0, 0, -0.0);
        a.set(1, 1, 1, f64::MIN_POSITIVE / 3.0);
        let meta = serde_json::json!({"source": "test", "k": 2});
        let bytes = encode_tensor(&a, Some(&meta)).unwrap();
        let back = decode_tensor(&bytes).unwrap();
        let bits = |t: &Tensor3| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.tensor), bits(&a));
        assert_eq!(back.metadata, Some(meta));
        assert_eq!(encode_tensor(&back.tensor, back.metadata.as_ref()).unwrap(), bytes);
        assert_eq!(decode_tensor(&encode_tensor(&a, None).unwrap()).unwrap().metadata, None);
    }

    #[test]
    fn layout_matches_documentation() {
        let a = Tensor3::from_fn((2, 1, 2), |i, _, k| (10 * k + i) as f64);
        let bytes = encode_tensor(&a, None).unwrap();
        assert_eq!(&bytes[..4], b"STM1");
        assert_eq!(read_u64(&bytes, 4), 2);
        assert_eq!(read_u64(&bytes, 12), 1);
        assert_eq!(read_u64(&bytes, 20), 2);
        let payload: Vec<f64> = bytes[28..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(payload, vec![0.0, 1.0, 10.0, 11.0]);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let a = Tensor3::zeros((2, 2, 2));
        let bytes = encode_tensor(&a, Some(&serde_json::json!({}))).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_tensor(&bad), Err(Error::Format(_))));
        assert!(decode_tensor(&bytes[..20]).is_err());
        assert!(decode_tensor(&bytes[..40]).is_err());
        assert!(decode_tensor(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_matrix(&bytes).is_err());
        let mut zero = bytes.clone();
        zero[4..12].copy_from_slice(&0u64.to_le_bytes());
        assert!(decode_tensor(&zero).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for m in [Matrix::identity(3, 3), transforms::dct_matrix(5)] {
            let path = dir.path().join("m.stm");
            write_matrix(&path, &m).unwrap();
            let back = read_matrix(&path).unwrap();
            assert_eq!(back, m);
        }
        let path = dir.path().join("t.stm");
        write_tensor(&path, &Tensor3::zeros((1, 2, 3)), None).unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Format(_))));
    }
}
