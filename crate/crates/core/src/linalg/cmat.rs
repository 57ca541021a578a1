//! CMAT container: `b"CMAT"`, version byte, rows and cols as little-endian
//! u64, then row-major `(re, im)` little-endian f64 pairs.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CMAT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 4 + 1 + 8 + 8;

/// Serialized size of a matrix with the given shape.
pub fn encoded_len(rows: usize, cols: usize) -> usize {
    HEADER_LEN + rows * cols * 16
}

pub fn write_cmat<W: Write>(w: &mut W, m: &ComplexMatrix) -> std::io::Result<()> {
    w.write_all(&to_bytes(m))
}

pub fn to_bytes(m: &ComplexMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(encoded_len(m.rows(), m.cols()));
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for z in m.as_slice() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    buf
}

/// Parses one CMAT block from the front of `bytes`, returning the matrix and
/// the number of bytes consumed.
pub fn from_bytes(bytes: &[u8]) -> Result<(ComplexMatrix, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Malformed(format!(
            "CMAT header needs {HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Malformed("bad CMAT magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Malformed(format!("unsupported CMAT version {}", bytes[4])));
    }
    let rows = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let count = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::Malformed(format!("CMAT shape {rows}x{cols} overflows")))?;
    let total = HEADER_LEN + count;
    if bytes.len() < total {
        return Err(Error::Malformed(format!(
            "CMAT body truncated: need {total} bytes, got {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..total]
        .chunks_exact(16)
        .map(|ch| {
            Complex64::new(
                f64::from_le_bytes(ch[..8].try_into().unwrap()),
                f64::from_le_bytes(ch[8..].try_into().unwrap()),
            )
        })
        .collect();
    let m = ComplexMatrix::new(rows as usize, cols as usize, data)
        .map_err(|e| Error::Malformed(format!("CMAT payload: {e}")))?;
    Ok((m, total))
}

pub fn read_cmat<R: Read>(r: &mut R) -> Result<ComplexMatrix> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let (m, used) = from_bytes(&buf)?;
    if used != buf.len() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after CMAT block",
            buf.len() - used
        )));
    }
    Ok(m)
}

pub fn load(path: impl AsRef<Path>) -> Result<ComplexMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    read_cmat(&mut bytes.as_slice())
}

pub fn save(path: impl AsRef<Path>, m: &ComplexMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(m)).map_err(|e| Error::file(path, e))
}
