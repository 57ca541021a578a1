//! Byte layout for shares and responses: a 9-byte share header (scheme tag
//! u8, server id u32, evaluation-point index u32, little-endian) followed by
//! CMAT blocks.

use super::{Response, ResponseSet, SchemeTag, Share, ShareSet};
use crate::error::{Error, Result};
use crate::linalg::{cmat, ComplexMatrix, EvaluationPoints};

pub const SHARE_HEADER_LEN: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShareHeader {
    pub scheme: SchemeTag,
    pub server: u32,
    pub point_index: u32,
}

impl ShareHeader {
    pub fn write(&self, buf: &mut Vec<u8>) {
        buf.push(self.scheme as u8);
        buf.extend_from_slice(&self.server.to_le_bytes());
        buf.extend_from_slice(&self.point_index.to_le_bytes());
    }

    pub fn read(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < SHARE_HEADER_LEN {
            return Err(Error::Malformed(format!(
                "share header needs {SHARE_HEADER_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        Ok(Self {
            scheme: SchemeTag::from_byte(bytes[0])?,
            server: u32::from_le_bytes(bytes[1..5].try_into().unwrap()),
            point_index: u32::from_le_bytes(bytes[5..9].try_into().unwrap()),
        })
    }
}

/// Header plus `Ã` and `B̃`.
pub fn encode_share(header: &ShareHeader, a: &ComplexMatrix, b: &ComplexMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(
        SHARE_HEADER_LEN + cmat::encoded_len(a.rows(), a.cols()) + cmat::encoded_len(b.rows(), b.cols()),
    );
    header.write(&mut buf);
    buf.extend_from_slice(&cmat::to_bytes(a));
    buf.extend_from_slice(&cmat::to_bytes(b));
    buf
}

/// Parses a share record, returning the bytes consumed.
pub fn decode_share(bytes: &[u8]) -> Result<(ShareHeader, ComplexMatrix, ComplexMatrix, usize)> {
    let header = ShareHeader::read(bytes)?;
    let mut off = SHARE_HEADER_LEN;
    let (a, used) = cmat::from_bytes(&bytes[off..])?;
    off += used;
    let (b, used) = cmat::from_bytes(&bytes[off..])?;
    off += used;
    Ok((header, a, b, off))
}

pub fn encode_response(header: &ShareHeader, product: &ComplexMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(SHARE_HEADER_LEN + cmat::encoded_len(product.rows(), product.cols()));
    header.write(&mut buf);
    buf.extend_from_slice(&cmat::to_bytes(product));
    buf
}

pub fn decode_response(bytes: &[u8]) -> Result<(ShareHeader, ComplexMatrix, usize)> {
    let header = ShareHeader::read(bytes)?;
    let (m, used) = cmat::from_bytes(&bytes[SHARE_HEADER_LEN..])?;
    Ok((header, m, SHARE_HEADER_LEN + used))
}

fn lookup_point(points: &EvaluationPoints, header: &ShareHeader) -> Result<usize> {
    let server = header.server as usize;
    if server >= points.len() || header.point_index != EvaluationPoints::point_index(server) {
        return Err(Error::Malformed(format!(
            "server {} / point index {} outside the {}-point set",
            header.server,
            header.point_index,
            points.len()
        )));
    }
    Ok(server)
}

impl Share {
    pub fn header(&self, scheme: SchemeTag) -> ShareHeader {
        ShareHeader {
            scheme,
            server: self.server as u32,
            point_index: self.point_index,
        }
    }
}

impl ShareSet {
    /// u32 record count followed by one share record per server.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = (self.shares.len() as u32).to_le_bytes().to_vec();
        for s in &self.shares {
            buf.extend_from_slice(&encode_share(&s.header(self.scheme), &s.a, &s.b));
        }
        buf
    }

    /// Inverse of [`ShareSet::to_bytes`]; points are looked up in `points`.
    pub fn from_bytes(bytes: &[u8], points: &EvaluationPoints) -> Result<Self> {
        let (count, mut off) = read_count(bytes)?;
        let mut shares = Vec::with_capacity(count);
        let mut scheme = None;
        for _ in 0..count {
            let (h, a, b, used) = decode_share(&bytes[off..])?;
            off += used;
            check_scheme(&mut scheme, h.scheme)?;
            let server = lookup_point(points, &h)?;
            shares.push(Share {
                server,
                point_index: h.point_index,
                point: points.get(server),
                a,
                b,
            });
        }
        expect_end(bytes, off)?;
        Ok(ShareSet {
            scheme: scheme.unwrap_or(SchemeTag::MatDot),
            shares,
            noise: None,
        })
    }
}

impl ResponseSet {
    pub fn to_bytes(&self, scheme: SchemeTag) -> Vec<u8> {
        let mut buf = (self.len() as u32).to_le_bytes().to_vec();
        for r in self.responses() {
            let h = ShareHeader {
                scheme,
                server: r.server as u32,
                point_index: r.point_index,
            };
            buf.extend_from_slice(&encode_response(&h, &r.product));
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8], points: &EvaluationPoints) -> Result<(SchemeTag, Self)> {
        let (count, mut off) = read_count(bytes)?;
        let mut out = ResponseSet::new();
        let mut scheme = None;
        for _ in 0..count {
            let (h, product, used) = decode_response(&bytes[off..])?;
            off += used;
            check_scheme(&mut scheme, h.scheme)?;
            let server = lookup_point(points, &h)?;
            out.push(Response {
                server,
                point_index: h.point_index,
                point: points.get(server),
                product,
            });
        }
        expect_end(bytes, off)?;
        Ok((scheme.unwrap_or(SchemeTag::MatDot), out))
    }
}

fn read_count(bytes: &[u8]) -> Result<(usize, usize)> {
    if bytes.len() < 4 {
        return Err(Error::Malformed("missing record count".into()));
    }
    Ok((u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize, 4))
}

fn check_scheme(seen: &mut Option<SchemeTag>, tag: SchemeTag) -> Result<()> {
    match seen {
        Some(prev) if *prev != tag => Err(Error::Malformed("mixed scheme tags in one set".into())),
        _ => {
            *seen = Some(tag);
            Ok(())
        }
    }
}

fn expect_end(bytes: &[u8], off: usize) -> Result<()> {
    if off != bytes.len() {
        return Err(Error::Malformed(format!("{} trailing bytes", bytes.len() - off)));
    }
    Ok(())
}
