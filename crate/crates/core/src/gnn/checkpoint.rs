//! Binary tensor checkpoints.
//!
//! Layout, all little-endian: `u32` tensor count, then one `(u32 rows,
//! u32 cols)` header per tensor, then every tensor's entries as row-major
//! `f64` in header order.

use std::fs;
use std::path::Path;

use crate::error::{data_err, Error, Result};
use crate::numerics::DenseMatrix;

pub fn encode_tensors(tensors: &[&DenseMatrix]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend((tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend((t.rows() as u32).to_le_bytes());
        out.extend((t.cols() as u32).to_le_bytes());
    }
    for t in tensors {
        for v in t.as_slice() {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<DenseMatrix>> {
    let mut pos = 0;
    let take_u32 = |pos: &mut usize| -> Result<usize> {
        let chunk = bytes
            .get(*pos..*pos + 4)
            .ok_or_else(|| data_err!("checkpoint truncated in header"))?;
        *pos += 4;
        Ok(u32::from_le_bytes(chunk.try_into().unwrap()) as usize)
    };
    let count = take_u32(&mut pos)?;
    let mut shapes = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let r = take_u32(&mut pos)?;
        let c = take_u32(&mut pos)?;
        shapes.push((r, c));
    }
    let body: usize = shapes.iter().map(|(r, c)| r * c * 8).sum();
    if bytes.len() - pos != body {
        return Err(data_err!(
            "checkpoint body has {} bytes, headers declare {body}",
            bytes.len() - pos
        ));
    }
    let mut tensors = Vec::with_capacity(count);
    for (r, c) in shapes {
        let data = bytes[pos..pos + r * c * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        pos += r * c * 8;
        tensors.push(DenseMatrix::from_vec(r, c, data)?);
    }
    Ok(tensors)
}

pub fn write_tensors(path: impl AsRef<Path>, tensors: &[&DenseMatrix]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensors(tensors)).map_err(|e| Error::io(path, e))
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<DenseMatrix>> {
    let path = path.as_ref();
    decode_tensors(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -2.5], vec![0.0, 3.25]]).unwrap();
        let b = DenseMatrix::zeros(0, 4);
        let c = DenseMatrix::filled(3, 1, 0.1);
        let bytes = encode_tensors(&[&a, &b, &c]);
        assert_eq!(bytes.len(), 4 + 3 * 8 + (4 + 3) * 8);
        assert_eq!(decode_tensors(&bytes).unwrap(), vec![a, b, c]);
    }

    #[test]
    fn truncated_is_error() {
        let a = DenseMatrix::filled(2, 2, 1.0);
        let bytes = encode_tensors(&[&a]);
        assert!(decode_tensors(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_tensors(&bytes[..6]).is_err());
    }
}
