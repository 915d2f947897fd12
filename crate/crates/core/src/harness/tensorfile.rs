//! `MTNS` binary tensor container.
//!
//! Layout: magic `MTNS`, version byte `1`, dtype byte (`1` f32, `2` u8), ndim
//! byte, `ndim` little-endian u32 extents, then the row-major little-endian
//! payload.

use std::fs;
use std::path::Path;

use crate::nn::Tensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MTNS";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<u32>,
    pub data: TensorData,
}

impl TensorFile {
    pub fn f32(dims: &[usize], values: Vec<f32>) -> Result<Self> {
        Self::checked(dims, TensorData::F32(values))
    }

    pub fn u8(dims: &[usize], values: Vec<u8>) -> Result<Self> {
        Self::checked(dims, TensorData::U8(values))
    }

    /// Stores an `f64` tensor as f32.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        Self::f32(t.shape(), t.data().iter().map(|&v| v as f32).collect())
    }

    fn checked(dims: &[usize], data: TensorData) -> Result<Self> {
        if dims.len() > u8::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Shape(format!("dimensions {dims:?} do not fit the container")));
        }
        let f = Self {
            dims: dims.iter().map(|&d| d as u32).collect(),
            data,
        };
        if f.element_count() != f.len() {
            return Err(Error::Shape(format!("{} values do not fill dimensions {dims:?}", f.len())));
        }
        Ok(f)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.dims.iter().map(|&d| d as usize).collect()
    }

    fn element_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    fn len(&self) -> usize {
        match &self.data {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        let values = match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
        };
        Tensor::from_vec(&self.shape(), values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + 4 * self.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(match self.data {
            TensorData::F32(_) => 1,
            TensorData::U8(_) => 2,
        });
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(m.to_string());
        if bytes.len() < 7 || &bytes[..4] != MAGIC {
            return Err(bad("missing MTNS magic"));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported container version {}", bytes[4])));
        }
        let (dtype, ndim) = (bytes[5], bytes[6] as usize);
        let header = 7 + 4 * ndim;
        if bytes.len() < header {
            return Err(bad("truncated dimension table"));
        }
        let dims: Vec<u32> = bytes[7..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let n: usize = dims.iter().map(|&d| d as usize).product();
        let payload = &bytes[header..];
        let data = match dtype {
            1 => {
                if payload.len() != 4 * n {
                    return Err(Error::Format(format!("expected {} payload bytes, found {}", 4 * n, payload.len())));
                }
                TensorData::F32(
                    payload
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect(),
                )
            }
            2 => {
                if payload.len() != n {
                    return Err(Error::Format(format!("expected {n} payload bytes, found {}", payload.len())));
                }
                TensorData::U8(payload.to_vec())
            }
            d => return Err(Error::Format(format!("unknown dtype code {d}"))),
        };
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let f = TensorFile::u8(&[2, 1], vec![7, 9]).unwrap();
        assert_eq!(f.to_bytes(), vec![b'M', b'T', b'N', b'S', 1, 2, 2, 2, 0, 0, 0, 1, 0, 0, 0, 7, 9]);
    }

    #[test]
    fn rejects_bad_headers() {
        let mut b = TensorFile::f32(&[1], vec![1.5]).unwrap().to_bytes();
        b[4] = 2;
        assert!(matches!(TensorFile::from_bytes(&b), Err(Error::Format(_))));
        b[4] = 1;
        b[0] = b'X';
        assert!(matches!(TensorFile::from_bytes(&b), Err(Error::Format(_))));
        assert!(matches!(TensorFile::f32(&[3], vec![1.0]), Err(Error::Shape(_))));
    }
}
