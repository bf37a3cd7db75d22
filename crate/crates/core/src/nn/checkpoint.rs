//! Binary model checkpoints.
//!
//! Layout, all little-endian:
//! `b"CALM"`, `u32` version, `u32` dim count, `u32` dims..., then for each
//! layer its weights (row-major, `out x in`) followed by its biases as `f64`.
//! Momentum buffers are not stored and come back zeroed.

use std::path::Path;

use super::ModelParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CALM";
const VERSION: u32 = 1;

pub fn write_checkpoint(model: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * model.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.dims().len() as u32).to_le_bytes());
    for &d in model.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for layer in model.layers() {
        for v in layer.weights.iter().chain(&layer.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Schema(format!(
                "checkpoint truncated at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Schema("bad checkpoint magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Schema(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n = cur.u32()? as usize;
    if n > 64 {
        return Err(Error::Schema(format!("implausible layer count {n}")));
    }
    let dims = (0..n)
        .map(|_| cur.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut model = ModelParams::zeros(&dims)?;
    for layer in model.layers_mut() {
        for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            *v = cur.f64()?;
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Schema("trailing bytes after checkpoint".into()));
    }
    if !model.all_finite() {
        return Err(Error::Numeric("checkpoint holds non-finite parameters".into()));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn round_trip_is_exact() {
        let model = ModelParams::init(&[3, 7, 2], &mut seeded(11)).unwrap();
        let bytes = write_checkpoint(&model);
        assert_eq!(&bytes[..4], b"CALM");
        assert_eq!(read_checkpoint(&bytes).unwrap(), model);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let model = ModelParams::init(&[2, 2], &mut seeded(1)).unwrap();
        let bytes = write_checkpoint(&model);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(read_checkpoint(&long).is_err());
    }
}
