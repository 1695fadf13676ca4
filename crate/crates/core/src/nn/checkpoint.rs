//! Portable container of name-indexed tensors.
//!
//! Layout, all integers little-endian:
//! `b"FSNN"`, version `u32`, tensor count `u32`, then per tensor:
//! name length `u32`, UTF-8 name, dtype tag `u8` (1 = f64), rank `u32`,
//! `rank` dimensions as `u64`, and the row-major `f64` values.

use ndarray::Array2;

use super::layers::ParamSet;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FSNN";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

pub fn encode(tensors: &[(String, Array2<f64>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(DTYPE_F64);
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<(String, Array2<f64>)>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let dtype = r.take(1)?[0];
        if dtype != DTYPE_F64 {
            return Err(Error::Checkpoint(format!("{name}: unsupported dtype {dtype}")));
        }
        let rank = r.u32()?;
        let dims: Vec<usize> = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<_>>()?;
        let (rows, cols) = match dims[..] {
            [n] => (1, n),
            [a, b] => (a, b),
            _ => return Err(Error::Checkpoint(format!("{name}: rank {rank} not supported"))),
        };
        let n = rows.checked_mul(cols).ok_or_else(|| Error::Checkpoint(format!("{name}: size overflow")))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint(format!("{name}: size overflow")))?)?;
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let t = Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Checkpoint(e.to_string()))?;
        out.push((name, t));
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(out)
}

pub fn named(set: &ParamSet, prefix: &str) -> Vec<(String, Array2<f64>)> {
    set.iter().map(|(n, t)| (format!("{prefix}{n}"), t.clone())).collect()
}

/// Loads every tensor of `set` from `tensors` by `prefix + name`.
pub fn load(set: &mut ParamSet, prefix: &str, tensors: &[(String, Array2<f64>)]) -> Result<()> {
    for i in 0..set.len() {
        let want = format!("{prefix}{}", set.name(i));
        let (_, t) = tensors
            .iter()
            .find(|(n, _)| *n == want)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {want}")))?;
        if t.dim() != set.get(i).dim() {
            return Err(Error::Checkpoint(format!("{want}: shape {:?}, expected {:?}", t.dim(), set.get(i).dim())));
        }
        set.set(i, t.clone());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_and_corruption() {
        let mut set = ParamSet::new();
        set.add("a.weight", array![[1.5, -2.0], [0.0, f64::MIN_POSITIVE]]);
        set.add("log_std", array![[-2.3]]);
        let bytes = encode(&named(&set, "policy."));
        let back = decode(&bytes).unwrap();
        let mut other = set.clone();
        other.get_mut(0).fill(9.0);
        load(&mut other, "policy.", &back).unwrap();
        assert_eq!(other.checksum(), set.checksum());
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        assert!(load(&mut other, "critic.", &back).is_err());
    }
}
