//! Binary MPS checkpoints: a fixed header (magic, version, site count, seed,
//! bond dimensions) followed by the row-major tensor payloads, all
//! little-endian.

use std::io::{Read, Write};

use ndarray::Array3;

use super::mps::Mps;
use super::{TensorError, TensorResult};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"LRCMPS\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> TensorError {
    TensorError::Checkpoint(e.to_string())
}

pub fn write_checkpoint<W: Write>(mut w: W, mps: &Mps, seed: u64) -> TensorResult<()> {
    let dims = mps.bond_dims();
    w.write_all(&CHECKPOINT_MAGIC).map_err(io_err)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(mps.n_sites() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&seed.to_le_bytes()).map_err(io_err)?;
    let center = mps.center.map_or(u64::MAX, |c| c as u64);
    w.write_all(&center.to_le_bytes()).map_err(io_err)?;
    for d in &dims {
        w.write_all(&(*d as u64).to_le_bytes()).map_err(io_err)?;
    }
    for t in &mps.tensors {
        for x in t.as_standard_layout().iter() {
            w.write_all(&x.to_le_bytes()).map_err(io_err)?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> TensorResult<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u64::from_le_bytes(b))
}

/// Returns the state and the seed stored in the header.
pub fn read_checkpoint<R: Read>(mut r: R) -> TensorResult<(Mps, u64)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(TensorError::Checkpoint("bad magic".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v).map_err(io_err)?;
    let version = u32::from_le_bytes(v);
    if version != CHECKPOINT_VERSION {
        return Err(TensorError::Checkpoint(format!("unsupported version {version}")));
    }
    let n = read_u64(&mut r)? as usize;
    if n == 0 || n > 1 << 20 {
        return Err(TensorError::Checkpoint(format!("implausible site count {n}")));
    }
    let seed = read_u64(&mut r)?;
    let center = match read_u64(&mut r)? {
        u64::MAX => None,
        c if (c as usize) < n => Some(c as usize),
        c => return Err(TensorError::Checkpoint(format!("center {c} out of range"))),
    };
    let dims = (0..=n).map(|_| read_u64(&mut r).map(|d| d as usize)).collect::<TensorResult<Vec<_>>>()?;
    if dims[0] != 1 || dims[n] != 1 || dims.iter().any(|&d| d == 0 || d > 1 << 16) {
        return Err(TensorError::Checkpoint("invalid bond dimensions".into()));
    }
    let mut tensors = Vec::with_capacity(n);
    for i in 0..n {
        let len = dims[i] * 2 * dims[i + 1];
        let mut buf = vec![0u8; len * 8];
        r.read_exact(&mut buf).map_err(io_err)?;
        let data = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        tensors.push(Array3::from_shape_vec((dims[i], 2, dims[i + 1]), data).unwrap());
    }
    Ok((Mps { tensors, center }, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::random_mps;

    #[test]
    fn round_trip() {
        let m = random_mps(7, 5, 9);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m, 9).unwrap();
        let (back, seed) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(seed, 9);
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_corruption() {
        let m = random_mps(4, 2, 1);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m, 1).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
