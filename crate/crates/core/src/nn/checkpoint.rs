//! Binary parameter checkpoints.
//!
//! Layout (little endian): magic `LWCKPT\0\0`, `u32` version, `u32` entry
//! count, then per entry `u32` name length, UTF-8 name, `u8` trainable flag,
//! `u32` rank, `u64` dims, `f64` values in row-major order; finally a `u32`
//! length-prefixed UTF-8 metadata string. Values are stored bit-for-bit.

use std::io::{Read, Write};
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LWCKPT\0\0";
pub const VERSION: u32 = 1;

pub fn write_to<W: Write>(mut w: W, store: &ParamStore, meta: &str) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for e in store.entries() {
        w.write_all(&(e.name.len() as u32).to_le_bytes())?;
        w.write_all(e.name.as_bytes())?;
        w.write_all(&[e.trainable as u8])?;
        w.write_all(&(e.value.shape().len() as u32).to_le_bytes())?;
        for &d in e.value.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in e.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(meta.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| Error::Checkpoint("non UTF-8 string".into()))
}

pub fn read_from<R: Read>(mut r: R) -> Result<(ParamStore, String)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name = read_string(&mut r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank).map(|_| read_u64(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_bits(read_u64(&mut r)?));
        }
        store.add(&name, Tensor::new(shape, data)?, flag[0] != 0)?;
    }
    let meta = read_string(&mut r)?;
    Ok((store, meta))
}

pub fn save(path: &Path, store: &ParamStore, meta: &str) -> Result<()> {
    let mut buf = Vec::new();
    write_to(&mut buf, store, meta)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(ParamStore, String)> {
    let bytes = std::fs::read(path)?;
    read_from(bytes.as_slice())
}
