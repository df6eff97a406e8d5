//! Little-endian helpers for the crate's binary containers.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub(crate) fn write_magic<W: Write>(w: &mut W, magic: &[u8; 8], version: u32) -> Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(version)?;
    Ok(())
}

/// Checks the magic bytes and returns the format version.
pub(crate) fn read_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<u32> {
    let mut got = [0u8; 8];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic: expected {:?}, got {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&got)
        )));
    }
    Ok(r.read_u32::<LittleEndian>()?)
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    Ok(w.write_u64::<LittleEndian>(v)?)
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(r.read_u64::<LittleEndian>()?)
}

pub(crate) fn read_len<R: Read>(r: &mut R, limit: usize) -> Result<usize> {
    let v = read_u64(r)? as usize;
    if v > limit {
        return Err(Error::Format(format!("length {v} exceeds limit {limit}")));
    }
    Ok(v)
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

/// Length-prefixed `f64` vector.
pub(crate) fn write_vec<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    write_u64(w, values.len() as u64)?;
    write_f64s(w, values.iter().copied())
}

pub(crate) fn read_vec<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = read_len(r, 1 << 32)?;
    read_f64s(r, n)
}
