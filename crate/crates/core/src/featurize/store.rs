use std::io::{Read, Write};

use ndarray::Array2;

use crate::binio;
use crate::error::{domain, Error, Result};
use crate::pairspace::pair_of;

const MAGIC: &[u8; 8] = b"ANCFEAT\0";
const VERSION: u32 = 1;

/// Reduced per-pair features; row `r` belongs to pair `pairs[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub p: usize,
    pub pairs: Vec<usize>,
    pub values: Array2<f64>,
    pub config_hash: u64,
}

impl FeatureMatrix {
    pub fn new(p: usize, pairs: Vec<usize>, values: Array2<f64>, config_hash: u64) -> Result<Self> {
        if pairs.len() != values.nrows() {
            return Err(Error::Dimension {
                context: "feature rows",
                expected: pairs.len(),
                got: values.nrows(),
            });
        }
        if let Some(&k) = pairs.iter().find(|&&k| pair_of(k, p).is_err()) {
            return domain(format!("pair index {k} out of range for p = {p}"));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self {
            p,
            pairs,
            values,
            config_hash,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Row lookup by pair index.
    pub fn position_map(&self) -> std::collections::HashMap<usize, usize> {
        self.pairs.iter().enumerate().map(|(r, &k)| (k, r)).collect()
    }

    /// Header (magic, version, K, d, config hash, p), the K pair indices,
    /// then row-major little-endian `f64` values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        binio::write_magic(&mut w, MAGIC, VERSION)?;
        binio::write_u64(&mut w, self.pairs.len() as u64)?;
        binio::write_u64(&mut w, self.dim() as u64)?;
        binio::write_u64(&mut w, self.config_hash)?;
        binio::write_u64(&mut w, self.p as u64)?;
        for &k in &self.pairs {
            binio::write_u64(&mut w, k as u64)?;
        }
        binio::write_f64s(&mut w, self.values.iter().copied())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let version = binio::read_magic(&mut r, MAGIC)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported feature matrix version {version}")));
        }
        let k = binio::read_len(&mut r, 1 << 34)?;
        let d = binio::read_len(&mut r, 1 << 20)?;
        let config_hash = binio::read_u64(&mut r)?;
        let p = binio::read_len(&mut r, 1 << 32)?;
        let pairs = (0..k)
            .map(|_| binio::read_u64(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let flat = binio::read_f64s(&mut r, k * d)?;
        let values = Array2::from_shape_vec((k, d), flat).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(p, pairs, values, config_hash)
    }

    /// Debug export: `k,i,j,f0,…,f{d-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let cols: Vec<String> = (0..self.dim()).map(|c| format!("f{c}")).collect();
        writeln!(w, "k,i,j,{}", cols.join(","))?;
        for (row, &k) in self.values.rows().into_iter().zip(&self.pairs) {
            let (i, j) = pair_of(k, self.p)?;
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{k},{i},{j},{}", vals.join(","))?;
        }
        Ok(())
    }
}
