//! Pairwise featurization: a bivariate histogram per ordered variable pair,
//! reduced to a fixed width by PCA.

mod pca;
mod store;

pub use pca::{pca_fit, PcaModel};
pub use store::FeatureMatrix;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pairspace::PairSpace;

/// Per-variable scaling applied before binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// Average rank divided by n.
    #[default]
    Rank,
    /// Affine map of [min, max] onto [0, 1].
    MinMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramConfig {
    pub bins_per_axis: usize,
    pub transform: Transform,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            bins_per_axis: 16,
            transform: Transform::Rank,
        }
    }
}

impl HistogramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins_per_axis < 2 {
            return domain(format!("bins_per_axis must be at least 2, got {}", self.bins_per_axis));
        }
        if self.bins_per_axis > u16::MAX as usize {
            return domain("bins_per_axis too large");
        }
        Ok(())
    }

    /// Raw feature length `B = bins_per_axis²`.
    pub fn raw_len(&self) -> usize {
        self.bins_per_axis * self.bins_per_axis
    }

    pub fn apply(&self, column: &[f64]) -> Result<Vec<f64>> {
        match self.transform {
            Transform::Rank => rank_transform(column),
            Transform::MinMax => minmax_transform(column),
        }
    }
}

/// Average-tie ranks scaled by `1/n`, so values lie in `(0, 1]`.
pub fn rank_transform(column: &[f64]) -> Result<Vec<f64>> {
    let n = column.len();
    if n == 0 {
        return domain("cannot rank an empty column");
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && column[order[end]] == column[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean
        let avg = (start + 1 + end) as f64 / 2.0;
        for &t in &order[start..end] {
            out[t] = avg / n as f64;
        }
        start = end;
    }
    Ok(out)
}

/// Maps `[min, max]` onto `[0, 1]`; a constant column maps to 0.5.
pub fn minmax_transform(column: &[f64]) -> Result<Vec<f64>> {
    if column.is_empty() {
        return domain("cannot scale an empty column");
    }
    let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span == 0.0 {
        return Ok(vec![0.5; column.len()]);
    }
    Ok(column.iter().map(|&v| (v - lo) / span).collect())
}

fn bin_of(u: f64, bins: usize) -> u16 {
    ((u * bins as f64).floor() as usize).min(bins - 1) as u16
}

fn histogram_into(bi: &[u16], bj: &[u16], bins: usize, out: &mut [f64]) {
    out.fill(0.0);
    for (&a, &b) in bi.iter().zip(bj) {
        out[a as usize * bins + b as usize] += 1.0;
    }
    let scale = 1.0 / bi.len() as f64;
    for v in out.iter_mut() {
        *v *= scale;
    }
}

/// Normalized bivariate histogram of `(xi, xj)` on `[0,1]²` after the
/// configured transform; row-major over `(bin_i, bin_j)`.
pub fn bivariate_histogram(xi: &[f64], xj: &[f64], cfg: &HistogramConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if xi.len() != xj.len() {
        return Err(Error::Dimension {
            context: "bivariate histogram columns",
            expected: xi.len(),
            got: xj.len(),
        });
    }
    let bins = cfg.bins_per_axis;
    let bi: Vec<u16> = cfg.apply(xi)?.into_iter().map(|u| bin_of(u, bins)).collect();
    let bj: Vec<u16> = cfg.apply(xj)?.into_iter().map(|u| bin_of(u, bins)).collect();
    let mut out = vec![0.0; cfg.raw_len()];
    histogram_into(&bi, &bj, bins, &mut out);
    Ok(out)
}

/// Bin index of every sample of every variable, one row per variable.
fn bin_columns(x: ArrayView2<'_, f64>, cfg: &HistogramConfig) -> Result<Vec<Vec<u16>>> {
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = x.column(j).to_vec();
            Ok(cfg
                .apply(&col)?
                .into_iter()
                .map(|u| bin_of(u, cfg.bins_per_axis))
                .collect())
        })
        .collect()
}

/// One histogram row per entry of `pairs`, in order. `x` is `n × p`.
pub fn build_raw_features(x: ArrayView2<'_, f64>, pairs: &[usize], cfg: &HistogramConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let space = PairSpace::new(x.ncols())?;
    if x.nrows() == 0 {
        return domain("data matrix has no samples");
    }
    if let Some(&k) = pairs.iter().find(|&&k| k >= space.len()) {
        return domain(format!("pair index {k} out of range for K = {}", space.len()));
    }
    let binned = bin_columns(x, cfg)?;
    let b = cfg.raw_len();
    let mut flat = vec![0.0; pairs.len() * b];
    flat.par_chunks_mut(b).zip(pairs.par_iter()).for_each(|(row, &k)| {
        let (i, j) = space.pair_unchecked(k);
        histogram_into(&binned[i], &binned[j], cfg.bins_per_axis, row);
    });
    Ok(Array2::from_shape_vec((pairs.len(), b), flat).expect("row-major buffer matches shape"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn rank_examples() {
        let r = rank_transform(&[5.0, 1.0, 3.0]).unwrap();
        assert_eq!(r, vec![1.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(rank_transform(&[2.0, 2.0]).unwrap(), vec![0.75, 0.75]);
        let oracle = (1.0 + 2.0 + 3.0 + 4.0) / 4.0 / 4.0;
        assert_eq!(rank_transform(&[9.0; 4]).unwrap(), vec![oracle; 4]);
        assert!(rank_transform(&[]).is_err());
    }

    #[test]
    fn minmax_maps_to_unit_interval() {
        assert_eq!(minmax_transform(&[2.0, 4.0, 3.0]).unwrap(), vec![0.0, 1.0, 0.5]);
        assert_eq!(minmax_transform(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn histogram_single_cell() {
        let cfg = HistogramConfig::default();
        let h = bivariate_histogram(&[1.0; 4], &[2.0; 4], &cfg).unwrap();
        assert_eq!(h.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(h.iter().filter(|&&v| v == 0.0).count(), cfg.raw_len() - 1);
    }

    #[test]
    fn histogram_uniform_grid() {
        let cfg = HistogramConfig::default();
        let bins = cfg.bins_per_axis;
        let mut xi = Vec::new();
        let mut xj = Vec::new();
        for a in 0..bins {
            for b in 0..bins {
                xi.push(a as f64);
                xj.push(b as f64);
            }
        }
        let h = bivariate_histogram(&xi, &xj, &cfg).unwrap();
        let expected = 1.0 / cfg.raw_len() as f64;
        assert!(h.iter().all(|&v| (v - expected).abs() < 1e-15));
    }

    #[test]
    fn histogram_gaussian_matches_direct_count() {
        let cfg = HistogramConfig::default();
        let mut rng = seed::rng(5);
        let n = 1000;
        let xi: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let xj: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = bivariate_histogram(&xi, &xj, &cfg).unwrap();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // oracle: count by sorted position directly
        let position = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            let mut pos = vec![0usize; v.len()];
            for (r, &t) in idx.iter().enumerate() {
                pos[t] = r;
            }
            pos
        };
        let (pi, pj) = (position(&xi), position(&xj));
        let mut counts = vec![0usize; cfg.raw_len()];
        for t in 0..n {
            // rank r+1 over n lands in bin floor((r+1)·16/n), clipped
            let bi = (((pi[t] + 1) * 16) / n).min(15);
            let bj = (((pj[t] + 1) * 16) / n).min(15);
            counts[bi * 16 + bj] += 1;
        }
        for (a, &c) in h.iter().zip(&counts) {
            assert!((a - c as f64 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn histogram_of_correlated_gaussian_peaks_on_diagonal() {
        let cfg = HistogramConfig::default();
        let mut rng = seed::rng(8);
        let n = 4000;
        let mut xi = Vec::new();
        let mut xj = Vec::new();
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            xi.push(z);
            xj.push(0.9 * z + 0.3 * e);
        }
        let h = bivariate_histogram(&xi, &xj, &cfg).unwrap();
        let diag: f64 = (0..16).map(|b| h[b * 16 + b]).sum();
        let anti: f64 = (0..16).map(|b| h[b * 16 + (15 - b)]).sum();
        assert!(diag > 5.0 * anti);
    }

    #[test]
    fn raw_features_swap_symmetry_and_conservation() {
        let mut rng = seed::rng(2);
        let n = 60;
        let x = Array2::from_shape_fn((n, 2), |_| StandardNormal.sample(&mut rng));
        let cfg = HistogramConfig::default();
        let raw = build_raw_features(x.view(), &[0, 1], &cfg).unwrap();
        assert_eq!(raw.nrows(), 2);
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(raw[[0, a * 16 + b]], raw[[1, b * 16 + a]]);
            }
        }
        for row in raw.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn raw_features_reject_bad_input() {
        let cfg = HistogramConfig::default();
        let mut x = Array2::<f64>::zeros((5, 3));
        assert!(build_raw_features(x.view(), &[6], &cfg).is_err());
        x[[3, 2]] = f64::INFINITY;
        assert!(matches!(
            build_raw_features(x.view(), &[0], &cfg),
            Err(Error::NonFinite { row: 3, col: 2 })
        ));
        assert!(bivariate_histogram(&[1.0, 2.0], &[1.0], &cfg).is_err());
        let bad = HistogramConfig {
            bins_per_axis: 1,
            ..cfg
        };
        assert!(bivariate_histogram(&[1.0], &[1.0], &bad).is_err());
    }
}
