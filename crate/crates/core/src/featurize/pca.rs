use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::binio;
use crate::error::{domain, Error, Result};
use crate::linalg::jacobi_eigen;

/// Rows per covariance accumulation block. Fixed so the floating-point
/// reduction order never depends on the thread count.
const BLOCK_ROWS: usize = 2048;
const JACOBI_REL_TOL: f64 = 1e-12;

/// A fitted principal-component projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `d × B`, orthonormal rows in non-increasing eigenvalue order.
    pub components: Array2<f64>,
    pub eigenvalues: Array1<f64>,
}

/// Sample covariance (denominator `K−1`) of the rows of `raw` about `mean`.
fn covariance(raw: ArrayView2<'_, f64>, mean: &Array1<f64>) -> Array2<f64> {
    let (k, b) = raw.dim();
    let blocks: Vec<Array2<f64>> = (0..k.div_ceil(BLOCK_ROWS))
        .into_par_iter()
        .map(|blk| {
            let lo = blk * BLOCK_ROWS;
            let hi = (lo + BLOCK_ROWS).min(k);
            let centered = &raw.slice(s![lo..hi, ..]) - &mean.view().insert_axis(Axis(0));
            centered.t().dot(&centered)
        })
        .collect();
    let mut cov = Array2::<f64>::zeros((b, b));
    for blk in &blocks {
        cov += blk;
    }
    cov /= (k - 1) as f64;
    cov
}

/// Fits the top `min(d, B)` principal components of the rows of `raw`.
///
/// Each component's sign is fixed so that its largest-magnitude coordinate
/// is positive.
pub fn pca_fit(raw: ArrayView2<'_, f64>, d: usize) -> Result<PcaModel> {
    let (k, b) = raw.dim();
    if k < 2 {
        return domain(format!("PCA needs at least 2 rows, got {k}"));
    }
    if d == 0 {
        return domain("PCA target dimension must be positive");
    }
    // running mean is exact when all rows are equal
    let mut mean = Array1::<f64>::zeros(b);
    for (t, row) in raw.rows().into_iter().enumerate() {
        let w = 1.0 / (t + 1) as f64;
        mean.zip_mut_with(&row, |m, &x| *m += (x - *m) * w);
    }
    let cov = covariance(raw, &mean);
    let eig = jacobi_eigen(&cov, JACOBI_REL_TOL)?;
    let d = d.min(b);
    let mut components = eig.vectors.slice(s![.., ..d]).t().to_owned();
    for mut row in components.rows_mut() {
        let lead = row
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if lead < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
    let eigenvalues = eig.values.slice(s![..d]).mapv(|v| v.max(0.0));
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

impl PcaModel {
    /// Raw feature length `B`.
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    /// `components · (row − mean)` for every row.
    pub fn transform(&self, raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if raw.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                context: "PCA input width",
                expected: self.input_dim(),
                got: raw.ncols(),
            });
        }
        let centered = &raw - &self.mean.view().insert_axis(Axis(0));
        Ok(centered.dot(&self.components.t()))
    }

    /// Maps reduced rows back into raw-feature space.
    pub fn reconstruct(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.output_dim() {
            return Err(Error::Dimension {
                context: "PCA feature width",
                expected: self.output_dim(),
                got: features.ncols(),
            });
        }
        Ok(features.dot(&self.components) + &self.mean.view().insert_axis(Axis(0)))
    }

    /// Little-endian layout: B, d, mean, row-major components, eigenvalues.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        binio::write_u64(&mut w, self.input_dim() as u64)?;
        binio::write_u64(&mut w, self.output_dim() as u64)?;
        binio::write_f64s(&mut w, self.mean.iter().copied())?;
        binio::write_f64s(&mut w, self.components.iter().copied())?;
        binio::write_f64s(&mut w, self.eigenvalues.iter().copied())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let b = binio::read_len(&mut r, 1 << 24)?;
        let d = binio::read_len(&mut r, b)?;
        let mean = Array1::from(binio::read_f64s(&mut r, b)?);
        let components = Array2::from_shape_vec((d, b), binio::read_f64s(&mut r, d * b)?)
            .map_err(|e| Error::Format(e.to_string()))?;
        let eigenvalues = Array1::from(binio::read_f64s(&mut r, d)?);
        Ok(Self {
            mean,
            components,
            eigenvalues,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn random_matrix(k: usize, b: usize, s: u64) -> Array2<f64> {
        let mut rng = seed::rng(s);
        Array2::from_shape_fn((k, b), |_| rng.random::<f64>())
    }

    /// Covariance assembled entry by entry, independent of the blocked path.
    fn brute_force_cov(x: &Array2<f64>) -> Array2<f64> {
        let (k, b) = x.dim();
        let mean: Vec<f64> = (0..b).map(|j| x.column(j).sum() / k as f64).collect();
        Array2::from_shape_fn((b, b), |(a, c)| {
            (0..k)
                .map(|t| (x[[t, a]] - mean[a]) * (x[[t, c]] - mean[c]))
                .sum::<f64>()
                / (k - 1) as f64
        })
    }

    #[test]
    fn identical_rows_have_zero_spectrum() {
        let row = Array1::from_iter((0..8).map(|v| 0.1 * v as f64 + 0.013));
        let raw = Array2::from_shape_fn((5, 8), |(_, j)| row[j]);
        let m = pca_fit(raw.view(), 4).unwrap();
        assert!(m.eigenvalues.iter().all(|&v| v == 0.0));
        let z = m.transform(raw.view()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_one_data() {
        let dir = Array1::from_iter((0..6).map(|v| (v as f64 - 2.5) / 3.0));
        let mean = Array1::from_elem(6, 0.3);
        let raw = Array2::from_shape_fn((20, 6), |(t, j)| mean[j] + (t as f64 - 9.5) * 0.1 * dir[j]);
        let m = pca_fit(raw.view(), 6).unwrap();
        assert!(m.eigenvalues[0] > 0.0);
        assert!(m.eigenvalues.iter().skip(1).all(|&v| v.abs() < 1e-10));
    }

    #[test]
    fn components_are_eigenvectors_of_covariance() {
        let raw = random_matrix(500, 256, 17);
        let m = pca_fit(raw.view(), 100).unwrap();
        let cov = brute_force_cov(&raw);
        for (v, &lambda) in m.components.rows().into_iter().zip(&m.eigenvalues) {
            let cv = cov.dot(&v);
            let resid = (&cv - &(&v * lambda)).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            let scale = cv.mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(resid <= 1e-6 * scale, "residual {resid} vs {scale}");
        }
        let gram = m.components.dot(&m.components.t());
        for i in 0..100 {
            for j in 0..100 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - target).abs() < 1e-8);
            }
        }
        assert!(m.eigenvalues.windows(2).into_iter().all(|w| w[0] >= w[1]));
        for row in m.components.rows() {
            let lead = row
                .iter()
                .copied()
                .fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn transform_and_reconstruct() {
        let raw = random_matrix(60, 9, 3);
        let full = pca_fit(raw.view(), 9).unwrap();
        let z = full.transform(raw.view()).unwrap();
        let back = full.reconstruct(z.view()).unwrap();
        for (a, b) in back.iter().zip(raw.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
        let at_mean = full.transform(full.mean.view().insert_axis(Axis(0))).unwrap();
        assert!(at_mean.iter().all(|&v| v.abs() < 1e-15));

        let first = z.column(0);
        let mu = first.sum() / first.len() as f64;
        let var = first.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (first.len() - 1) as f64;
        assert!((var - full.eigenvalues[0]).abs() <= 0.02 * full.eigenvalues[0]);

        assert!(full.transform(Array2::zeros((2, 8)).view()).is_err());
        let mut buf = Vec::new();
        full.write_binary(&mut buf).unwrap();
        assert_eq!(PcaModel::read_binary(buf.as_slice()).unwrap(), full);
        assert!(pca_fit(raw.slice(s![..1, ..]), 3).is_err());
    }

    #[test]
    fn blocked_covariance_matches_brute_force() {
        let raw = random_matrix(BLOCK_ROWS * 2 + 37, 5, 21);
        let mean = raw.mean_axis(Axis(0)).unwrap();
        let blocked = covariance(raw.view(), &mean);
        let brute = brute_force_cov(&raw);
        for (a, b) in blocked.iter().zip(brute.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
