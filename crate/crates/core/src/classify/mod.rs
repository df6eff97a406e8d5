//! Pair classifiers: L1-penalized logistic regression and a feedforward
//! network, plus the serialized model bundle used for end-to-end
//! prediction from raw data.

pub mod logistic;
pub mod mlp;

use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use logistic::{fit_l1_logistic, CvPoint, L1LogisticModel, LogisticConfig};
pub use mlp::{fit_mlp, MlpConfig, MlpModel};

use crate::binio;
use crate::error::{domain, Error, Result};
use crate::featurize::{build_raw_features, HistogramConfig, PcaModel, Transform};

/// Labeled feature rows for the pairs in `pairs`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub pairs: Vec<usize>,
}

impl TrainingSet {
    pub fn new(features: Array2<f64>, labels: Vec<u8>, pairs: Vec<usize>) -> Result<Self> {
        if labels.len() != features.nrows() || pairs.len() != features.nrows() {
            return Err(Error::Dimension {
                context: "training set rows",
                expected: features.nrows(),
                got: labels.len().min(pairs.len()),
            });
        }
        if features.ncols() == 0 {
            return domain("training features have zero width");
        }
        if let Some(((row, col), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        if labels.iter().any(|&y| y > 1) {
            return domain("labels must be 0 or 1");
        }
        Ok(Self {
            features,
            labels,
            pairs,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Per-column centering and scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    /// Standard deviation, or 1 for a constant column.
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let scale = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| {
                let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: Array1::zeros(d),
            scale: Array1::ones(d),
        }
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean.view().insert_axis(Axis(0))) / &self.scale.view().insert_axis(Axis(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    L1,
    Nn,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub l1: LogisticConfig,
    pub nn: MlpConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    L1(L1LogisticModel),
    Mlp(MlpModel),
}

/// Rows per parallel prediction chunk.
const PREDICT_CHUNK: usize = 1024;

impl Classifier {
    pub fn learner(&self) -> Learner {
        match self {
            Classifier::L1(_) => Learner::L1,
            Classifier::Mlp(_) => Learner::Nn,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::L1(m) => m.dim(),
            Classifier::Mlp(m) => m.dim(),
        }
    }

    /// Scores in `[0, 1]`, one per row; rows are scored in parallel chunks.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Dimension {
                context: "classifier input width",
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        let chunks: Vec<Vec<f64>> = (0..x.nrows().div_ceil(PREDICT_CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * PREDICT_CHUNK;
                let rows = x.slice(s![lo..(lo + PREDICT_CHUNK).min(x.nrows()), ..]);
                match self {
                    Classifier::L1(m) => m.predict(rows),
                    Classifier::Mlp(m) => m.predict(rows),
                }
            })
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    }
}

pub fn train(learner: Learner, set: &TrainingSet, cfg: &LearnerConfig, seed: u64) -> Result<Classifier> {
    match learner {
        Learner::L1 => fit_l1_logistic(set, &cfg.l1, seed).map(Classifier::L1),
        Learner::Nn => fit_mlp(set, &cfg.nn, seed).map(Classifier::Mlp),
    }
}

/// A fitted classifier together with the featurization it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub classifier: Classifier,
    pub pca: PcaModel,
    pub histogram: HistogramConfig,
    pub config_hash: u64,
    pub seed: u64,
}

const MODEL_MAGIC: &[u8; 8] = b"ANCMODEL";
const MODEL_VERSION: u32 = 1;
const MAX_DIM: usize = 1 << 24;

fn write_u8<W: Write>(w: &mut W, v: u8) -> Result<()> {
    Ok(w.write_all(&[v])?)
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn write_matrix<W: Write>(w: &mut W, m: &Array2<f64>) -> Result<()> {
    binio::write_u64(w, m.nrows() as u64)?;
    binio::write_u64(w, m.ncols() as u64)?;
    binio::write_f64s(w, m.iter().copied())
}

fn read_matrix<R: Read>(r: &mut R) -> Result<Array2<f64>> {
    let rows = binio::read_len(r, MAX_DIM)?;
    let cols = binio::read_len(r, MAX_DIM)?;
    let data = binio::read_f64s(r, rows * cols)?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

fn read_array1<R: Read>(r: &mut R) -> Result<Array1<f64>> {
    Ok(Array1::from(binio::read_vec(r)?))
}

impl ClassifierModel {
    /// Scores for rows that are already PCA features.
    pub fn predict_features(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.classifier.predict(features)
    }

    /// Scores for raw histogram rows.
    pub fn predict_raw(&self, raw: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let z = self.pca.transform(raw)?;
        self.classifier.predict(z.view())
    }

    /// Scores for `pairs` of an `n × p` data matrix, from raw data.
    pub fn predict_data(&self, x: ArrayView2<'_, f64>, pairs: &[usize]) -> Result<Vec<f64>> {
        let raw = build_raw_features(x, pairs, &self.histogram)?;
        self.predict_raw(raw.view())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let w = &mut w;
        binio::write_magic(w, MODEL_MAGIC, MODEL_VERSION)?;
        binio::write_u64(w, self.config_hash)?;
        binio::write_u64(w, self.seed)?;
        binio::write_u64(w, self.histogram.bins_per_axis as u64)?;
        write_u8(
            w,
            match self.histogram.transform {
                Transform::Rank => 0,
                Transform::MinMax => 1,
            },
        )?;
        self.pca.write_binary(&mut *w)?;
        match &self.classifier {
            Classifier::L1(m) => {
                write_u8(w, 0)?;
                binio::write_f64s(w, [m.lambda, m.intercept])?;
                binio::write_vec(w, &m.coefficients)?;
                binio::write_u64(w, m.cv_report.len() as u64)?;
                for c in &m.cv_report {
                    binio::write_f64s(w, [c.lambda, c.mean_auc, c.se_auc])?;
                }
            }
            Classifier::Mlp(m) => {
                write_u8(w, 1)?;
                binio::write_u64(w, m.seed)?;
                binio::write_f64s(w, [m.config.learning_rate])?;
                binio::write_u64(w, m.config.epochs as u64)?;
                binio::write_u64(w, m.config.batch_size as u64)?;
                write_u8(w, matches!(m.config.optimizer, mlp::Optimizer::Adam) as u8)?;
                write_u8(w, m.config.class_weighting as u8)?;
                binio::write_vec(w, m.scaler.mean.as_slice().expect("contiguous"))?;
                binio::write_vec(w, m.scaler.scale.as_slice().expect("contiguous"))?;
                binio::write_u64(w, m.network.layers.len() as u64)?;
                for layer in &m.network.layers {
                    write_matrix(w, &layer.w)?;
                    binio::write_vec(w, layer.b.as_slice().expect("contiguous"))?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let r = &mut r;
        let version = binio::read_magic(r, MODEL_MAGIC)?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let config_hash = binio::read_u64(r)?;
        let seed = binio::read_u64(r)?;
        let bins = binio::read_len(r, u16::MAX as usize)?;
        let transform = match read_u8(r)? {
            0 => Transform::Rank,
            1 => Transform::MinMax,
            t => return Err(Error::Format(format!("bad transform tag {t}"))),
        };
        let histogram = HistogramConfig {
            bins_per_axis: bins,
            transform,
        };
        let pca = PcaModel::read_binary(&mut *r)?;
        let classifier = match read_u8(r)? {
            0 => {
                let head = binio::read_f64s(r, 2)?;
                let coefficients = binio::read_vec(r)?;
                let n_cv = binio::read_len(r, MAX_DIM)?;
                let mut cv_report = Vec::with_capacity(n_cv);
                for _ in 0..n_cv {
                    let v = binio::read_f64s(r, 3)?;
                    cv_report.push(CvPoint {
                        lambda: v[0],
                        mean_auc: v[1],
                        se_auc: v[2],
                    });
                }
                Classifier::L1(L1LogisticModel {
                    lambda: head[0],
                    intercept: head[1],
                    coefficients,
                    cv_report,
                })
            }
            1 => {
                let mlp_seed = binio::read_u64(r)?;
                let learning_rate = binio::read_f64s(r, 1)?[0];
                let epochs = binio::read_len(r, usize::MAX)?;
                let batch_size = binio::read_len(r, usize::MAX)?;
                let optimizer = if read_u8(r)? == 1 {
                    mlp::Optimizer::Adam
                } else {
                    mlp::Optimizer::Sgd
                };
                let class_weighting = read_u8(r)? == 1;
                let scaler = Standardizer {
                    mean: read_array1(r)?,
                    scale: read_array1(r)?,
                };
                let n_layers = binio::read_len(r, 1024)?;
                let mut layers = Vec::with_capacity(n_layers);
                for _ in 0..n_layers {
                    let w = read_matrix(r)?;
                    let b = read_array1(r)?;
                    if b.len() != w.ncols() {
                        return Err(Error::Format("bias length does not match layer width".into()));
                    }
                    layers.push(mlp::Layer { w, b });
                }
                if layers.is_empty() || layers.windows(2).any(|p| p[0].w.ncols() != p[1].w.nrows()) {
                    return Err(Error::Format("inconsistent network layers".into()));
                }
                let hidden = layers[..layers.len() - 1].iter().map(|l| l.w.ncols()).collect();
                Classifier::Mlp(MlpModel {
                    network: mlp::Network { layers },
                    scaler,
                    config: MlpConfig {
                        hidden,
                        learning_rate,
                        epochs,
                        batch_size,
                        optimizer,
                        class_weighting,
                    },
                    seed: mlp_seed,
                })
            }
            t => return Err(Error::Format(format!("bad learner tag {t}"))),
        };
        if classifier.dim() != pca.components.nrows() {
            return Err(Error::Format("classifier width does not match PCA output".into()));
        }
        Ok(Self {
            classifier,
            pca,
            histogram,
            config_hash,
            seed,
        })
    }
}
