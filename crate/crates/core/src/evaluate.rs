//! ROC/AUC scoring, correlation baselines and thresholding.

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::graph::AncestralGraph;
use crate::pairspace::PairSpace;

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            context: "scores vs labels",
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if let Some(col) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite { row: 0, col });
    }
    if labels.iter().any(|&l| l > 1) {
        return domain("labels must be 0 or 1");
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return domain("AUC needs both classes present");
    }
    Ok((pos, neg))
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &t in &order[start..end] {
            ranks[t] = avg;
        }
        start = end;
    }
    ranks
}

/// Mann–Whitney estimate of `P(score⁺ > score⁻) + ½·P(tie)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `≥ threshold` are called positive; the first point uses `+∞`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve over every distinct score, from `(0,0)` to `(1,1)`. A block of
/// tied scores contributes a single diagonal segment.
pub fn roc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut start = 0;
    while start < order.len() {
        let s = scores[order[start]];
        let mut end = start;
        while end < order.len() && scores[order[end]] == s {
            if labels[order[end]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: s,
        });
        start = end;
    }
    Ok(RocCurve {
        auc: trapezoid_area(&points),
        points,
    })
}

fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

impl RocCurve {
    /// Linear interpolation of TPR at `fpr`; on a vertical segment the
    /// highest TPR is returned.
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let pts = &self.points;
        let idx = pts.partition_point(|pt| pt.fpr <= fpr);
        if idx == 0 {
            return pts[0].tpr;
        }
        let a = pts[idx - 1];
        if idx == pts.len() || a.fpr == fpr {
            return a.tpr;
        }
        let b = pts[idx];
        a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "fpr,tpr,threshold")?;
        for pt in &self.points {
            writeln!(w, "{},{},{}", pt.fpr, pt.tpr, pt.threshold)?;
        }
        Ok(())
    }
}

/// Vertical averaging: mean TPR of every curve at `grid_points` evenly
/// spaced FPR values in `[0, 1]`, with the standard error per point.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRoc {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub tpr_se: Vec<f64>,
}

pub fn average_roc(curves: &[RocCurve], grid_points: usize) -> Result<AveragedRoc> {
    if curves.is_empty() {
        return domain("no ROC curves to average");
    }
    if grid_points < 2 {
        return domain("ROC averaging grid needs at least 2 points");
    }
    let fpr: Vec<f64> = (0..grid_points).map(|g| g as f64 / (grid_points - 1) as f64).collect();
    let mut tpr = Vec::with_capacity(grid_points);
    let mut tpr_se = Vec::with_capacity(grid_points);
    for &f in &fpr {
        let vals: Vec<f64> = curves.iter().map(|c| c.tpr_at(f)).collect();
        let (m, se) = mean_se(&vals);
        tpr.push(m);
        tpr_se.push(se);
    }
    Ok(AveragedRoc { fpr, tpr, tpr_se })
}

impl AveragedRoc {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "fpr,tpr,tpr_se")?;
        for ((f, t), s) in self.fpr.iter().zip(&self.tpr).zip(&self.tpr_se) {
            writeln!(w, "{f},{t},{s}")?;
        }
        Ok(())
    }
}

/// Mean and standard error (sample standard deviation over `√n`; zero for
/// a single value).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    Pearson,
    Kendall,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Kendall's tau-b from ranked columns, counting concordance with a
/// merge-sort inversion count.
fn kendall_tau_b(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&s, &t| a[s].total_cmp(&a[t]).then(b[s].total_cmp(&b[t])));
    let pairs = |n: usize| (n * n.saturating_sub(1) / 2) as u64;
    // pairs tied within runs of equal keys in a sorted sequence
    let tied_runs = |same: &dyn Fn(usize, usize) -> bool| -> u64 {
        let mut tied = 0;
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && same(start, end) {
                end += 1;
            }
            tied += pairs(end - start);
            start = end;
        }
        tied
    };
    let sa: Vec<f64> = idx.iter().map(|&t| a[t]).collect();
    let mut sb: Vec<f64> = idx.iter().map(|&t| b[t]).collect();
    let n1 = tied_runs(&|s, t| sa[s] == sa[t]);
    let n3 = tied_runs(&|s, t| sa[s] == sa[t] && sb[s] == sb[t]);
    let swaps = merge_count(&mut sb);
    let n2 = tied_runs(&|s, t| sb[s] == sb[t]);
    let n0 = pairs(n);
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return None;
    }
    let concordant_minus_discordant = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Some((concordant_minus_discordant / denom).clamp(-1.0, 1.0))
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            count += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    count
}

/// `|corr(x_i, x_j)|` for each pair. A zero-variance column scores 0.
pub fn correlation_scores(x: ArrayView2<'_, f64>, pairs: &[usize], method: Correlation) -> Result<Vec<f64>> {
    let space = PairSpace::new(x.ncols())?;
    if x.nrows() < 3 {
        return domain(format!("correlation baselines need n ≥ 3, got {}", x.nrows()));
    }
    if let Some(&k) = pairs.iter().find(|&&k| k >= space.len()) {
        return domain(format!("pair index {k} out of range for K = {}", space.len()));
    }
    let cols: Vec<Vec<f64>> = (0..x.ncols()).map(|j| x.column(j).to_vec()).collect();
    for (j, c) in cols.iter().enumerate() {
        if c.iter().all(|&v| v == c[0]) {
            log::warn!("variable {j} has zero variance; its pairs score 0");
        }
    }
    Ok(pairs
        .par_iter()
        .map(|&k| {
            let (i, j) = space.pair_unchecked(k);
            let r = match method {
                Correlation::Pearson => pearson(&cols[i], &cols[j]),
                Correlation::Kendall => kendall_tau_b(&cols[i], &cols[j]),
            };
            r.map_or(0.0, f64::abs)
        })
        .collect())
}

/// `1` where the score exceeds `t`, `0` elsewhere (including undefined
/// entries and the diagonal).
pub fn threshold(graph: &AncestralGraph, t: f64) -> Result<Array2<u8>> {
    if !(0.0..=1.0).contains(&t) {
        return domain(format!("threshold must lie in [0, 1], got {t}"));
    }
    let p = graph.p();
    Ok(Array2::from_shape_fn((p, p), |(i, j)| {
        u8::from(graph.score(i, j).is_some_and(|s| s > t))
    }))
}

/// One line of an experiment's metric log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub experiment: String,
    pub seed: u64,
    pub p: usize,
    pub rho: f64,
    pub method: String,
    pub auc: f64,
    pub wall_ms: f64,
    pub rep: usize,
    /// Protocol parameter varied by the experiment (perturbation fraction,
    /// positive fraction), if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    pub config_hash: String,
}

impl MetricRecord {
    /// JSON with the timing field removed, for determinism comparisons.
    pub fn untimed_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("metric record serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_ms");
        }
        v.to_string()
    }
}
