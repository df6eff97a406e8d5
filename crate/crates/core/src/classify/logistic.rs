//! L1-penalized logistic regression by coordinate descent on the
//! iteratively reweighted quadratic approximation, with a warm-started
//! regularization path and cross-validated λ selection.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::error::{domain, Error, Result};
use crate::evaluate::auc;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub n_lambda: usize,
    /// Smallest λ on the path as a fraction of λ_max.
    pub lambda_min_ratio: f64,
    /// Fixed λ; when set, no path or cross-validation is run.
    pub lambda: Option<f64>,
    pub folds: usize,
    /// Convergence threshold on the largest coefficient change.
    pub tol: f64,
    pub max_outer: usize,
    pub max_sweeps: usize,
    /// Fit on standardized features and map coefficients back.
    pub standardize: bool,
    /// Weight classes inversely to their frequency.
    pub class_weighting: bool,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            n_lambda: 50,
            lambda_min_ratio: 1e-3,
            lambda: None,
            folds: 5,
            tol: 1e-7,
            max_outer: 100,
            max_sweeps: 100_000,
            standardize: true,
            class_weighting: false,
        }
    }
}

impl LogisticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambda < 1 {
            return domain("n_lambda must be at least 1");
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return domain("lambda_min_ratio must lie in (0, 1)");
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return domain(format!("lambda must be finite and non-negative, got {l}"));
            }
        }
        if self.folds < 2 {
            return domain("cross-validation needs at least 2 folds");
        }
        if !(self.tol > 0.0) {
            return domain("tolerance must be positive");
        }
        Ok(())
    }
}

/// Held-out AUC of one λ on the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    pub mean_auc: f64,
    pub se_auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub cv_report: Vec<CvPoint>,
}

impl L1LogisticModel {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn decision(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Dimension {
                context: "logistic model input width",
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        Ok(x.rows().into_iter().map(|r| sigmoid(self.decision(r))).collect())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `(1/N)·Σ w_t·[log(1 + e^{η_t}) − y_t·η_t] + λ‖β‖₁` with sample
/// weights `w` (all 1 when `None`).
pub fn objective(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    weights: Option<&[f64]>,
    intercept: f64,
    beta: &[f64],
    lambda: f64,
) -> f64 {
    let n = y.len() as f64;
    let loss: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .enumerate()
        .map(|(t, (row, &yt))| {
            let eta = intercept + row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            weights.map_or(1.0, |w| w[t]) * (softplus(eta) - f64::from(yt) * eta)
        })
        .sum();
    loss / n + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Column-major copy of the design, optionally standardized.
struct Design {
    cols: Vec<Vec<f64>>,
    /// The same values as an `n × d` matrix.
    mat: Array2<f64>,
    n: usize,
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Design {
    fn new(x: ArrayView2<'_, f64>, rows: &[usize], standardize: bool) -> Self {
        let n = rows.len();
        let mut cols = Vec::with_capacity(x.ncols());
        let mut center = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mut c: Vec<f64> = rows.iter().map(|&t| col[t]).collect();
            if standardize {
                let m = c.iter().sum::<f64>() / n as f64;
                let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
                let s = if sd > 0.0 { sd } else { 1.0 };
                c.iter_mut().for_each(|v| *v = (*v - m) / s);
                center.push(m);
                scale.push(if sd > 0.0 { s } else { 0.0 });
            } else {
                center.push(0.0);
                scale.push(1.0);
            }
            cols.push(c);
        }
        let mut mat = Array2::zeros((n, cols.len()));
        for (j, c) in cols.iter().enumerate() {
            mat.column_mut(j).iter_mut().zip(c).for_each(|(m, &v)| *m = v);
        }
        Self {
            cols,
            mat,
            n,
            center,
            scale,
        }
    }

    fn d(&self) -> usize {
        self.cols.len()
    }

    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n];
        for (c, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                eta.iter_mut().zip(c).for_each(|(e, x)| *e += b * x);
            }
        }
        eta
    }

    fn objective(&self, y: &[f64], w: &[f64], b0: f64, beta: &[f64], lambda: f64) -> f64 {
        let eta = self.eta(b0, beta);
        let loss: f64 = eta
            .iter()
            .zip(y)
            .zip(w)
            .map(|((&e, &yt), &wt)| wt * (softplus(e) - yt * e))
            .sum();
        loss / self.n as f64 + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Smallest λ with an all-zero solution.
    fn lambda_max(&self, y: &[f64], w: &[f64]) -> f64 {
        let ybar = weighted_mean(y, w);
        self.cols
            .iter()
            .map(|c| {
                c.iter()
                    .zip(y)
                    .zip(w)
                    .map(|((x, yt), wt)| wt * x * (yt - ybar))
                    .sum::<f64>()
                    .abs()
                    / self.n as f64
            })
            .fold(0.0, f64::max)
    }
}

fn weighted_mean(y: &[f64], w: &[f64]) -> f64 {
    y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>()
}

/// Coefficients in the design's (possibly standardized) coordinates.
#[derive(Debug, Clone)]
struct State {
    b0: f64,
    beta: Vec<f64>,
}

impl State {
    fn null(y: &[f64], w: &[f64], d: usize) -> Self {
        let m = weighted_mean(y, w);
        Self {
            b0: (m / (1.0 - m)).ln(),
            beta: vec![0.0; d],
        }
    }
}

/// Probability floor for the IRLS weights.
const PROB_EPS: f64 = 1e-12;
const MAX_HALVINGS: usize = 60;
/// Path stops once this fraction of the null deviance is explained.
const PATH_DEV_MAX: f64 = 0.999;
/// Path stops once the relative deviance change falls below this.
const PATH_DEV_CHANGE: f64 = 1e-5;
/// Early stopping never triggers before this many path points.
const PATH_MIN_LAMBDAS: usize = 5;

struct Solver<'a> {
    design: &'a Design,
    y: &'a [f64],
    w: &'a [f64],
    cfg: &'a LogisticConfig,
}

impl Solver<'_> {
    /// Minimizes the penalized objective at `lambda` starting from `state`.
    /// Appends the objective after every outer iteration to `trace`.
    fn solve(&self, lambda: f64, state: &mut State, mut trace: Option<&mut Vec<f64>>) -> Result<()> {
        let Self { design, y, w, cfg } = *self;
        let n = design.n as f64;
        let d = design.d();
        let mut obj = design.objective(y, w, state.b0, &state.beta, lambda);
        if let Some(t) = trace.as_deref_mut() {
            t.push(obj);
        }
        let mut last_change = f64::INFINITY;
        for _ in 0..cfg.max_outer {
            let eta = design.eta(state.b0, &state.beta);
            let mut v = Vec::with_capacity(design.n);
            let mut r = Vec::with_capacity(design.n);
            for t in 0..design.n {
                let p = sigmoid(eta[t]).clamp(PROB_EPS, 1.0 - PROB_EPS);
                let vt = w[t] * p * (1.0 - p);
                v.push(vt);
                // working residual z − η
                r.push(w[t] * (y[t] - sigmoid(eta[t])) / vt);
            }
            // covariance-mode updates: the weighted gradient `g` and the
            // residual sum are kept current through lazily built Gram columns
            let vx = &design.mat * &ndarray::ArrayView1::from(&v).insert_axis(Axis(1));
            let gram = design.mat.t().dot(&vx);
            let h: Vec<f64> = (0..d).map(|j| gram[[j, j]] / n).collect();
            let xv: Vec<f64> = vx.sum_axis(Axis(0)).to_vec();
            let mut g: Vec<f64> = vx.t().dot(&ndarray::ArrayView1::from(&r)).mapv(|s| s / n).to_vec();
            let mut rsum: f64 = r.iter().zip(&v).map(|(rt, vt)| rt * vt).sum();
            let vsum: f64 = v.iter().sum();

            let mut b0 = state.b0;
            let mut beta = state.beta.clone();
            let inner_tol = cfg.tol * 1e-2;
            let mut sweeps = 0;
            let update = |j: usize, beta: &mut [f64], g: &mut [f64], rsum: &mut f64| -> f64 {
                if h[j] == 0.0 {
                    return 0.0;
                }
                let new = soft_threshold(g[j] + h[j] * beta[j], lambda) / h[j];
                let delta = new - beta[j];
                if delta != 0.0 {
                    beta[j] = new;
                    let col = gram.row(j);
                    g.iter_mut()
                        .zip(col.iter())
                        .for_each(|(gk, gjk)| *gk -= delta * gjk / n);
                    *rsum -= delta * xv[j];
                }
                delta.abs()
            };
            let update_intercept = |b0: &mut f64, g: &mut [f64], rsum: &mut f64| -> f64 {
                let delta = *rsum / vsum;
                *b0 += delta;
                g.iter_mut().zip(&xv).for_each(|(gk, xvk)| *gk -= delta * xvk / n);
                *rsum -= delta * vsum;
                delta.abs()
            };
            loop {
                // full sweep
                let mut change = update_intercept(&mut b0, &mut g, &mut rsum);
                for j in 0..d {
                    change = change.max(update(j, &mut beta, &mut g, &mut rsum));
                }
                sweeps += 1;
                if change < inner_tol {
                    break;
                }
                // iterate on the active set until it settles
                let active: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
                loop {
                    let mut change = update_intercept(&mut b0, &mut g, &mut rsum);
                    for &j in &active {
                        change = change.max(update(j, &mut beta, &mut g, &mut rsum));
                    }
                    sweeps += 1;
                    if change < inner_tol || sweeps >= cfg.max_sweeps {
                        break;
                    }
                }
                if sweeps >= cfg.max_sweeps {
                    return Err(Error::Convergence {
                        iterations: sweeps,
                        lambda,
                        max_change: change,
                    });
                }
            }

            // step halving keeps the objective non-increasing
            let mut step = 1.0;
            let mut cand_b0 = b0;
            let mut cand = beta.clone();
            let mut cand_obj = design.objective(y, w, cand_b0, &cand, lambda);
            let mut halvings = 0;
            while cand_obj > obj && halvings < MAX_HALVINGS {
                step *= 0.5;
                cand_b0 = state.b0 + step * (b0 - state.b0);
                cand = state.beta.iter().zip(&beta).map(|(o, n)| o + step * (n - o)).collect();
                cand_obj = design.objective(y, w, cand_b0, &cand, lambda);
                halvings += 1;
            }
            if cand_obj > obj {
                // no descent available: already optimal to working precision
                return Ok(());
            }
            let change = cand
                .iter()
                .zip(&state.beta)
                .map(|(a, b)| (a - b).abs())
                .fold((cand_b0 - state.b0).abs(), f64::max);
            state.b0 = cand_b0;
            state.beta = cand;
            obj = cand_obj;
            if let Some(t) = trace.as_deref_mut() {
                t.push(obj);
            }
            last_change = change;
            if change < cfg.tol {
                return Ok(());
            }
        }
        Err(Error::Convergence {
            iterations: cfg.max_outer,
            lambda,
            max_change: last_change,
        })
    }

    /// Solutions along `lambdas` (decreasing), warm-started. As in glmnet,
    /// the path stops early once the fit explains nearly all of the null
    /// deviance, once the deviance stops changing between successive λ, or
    /// at the first λ whose fit does not converge (typically near-separable
    /// data at tiny λ); the solutions found so far are returned.
    fn path(&self, lambdas: &[f64], lambda_max: f64) -> Vec<State> {
        let mut state = State::null(self.y, self.w, self.design.d());
        let loss = |st: &State, l: f64| {
            self.design.objective(self.y, self.w, st.b0, &st.beta, l) - l * st.beta.iter().map(|b| b.abs()).sum::<f64>()
        };
        let null_loss = loss(&state, 0.0);
        let mut prev_loss = null_loss;
        let mut out = Vec::with_capacity(lambdas.len());
        for &l in lambdas {
            if l < lambda_max {
                if let Err(e) = self.solve(l, &mut state, None) {
                    log::warn!("λ path truncated after {} of {} values: {e}", out.len(), lambdas.len());
                    break;
                }
            }
            out.push(state.clone());
            let cur = loss(&state, l);
            if out.len() >= PATH_MIN_LAMBDAS
                && (cur <= (1.0 - PATH_DEV_MAX) * null_loss || prev_loss - cur < PATH_DEV_CHANGE * prev_loss)
            {
                log::debug!("λ path saturated after {} of {} values", out.len(), lambdas.len());
                break;
            }
            prev_loss = cur;
        }
        out
    }
}

fn sample_weights(y: &[f64], class_weighting: bool) -> Vec<f64> {
    if !class_weighting {
        return vec![1.0; y.len()];
    }
    let n = y.len() as f64;
    let pos = y.iter().sum::<f64>();
    let (wp, wn) = (n / (2.0 * pos), n / (2.0 * (n - pos)));
    y.iter().map(|&v| if v == 1.0 { wp } else { wn }).collect()
}

fn to_model(design: &Design, state: &State, lambda: f64, cv_report: Vec<CvPoint>) -> L1LogisticModel {
    let coefficients: Vec<f64> = state
        .beta
        .iter()
        .zip(&design.scale)
        .map(|(&b, &s)| if s > 0.0 { b / s } else { 0.0 })
        .collect();
    let intercept = state.b0 - coefficients.iter().zip(&design.center).map(|(b, m)| b * m).sum::<f64>();
    L1LogisticModel {
        intercept,
        coefficients,
        lambda,
        cv_report,
    }
}

fn check_classes(y: &[u8]) -> Result<()> {
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return domain("training labels contain a single class");
    }
    Ok(())
}

/// Fits at one fixed λ, returning the objective after each outer
/// iteration alongside the model.
pub fn fit_l1_fixed(train: &TrainingSet, lambda: f64, cfg: &LogisticConfig) -> Result<(L1LogisticModel, Vec<f64>)> {
    cfg.validate()?;
    check_classes(&train.labels)?;
    let rows: Vec<usize> = (0..train.len()).collect();
    let design = Design::new(train.features.view(), &rows, cfg.standardize);
    let y: Vec<f64> = train.labels.iter().map(|&v| f64::from(v)).collect();
    let w = sample_weights(&y, cfg.class_weighting);
    let solver = Solver {
        design: &design,
        y: &y,
        w: &w,
        cfg,
    };
    let mut state = State::null(&y, &w, design.d());
    let mut trace = Vec::new();
    if lambda < design.lambda_max(&y, &w) {
        solver.solve(lambda, &mut state, Some(&mut trace))?;
    }
    Ok((to_model(&design, &state, lambda, Vec::new()), trace))
}

/// Geometric grid from `lambda_max` down to `ratio·lambda_max`.
pub fn lambda_path(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda_max];
    }
    (0..n)
        .map(|l| lambda_max * ratio.powf(l as f64 / (n - 1) as f64))
        .collect()
}

/// Stratified fold assignment: each class is shuffled and dealt
/// round-robin.
fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    let mut assign = vec![0; y.len()];
    let mut offset = 0;
    for class in [1u8, 0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&t| y[t] == class).collect();
        idx.shuffle(&mut rng);
        for (r, &t) in idx.iter().enumerate() {
            assign[t] = (offset + r) % folds;
        }
        offset += idx.len();
    }
    assign
}

/// Fits the λ path on all of `train` and selects λ by stratified
/// cross-validated AUC.
pub fn fit_l1_logistic(train: &TrainingSet, cfg: &LogisticConfig, seed: u64) -> Result<L1LogisticModel> {
    cfg.validate()?;
    check_classes(&train.labels)?;
    if let Some(l) = cfg.lambda {
        return fit_l1_fixed(train, l, cfg).map(|(m, _)| m);
    }
    let n = train.len();
    let all: Vec<usize> = (0..n).collect();
    let design = Design::new(train.features.view(), &all, cfg.standardize);
    let y: Vec<f64> = train.labels.iter().map(|&v| f64::from(v)).collect();
    let w = sample_weights(&y, cfg.class_weighting);
    let lmax = design.lambda_max(&y, &w);
    let lambdas = lambda_path(lmax, cfg.n_lambda, cfg.lambda_min_ratio);

    let pos = train.labels.iter().filter(|&&v| v == 1).count();
    let folds = cfg.folds.min(pos).min(n - pos);
    let mut cv_report = Vec::new();
    let chosen = if folds < 2 {
        log::warn!("too few examples per class for cross-validation; using the smallest λ");
        lambdas.len() - 1
    } else {
        let assign = stratified_folds(&train.labels, folds, seed::derive(seed, &[seed::tag::FOLDS]));
        let mut aucs = vec![Vec::with_capacity(folds); lambdas.len()];
        for f in 0..folds {
            let fit_rows: Vec<usize> = (0..n).filter(|&t| assign[t] != f).collect();
            let held: Vec<usize> = (0..n).filter(|&t| assign[t] == f).collect();
            let yf: Vec<u8> = fit_rows.iter().map(|&t| train.labels[t]).collect();
            if check_classes(&yf).is_err() {
                continue;
            }
            let fd = Design::new(train.features.view(), &fit_rows, cfg.standardize);
            let yv: Vec<f64> = yf.iter().map(|&v| f64::from(v)).collect();
            let wv = sample_weights(&yv, cfg.class_weighting);
            let solver = Solver {
                design: &fd,
                y: &yv,
                w: &wv,
                cfg,
            };
            let states = solver.path(&lambdas, fd.lambda_max(&yv, &wv));
            let held_x = train.features.select(ndarray::Axis(0), &held);
            let held_y: Vec<u8> = held.iter().map(|&t| train.labels[t]).collect();
            for (l, st) in states.iter().enumerate() {
                let m = to_model(&fd, st, lambdas[l], Vec::new());
                let scores = m.predict(held_x.view())?;
                if let Ok(a) = auc(&scores, &held_y) {
                    aucs[l].push(a);
                }
            }
        }
        // λ values a fold's truncated path never reached are not eligible
        let reached = aucs.iter().take_while(|v| v.len() == aucs[0].len()).count();
        for (l, v) in aucs.iter().enumerate().take(reached) {
            let (m, se) = crate::evaluate::mean_se(v);
            cv_report.push(CvPoint {
                lambda: lambdas[l],
                mean_auc: m,
                se_auc: se,
            });
        }
        // first maximum, i.e. the largest λ among ties
        let mut best = 0;
        for (l, c) in cv_report.iter().enumerate() {
            if c.mean_auc > cv_report[best].mean_auc || cv_report[best].mean_auc.is_nan() {
                best = l;
            }
        }
        best
    };
    let solver = Solver {
        design: &design,
        y: &y,
        w: &w,
        cfg,
    };
    let states = solver.path(&lambdas[..=chosen], lmax);
    let at = states.len() - 1;
    Ok(to_model(&design, &states[at], lambdas[at], cv_report))
}

/// Per-coordinate KKT residuals of a fitted model on `train` (sample
/// weights 1): for `β_j = 0` the excess `max(0, |g_j| − λ)`, otherwise
/// `|g_j + λ·sign(β_j)|`, where `g` is the gradient of the mean loss. The
/// intercept gradient is included as the last entry.
pub fn kkt_residuals(train: &TrainingSet, model: &L1LogisticModel) -> Vec<f64> {
    let n = train.len() as f64;
    let x = train.features.view();
    let resid: Vec<f64> = x
        .rows()
        .into_iter()
        .zip(&train.labels)
        .map(|(row, &y)| sigmoid(model.decision(row)) - f64::from(y))
        .collect();
    let mut out: Vec<f64> = (0..model.dim())
        .map(|j| {
            let g = x.column(j).iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n;
            let b = model.coefficients[j];
            if b == 0.0 {
                (g.abs() - model.lambda).max(0.0)
            } else {
                (g + model.lambda * b.signum()).abs()
            }
        })
        .collect();
    out.push((resid.iter().sum::<f64>() / n).abs());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn no_std() -> LogisticConfig {
        LogisticConfig {
            standardize: false,
            ..LogisticConfig::default()
        }
    }

    fn random_set(n: usize, d: usize, s: u64) -> TrainingSet {
        let mut rng = seed::rng(s);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let truth: Vec<f64> = (0..d).map(|j| if j % 2 == 0 { 1.5 } else { 0.0 }).collect();
        let mut labels: Vec<u8> = x
            .rows()
            .into_iter()
            .map(|r| {
                let z: f64 = r.iter().zip(&truth).map(|(a, b)| a * b).sum();
                u8::from(rng.random::<f64>() < sigmoid(z - 0.3))
            })
            .collect();
        labels[0] = 0;
        labels[1] = 1;
        TrainingSet::new(x, labels, (0..n).collect()).unwrap()
    }

    /// Proximal gradient (ISTA) on the identical objective: independent of
    /// the IRLS/coordinate-descent machinery.
    fn proximal_gradient(train: &TrainingSet, lambda: f64) -> (f64, Vec<f64>) {
        let x = &train.features;
        let (n, d) = x.dim();
        let y: Vec<f64> = train.labels.iter().map(|&v| f64::from(v)).collect();
        // Lipschitz bound of the mean logistic loss gradient
        let lip = (x.iter().map(|v| v * v).sum::<f64>() + n as f64) / (4.0 * n as f64);
        let step = 1.0 / lip;
        let (mut b0, mut beta) = (0.0, vec![0.0; d]);
        for _ in 0..2_000_000 {
            let mut g0 = 0.0;
            let mut g = vec![0.0; d];
            for t in 0..n {
                let eta = b0 + (0..d).map(|j| x[[t, j]] * beta[j]).sum::<f64>();
                let r = sigmoid(eta) - y[t];
                g0 += r;
                for j in 0..d {
                    g[j] += r * x[[t, j]];
                }
            }
            let nb0 = b0 - step * g0 / n as f64;
            let nbeta: Vec<f64> = (0..d)
                .map(|j| soft_threshold(beta[j] - step * g[j] / n as f64, step * lambda))
                .collect();
            let change = nbeta
                .iter()
                .zip(&beta)
                .map(|(a, b)| (a - b).abs())
                .fold((nb0 - b0).abs(), f64::max);
            b0 = nb0;
            beta = nbeta;
            if change < 1e-14 {
                break;
            }
        }
        (b0, beta)
    }

    #[test]
    fn matches_proximal_gradient_oracle() {
        let train = random_set(40, 3, 9);
        let y: Vec<f64> = train.labels.iter().map(|&v| f64::from(v)).collect();
        let lmax =
            Design::new(train.features.view(), &(0..40).collect::<Vec<_>>(), false).lambda_max(&y, &vec![1.0; 40]);
        let lambda = 0.1 * lmax;
        let (m, trace) = fit_l1_fixed(&train, lambda, &no_std()).unwrap();
        let (b0, beta) = proximal_gradient(&train, lambda);
        assert!((m.intercept - b0).abs() < 1e-5);
        for (a, b) in m.coefficients.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        assert!(kkt_residuals(&train, &m).iter().all(|&r| r < 1e-6));
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        let direct = objective(
            train.features.view(),
            &train.labels,
            None,
            m.intercept,
            &m.coefficients,
            lambda,
        );
        assert!((direct - trace.last().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn lambda_max_zeroes_everything() {
        let train = random_set(80, 6, 2);
        let y: Vec<f64> = train.labels.iter().map(|&v| f64::from(v)).collect();
        for standardize in [false, true] {
            let design = Design::new(train.features.view(), &(0..80).collect::<Vec<_>>(), standardize);
            let lmax = design.lambda_max(&y, &vec![1.0; 80]);
            let cfg = LogisticConfig {
                standardize,
                ..LogisticConfig::default()
            };
            let (m, _) = fit_l1_fixed(&train, lmax, &cfg).unwrap();
            assert!(m.coefficients.iter().all(|&b| b == 0.0));
            let ybar = y.iter().sum::<f64>() / 80.0;
            assert!((sigmoid(m.intercept) - ybar).abs() < 1e-12);
            // just below λ_max the solver still satisfies KKT
            let (m2, _) = fit_l1_fixed(&train, 0.999 * lmax, &no_std()).unwrap();
            if !standardize {
                assert!(kkt_residuals(&train, &m2).iter().all(|&r| r < 1e-6));
            }
        }
    }

    #[test]
    fn objective_trace_is_monotone() {
        for s in 0..10 {
            let train = random_set(60, 5, 100 + s);
            let (_, trace) = fit_l1_fixed(&train, 1e-3, &no_std()).unwrap();
            assert!(trace.len() >= 2);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0], "objective rose: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn separable_data_gives_perfect_training_auc() {
        let x = Array2::from_shape_fn((20, 1), |(t, _)| t as f64 / 19.0);
        let labels: Vec<u8> = (0..20).map(|t| u8::from(t >= 10)).collect();
        let train = TrainingSet::new(x.clone(), labels.clone(), (0..20).collect()).unwrap();
        let (m, _) = fit_l1_fixed(&train, 1e-3, &no_std()).unwrap();
        assert_eq!(auc(&m.predict(x.view()).unwrap(), &labels).unwrap(), 1.0);
    }

    #[test]
    fn noise_labels_select_a_sparse_model() {
        let mut rng = seed::rng(5);
        let x = Array2::from_shape_fn((300, 10), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<u8> = (0..300).map(|_| rng.random_range(0..2)).collect();
        let train = TrainingSet::new(x, labels, (0..300).collect()).unwrap();
        let m = fit_l1_logistic(&train, &LogisticConfig::default(), 1).unwrap();
        // the path may stop early once the deviance no longer changes
        let path = lambda_path(m.cv_report[0].lambda, 50, 1e-3);
        assert!(m.cv_report.len() >= PATH_MIN_LAMBDAS && m.cv_report.len() <= 50);
        for (c, l) in m.cv_report.iter().zip(&path) {
            assert!((c.lambda - l).abs() <= 1e-12 * l);
        }
        assert!(m.coefficients.iter().filter(|&&b| b != 0.0).count() <= 5);
    }

    #[test]
    fn path_selection_recovers_signal() {
        let train = random_set(400, 8, 3);
        let a = fit_l1_logistic(&train, &LogisticConfig::default(), 7).unwrap();
        let b = fit_l1_logistic(&train, &LogisticConfig::default(), 7).unwrap();
        assert_eq!(a, b);
        assert!(a.coefficients[0] > 0.5 && a.coefficients[2] > 0.5);
        let best = a.cv_report.iter().map(|c| c.mean_auc).fold(0.0, f64::max);
        assert!(best > 0.75);
    }

    #[test]
    fn prediction_examples() {
        let zero = L1LogisticModel {
            intercept: 0.0,
            coefficients: vec![0.0; 3],
            lambda: 0.0,
            cv_report: vec![],
        };
        let x = ndarray::array![[1.0, -4.0, 2.0], [0.0, 0.0, 0.0]];
        assert_eq!(zero.predict(x.view()).unwrap(), vec![0.5, 0.5]);
        let e1 = L1LogisticModel {
            coefficients: vec![1.0, 0.0, 0.0],
            ..zero.clone()
        };
        let s = e1.predict(ndarray::array![[3f64.ln(), 5.0, -1.0]].view()).unwrap();
        assert!((s[0] - 0.75).abs() < 1e-15);
        assert!(zero.predict(ndarray::array![[1.0]].view()).is_err());
    }

    #[test]
    fn rejects_single_class() {
        let x = Array2::zeros((4, 2));
        let train = TrainingSet::new(x, vec![1; 4], (0..4).collect()).unwrap();
        assert!(fit_l1_logistic(&train, &LogisticConfig::default(), 0).is_err());
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let y: Vec<u8> = (0..53).map(|t| u8::from(t % 5 == 0)).collect();
        let assign = stratified_folds(&y, 5, 3);
        for f in 0..5 {
            let pos = (0..53).filter(|&t| assign[t] == f && y[t] == 1).count();
            assert!((2..=3).contains(&pos));
        }
    }
}
