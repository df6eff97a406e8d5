//! Randomized linear structural causal models with latent confounders,
//! optional feedback cycles and knockdown interventions.
//!
//! Every sample solves the equilibrium `x = Wᵀx + e` exactly. A knockdown on
//! variable `t` severs all edges into `t` and replaces its equation with
//! `x_t = γ·μ_t + δ + ε_t`, where `μ_t` is the observational mean of `x_t`.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector, LU};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{domain, Error, Result};
use crate::seed;

/// Spectral radius ceiling for the weight matrix.
pub const MAX_SPECTRAL_RADIUS: f64 = 0.95;
/// Radius a violating weight matrix is rescaled to.
const RESCALED_RADIUS: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionModel {
    /// Fraction `γ` of the observational mean retained under knockdown.
    pub knockdown: f64,
    /// Additive shift `δ`.
    pub shift: f64,
}

impl Default for InterventionModel {
    fn default() -> Self {
        Self {
            knockdown: 0.1,
            shift: 0.0,
        }
    }
}

/// A linear SCM over `p_obs` observed variables (indices `0..p_obs`) and
/// `p_lat` latent roots (indices `p_obs..`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub p_obs: usize,
    pub p_lat: usize,
    /// `weights[a][b]` is the direct effect of `a` on `b`.
    pub weights: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub noise_sd: Vec<f64>,
    pub intervention: InterventionModel,
}

/// Parameters for [`sample_scm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScmConfig {
    pub p_obs: usize,
    pub p_lat: usize,
    /// Probability of each admissible observed→observed edge.
    pub edge_density: f64,
    /// Probability of each latent→observed edge.
    pub latent_density: f64,
    pub cyclic: bool,
    /// Absolute edge weights are uniform on this range, with random sign.
    pub weight_range: (f64, f64),
    pub noise_sd_range: (f64, f64),
    /// Observational means are uniform on this range.
    pub mean_range: (f64, f64),
    pub intervention: InterventionModel,
}

impl Default for ScmConfig {
    fn default() -> Self {
        Self {
            p_obs: 50,
            p_lat: 0,
            edge_density: 0.05,
            latent_density: 0.05,
            cyclic: false,
            weight_range: (0.3, 0.9),
            noise_sd_range: (0.5, 1.0),
            mean_range: (2.0, 4.0),
            intervention: InterventionModel::default(),
        }
    }
}

impl ScmConfig {
    pub fn new(p_obs: usize, p_lat: usize, edge_density: f64, cyclic: bool) -> Self {
        Self {
            p_obs,
            p_lat,
            edge_density,
            latent_density: edge_density,
            cyclic,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p_obs < 1 {
            return domain("p_obs must be at least 1");
        }
        for (name, d) in [
            ("edge_density", self.edge_density),
            ("latent_density", self.latent_density),
        ] {
            if !(0.0..1.0).contains(&d) {
                return domain(format!("{name} must lie in [0, 1), got {d}"));
            }
        }
        let ranges = [
            ("weight_range", self.weight_range),
            ("noise_sd_range", self.noise_sd_range),
            ("mean_range", self.mean_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return domain(format!("{name} must be a finite increasing pair"));
            }
        }
        if self.noise_sd_range.0 < 0.0 {
            return domain("noise standard deviations must be non-negative");
        }
        let gamma = self.intervention.knockdown;
        if !(0.0..=1.0).contains(&gamma) {
            return domain(format!("knockdown factor must lie in [0, 1], got {gamma}"));
        }
        Ok(())
    }
}

fn uniform(rng: &mut seed::Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Largest eigenvalue modulus of a square weight matrix.
pub fn spectral_radius(weights: &[Vec<f64>]) -> f64 {
    let n = weights.len();
    if n == 0 {
        return 0.0;
    }
    let m = DMatrix::from_fn(n, n, |a, b| weights[a][b]);
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn sample_scm(cfg: &ScmConfig, seed: u64) -> Result<ScmSpec> {
    cfg.validate()?;
    let (p, q) = (cfg.p_obs, cfg.p_lat);
    let n = p + q;
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut rank = vec![0usize; p];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }

    let mut weights = vec![vec![0.0; n]; n];
    let draw_weight = |rng: &mut seed::Rng| {
        let w = uniform(rng, cfg.weight_range);
        if rng.random_bool(0.5) {
            w
        } else {
            -w
        }
    };
    for a in 0..p {
        for b in 0..p {
            if a == b || (!cfg.cyclic && rank[a] >= rank[b]) {
                continue;
            }
            if rng.random_bool(cfg.edge_density) {
                weights[a][b] = draw_weight(&mut rng);
            }
        }
    }
    for l in p..n {
        for b in 0..p {
            if rng.random_bool(cfg.latent_density) {
                weights[l][b] = draw_weight(&mut rng);
            }
        }
    }
    if cfg.cyclic {
        let radius = spectral_radius(&weights);
        if radius >= MAX_SPECTRAL_RADIUS {
            let scale = RESCALED_RADIUS / radius;
            for row in weights.iter_mut() {
                for w in row.iter_mut() {
                    *w *= scale;
                }
            }
        }
    }

    let noise_sd: Vec<f64> = (0..n).map(|_| uniform(&mut rng, cfg.noise_sd_range)).collect();
    let means: Vec<f64> = (0..n).map(|_| uniform(&mut rng, cfg.mean_range)).collect();
    // intercepts chosen so that the observational means equal `means`
    let intercept: Vec<f64> = (0..n)
        .map(|b| means[b] - (0..n).map(|a| weights[a][b] * means[a]).sum::<f64>())
        .collect();
    Ok(ScmSpec {
        p_obs: p,
        p_lat: q,
        weights,
        intercept,
        noise_sd,
        intervention: cfg.intervention,
    })
}

impl ScmSpec {
    pub fn n_vars(&self) -> usize {
        self.p_obs + self.p_lat
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.weights.len() != n || self.weights.iter().any(|r| r.len() != n) {
            return domain(format!("weight matrix must be {n}×{n}"));
        }
        if self.intercept.len() != n || self.noise_sd.len() != n {
            return domain("intercept and noise vectors must cover every variable");
        }
        if (0..n).any(|a| self.weights[a][a] != 0.0) {
            return domain("weight matrix must have a zero diagonal");
        }
        for l in self.p_obs..n {
            if (0..self.p_obs).any(|o| self.weights[o][l] != 0.0) {
                return domain(format!("latent variable {l} has an observed parent"));
            }
        }
        if self.noise_sd.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return domain("noise standard deviations must be finite and non-negative");
        }
        Ok(())
    }

    fn system(&self, target: Option<usize>) -> DMatrix<f64> {
        let n = self.n_vars();
        // (I − Wᵀ)[b, a] = δ_ab − W[a, b]; a knocked-down target keeps only its diagonal
        DMatrix::from_fn(n, n, |b, a| {
            let id = if a == b { 1.0 } else { 0.0 };
            if Some(b) == target {
                id
            } else {
                id - self.weights[a][b]
            }
        })
    }

    /// Observational means `(I − Wᵀ)⁻¹·intercept`.
    pub fn observational_mean(&self) -> Result<Vec<f64>> {
        let lu = LU::new(self.system(None));
        let rhs = DVector::from_column_slice(&self.intercept);
        lu.solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::Singular("I − Wᵀ is singular".into()))
    }

    /// Weight matrix with the edges into `target` removed.
    pub fn severed_weights(&self, target: Option<usize>) -> Vec<Vec<f64>> {
        let mut w = self.weights.clone();
        if let Some(t) = target {
            for row in w.iter_mut() {
                row[t] = 0.0;
            }
        }
        w
    }
}

/// Draws equilibrium samples from an [`ScmSpec`].
pub struct Simulator<'a> {
    spec: &'a ScmSpec,
    mean: Vec<f64>,
    solvers: HashMap<Option<usize>, LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

/// One equilibrium sample over all variables, with the structural noise
/// vector it solves for.
#[derive(Debug, Clone)]
pub struct Sample {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
}

const SINGULAR_PIVOT: f64 = 1e-10;

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a ScmSpec, targets: &[usize]) -> Result<Self> {
        spec.validate()?;
        if let Some(&t) = targets.iter().find(|&&t| t >= spec.p_obs) {
            return domain(format!("intervention target {t} is not an observed variable"));
        }
        let mean = spec.observational_mean()?;
        let mut solvers = HashMap::new();
        for target in std::iter::once(None).chain(targets.iter().map(|&t| Some(t))) {
            if solvers.contains_key(&target) {
                continue;
            }
            let lu = LU::new(spec.system(target));
            let u = lu.u();
            let min_pivot = u.diagonal().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            if min_pivot < SINGULAR_PIVOT {
                return Err(Error::Singular(format!(
                    "I − Wᵀ is numerically singular (pivot {min_pivot:e}) for intervention {target:?}"
                )));
            }
            solvers.insert(target, lu);
        }
        Ok(Self { spec, mean, solvers })
    }

    pub fn observational_mean(&self) -> &[f64] {
        &self.mean
    }

    /// Structural noise vector for one sample.
    pub fn noise(&self, target: Option<usize>, rng: &mut seed::Rng) -> Vec<f64> {
        let spec = self.spec;
        (0..spec.n_vars())
            .map(|a| {
                let z: f64 = rng.sample(StandardNormal);
                let base = if Some(a) == target {
                    spec.intervention.knockdown * self.mean[a] + spec.intervention.shift
                } else {
                    spec.intercept[a]
                };
                base + spec.noise_sd[a] * z
            })
            .collect()
    }

    /// Solves `(I − W_tᵀ)·x = e`.
    pub fn solve(&self, target: Option<usize>, e: &[f64]) -> Result<Vec<f64>> {
        let lu = self
            .solvers
            .get(&target)
            .ok_or_else(|| Error::Domain(format!("simulator not prepared for intervention {target:?}")))?;
        let x = lu
            .solve(&DVector::from_column_slice(e))
            .ok_or_else(|| Error::Singular("equilibrium solve failed".into()))?;
        Ok(x.iter().copied().collect())
    }

    pub fn sample(&self, target: Option<usize>, sample_seed: u64) -> Result<Sample> {
        let e = self.noise(target, &mut seed::rng(sample_seed));
        let x = self.solve(target, &e)?;
        Ok(Sample { x, e })
    }

    /// `n` samples under `target`, observed columns only. Sample `s` is
    /// seeded by `(seed, offset + s)`.
    fn block(&self, target: Option<usize>, n: usize, seed: u64, offset: usize) -> Result<Array2<f64>> {
        let p = self.spec.p_obs;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|s| {
                self.sample(target, seed::derive(seed, &[(offset + s) as u64]))
                    .map(|smp| smp.x[..p].to_vec())
            })
            .collect::<Result<_>>()?;
        Ok(Array2::from_shape_fn((n, p), |(r, c)| rows[r][c]))
    }
}

/// `‖x − Wᵀx − e‖_∞` using the weights in force under `target`.
pub fn equilibrium_residual(spec: &ScmSpec, target: Option<usize>, sample: &Sample) -> f64 {
    let w = spec.severed_weights(target);
    let n = spec.n_vars();
    (0..n)
        .map(|b| {
            let inflow: f64 = (0..n).map(|a| w[a][b] * sample.x[a]).sum();
            (sample.x[b] - inflow - sample.e[b]).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelRole {
    TrainTest,
    Calibration,
    Nuisance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionRequest {
    pub target: usize,
    pub replicates: usize,
}

/// Replicate measurements of every observed variable under each of a list
/// of interventions.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionPanel {
    pub role: PanelRole,
    pub targets: Vec<usize>,
    /// One `replicates × p_obs` block per target.
    pub measurements: Vec<Array2<f64>>,
}

impl InterventionPanel {
    pub fn p(&self) -> usize {
        self.measurements.first().map_or(0, |m| m.ncols())
    }

    /// Flattens the panel into data rows tagged with their targets.
    pub fn to_data(&self) -> Result<DataMatrix> {
        let p = self.p();
        let rows: usize = self.measurements.iter().map(|m| m.nrows()).sum();
        let mut values = Array2::zeros((rows, p));
        let mut tags = Vec::with_capacity(rows);
        let mut r = 0;
        for (block, &t) in self.measurements.iter().zip(&self.targets) {
            for row in block.rows() {
                values.row_mut(r).assign(&row);
                tags.push(Some(t));
                r += 1;
            }
        }
        DataMatrix::new(values, tags)
    }
}

/// Observational samples plus one replicate block per requested
/// intervention. Latent columns are dropped.
pub fn simulate(
    spec: &ScmSpec,
    n_obs: usize,
    interventions: &[InterventionRequest],
    role: PanelRole,
    seed: u64,
) -> Result<(DataMatrix, InterventionPanel)> {
    let targets: Vec<usize> = interventions.iter().map(|r| r.target).collect();
    let sim = Simulator::new(spec, &targets)?;
    let obs = sim.block(None, n_obs, seed, 0)?;
    let mut offset = n_obs;
    let mut measurements = Vec::with_capacity(interventions.len());
    for req in interventions {
        measurements.push(sim.block(Some(req.target), req.replicates, seed, offset)?);
        offset += req.replicates;
    }
    Ok((
        DataMatrix::new(obs, vec![None; n_obs])?,
        InterventionPanel {
            role,
            targets,
            measurements,
        },
    ))
}

/// `truth[i][j] = 1` iff observed `j` is reachable from observed `i`
/// through the support of `W`, latent intermediates included.
pub fn ancestral_truth(spec: &ScmSpec) -> Array2<u8> {
    let n = spec.n_vars();
    let children: Vec<Vec<usize>> = (0..n)
        .map(|a| (0..n).filter(|&b| spec.weights[a][b] != 0.0).collect())
        .collect();
    let p = spec.p_obs;
    let mut truth = Array2::zeros((p, p));
    for s in 0..p {
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = children[s].iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            queue.extend(children[v].iter().copied().filter(|&c| !seen[c]));
        }
        for j in (0..p).filter(|&j| j != s && seen[j]) {
            truth[[s, j]] = 1;
        }
    }
    truth
}

/// Per-intervention effect labels: `labels[[r, j]]` refers to the pair
/// `(targets[r], j)`. The entry for `j = targets[r]` is always 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionLabels {
    pub targets: Vec<usize>,
    pub labels: Array2<u8>,
}

impl InterventionLabels {
    pub fn p(&self) -> usize {
        self.labels.ncols()
    }

    /// Embeds the labels into a `p × p` truth matrix; rows of variables
    /// that were never intervened on stay 0.
    pub fn to_truth(&self) -> Array2<u8> {
        let p = self.p();
        let mut truth = Array2::zeros((p, p));
        for (r, &t) in self.targets.iter().enumerate() {
            for j in (0..p).filter(|&j| j != t) {
                truth[[t, j]] = self.labels[[r, j]];
            }
        }
        truth
    }

    /// Restricts to the kept variables, re-indexed in the given order.
    /// Targets that were dropped lose their rows.
    pub fn select(&self, keep: &[usize]) -> InterventionLabels {
        let remap: HashMap<usize, usize> = keep.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        let rows: Vec<usize> = (0..self.targets.len())
            .filter(|&r| remap.contains_key(&self.targets[r]))
            .collect();
        let labels = Array2::from_shape_fn((rows.len(), keep.len()), |(r, c)| self.labels[[rows[r], keep[c]]]);
        InterventionLabels {
            targets: rows.iter().map(|&r| remap[&self.targets[r]]).collect(),
            labels,
        }
    }
}

/// Labels `(i → j)` causal iff the mean of `x_j` under intervention on `i`
/// lies strictly outside the `[min, max]` of every calibration-panel
/// measurement of `x_j`.
pub fn threshold_truth(train_test: &InterventionPanel, calibration: &InterventionPanel) -> Result<InterventionLabels> {
    if calibration.measurements.iter().all(|m| m.nrows() == 0) {
        return domain("calibration panel is empty");
    }
    let p = calibration.p();
    if train_test.p() != p && !train_test.targets.is_empty() {
        return Err(Error::Dimension {
            context: "train/test panel width",
            expected: p,
            got: train_test.p(),
        });
    }
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for block in &calibration.measurements {
        for row in block.rows() {
            for (j, &v) in row.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
    }
    let mut labels = Array2::zeros((train_test.targets.len(), p));
    for (r, (block, &t)) in train_test.measurements.iter().zip(&train_test.targets).enumerate() {
        if block.nrows() == 0 {
            return domain(format!("intervention on {t} has no replicates"));
        }
        for j in (0..p).filter(|&j| j != t) {
            let mean = block.column(j).sum() / block.nrows() as f64;
            labels[[r, j]] = u8::from(mean < lo[j] || mean > hi[j]);
        }
    }
    Ok(InterventionLabels {
        targets: train_test.targets.clone(),
        labels,
    })
}

/// Variables affected by fewer than `max_fraction` of the interventions
/// that do not target them, in increasing order.
pub fn exclude_promiscuous(labels: &InterventionLabels, max_fraction: f64) -> Vec<usize> {
    (0..labels.p())
        .filter(|&j| {
            let rows: Vec<usize> = (0..labels.targets.len()).filter(|&r| labels.targets[r] != j).collect();
            if rows.is_empty() {
                return true;
            }
            let hits = rows.iter().filter(|&&r| labels.labels[[r, j]] == 1).count();
            (hits as f64) < max_fraction * rows.len() as f64
        })
        .collect()
}

/// Sizes of the simulated study: observational samples plus three disjoint
/// intervention panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    pub n_obs: usize,
    pub n_train_test: usize,
    pub n_calibration: usize,
    pub n_nuisance: usize,
    pub replicates_train_test: usize,
    pub replicates_calibration: usize,
    pub replicates_nuisance: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            n_obs: 200,
            n_train_test: 20,
            n_calibration: 10,
            n_nuisance: 10,
            replicates_train_test: 5,
            replicates_calibration: 5,
            replicates_nuisance: 3,
        }
    }
}

/// A simulated study: the data matrix `X` (observational rows plus the
/// nuisance interventions) and the two held-out panels.
#[derive(Debug, Clone)]
pub struct SimulatedStudy {
    pub data: DataMatrix,
    pub train_test: InterventionPanel,
    pub calibration: InterventionPanel,
    pub nuisance_targets: Vec<usize>,
}

impl SimulatedStudy {
    /// No calibration or train/test intervention may leak into `X`.
    pub fn check_split(&self) -> Result<()> {
        let held_out: std::collections::HashSet<usize> = self
            .train_test
            .targets
            .iter()
            .chain(&self.calibration.targets)
            .copied()
            .collect();
        if let Some(t) = self.data.targets().iter().flatten().find(|t| held_out.contains(t)) {
            return domain(format!("held-out intervention on {t} appears in the data matrix"));
        }
        if self
            .train_test
            .targets
            .iter()
            .any(|t| self.calibration.targets.contains(t))
        {
            return domain("calibration and train/test panels share a target");
        }
        Ok(())
    }
}

pub fn simulate_study(spec: &ScmSpec, design: &DesignConfig, seed: u64) -> Result<SimulatedStudy> {
    let needed = design.n_train_test + design.n_calibration + design.n_nuisance;
    if needed > spec.p_obs {
        return domain(format!(
            "design needs {needed} distinct intervention targets but only {} variables exist",
            spec.p_obs
        ));
    }
    let mut order: Vec<usize> = (0..spec.p_obs).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, &[seed::tag::DESIGN])));
    let pick = |range: std::ops::Range<usize>| {
        let mut v = order[range].to_vec();
        v.sort_unstable();
        v
    };
    let a = design.n_train_test;
    let b = a + design.n_calibration;
    let train_test = pick(0..a);
    let calibration = pick(a..b);
    let nuisance = pick(b..needed);
    let requests = |targets: &[usize], replicates: usize| -> Vec<InterventionRequest> {
        targets
            .iter()
            .map(|&target| InterventionRequest { target, replicates })
            .collect()
    };
    let stream = |tag: u64| seed::derive(seed, &[seed::tag::SIMULATE, tag]);
    let (obs, nuisance_panel) = simulate(
        spec,
        design.n_obs,
        &requests(&nuisance, design.replicates_nuisance),
        PanelRole::Nuisance,
        stream(0),
    )?;
    let (_, tt_panel) = simulate(
        spec,
        0,
        &requests(&train_test, design.replicates_train_test),
        PanelRole::TrainTest,
        stream(1),
    )?;
    let (_, cal_panel) = simulate(
        spec,
        0,
        &requests(&calibration, design.replicates_calibration),
        PanelRole::Calibration,
        stream(2),
    )?;
    let data = if nuisance.is_empty() {
        obs
    } else {
        obs.concat(&nuisance_panel.to_data()?)?
    };
    let study = SimulatedStudy {
        data,
        train_test: tt_panel,
        calibration: cal_panel,
        nuisance_targets: nuisance,
    };
    study.check_split()?;
    Ok(study)
}
