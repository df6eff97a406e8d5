use serde::{Deserialize, Serialize};

use crate::classify::{Learner, LearnerConfig};
use crate::error::{config, Result};
use crate::evaluate::Correlation;
use crate::featurize::HistogramConfig;
use crate::simgen::{DesignConfig, InterventionModel, ScmConfig};

/// Current config schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    VaryP,
    VaryRho,
    Perturb,
    ErrorCorrect,
    SparsePositive,
    RandomControl,
    Timing,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VaryP => "vary_p",
            ExperimentKind::VaryRho => "vary_rho",
            ExperimentKind::Perturb => "perturb",
            ExperimentKind::ErrorCorrect => "error_correct",
            ExperimentKind::SparsePositive => "sparse_positive",
            ExperimentKind::RandomControl => "random_control",
            ExperimentKind::Timing => "timing",
        }
    }

    fn default_fractions(self) -> Vec<f64> {
        match self {
            ExperimentKind::Perturb => vec![0.0, 0.1, 0.2, 0.3],
            ExperimentKind::ErrorCorrect => vec![0.2],
            ExperimentKind::SparsePositive => vec![0.1, 0.25, 0.5, 1.0],
            ExperimentKind::RandomControl => vec![0.5],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Random,
    Interventionwise,
}

/// Scoring method: a trained learner or a correlation baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    L1,
    Nn,
    Pearson,
    Kendall,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::L1 => "l1",
            Method::Nn => "nn",
            Method::Pearson => "pearson",
            Method::Kendall => "kendall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Method::L1, Method::Nn, Method::Pearson, Method::Kendall]
            .into_iter()
            .find(|m| m.name() == s)
    }

    pub fn learner(self) -> Option<Learner> {
        match self {
            Method::L1 => Some(Learner::L1),
            Method::Nn => Some(Learner::Nn),
            _ => None,
        }
    }

    pub fn correlation(self) -> Option<Correlation> {
        match self {
            Method::Pearson => Some(Correlation::Pearson),
            Method::Kendall => Some(Correlation::Kendall),
            _ => None,
        }
    }
}

/// Where the ground-truth labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    /// Calibration-panel threshold rule on the train/test interventions.
    Panel,
    /// Ancestral relations of the simulated graph.
    Graph,
}

/// Random SCM family, scaled with the number of observed variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    /// Latent variables per observed variable.
    pub latent_ratio: f64,
    /// Expected edges per observed variable.
    pub expected_degree: f64,
    /// Expected observed children per latent variable.
    pub latent_degree: f64,
    pub cyclic: bool,
    pub weight_range: (f64, f64),
    pub noise_sd_range: (f64, f64),
    pub mean_range: (f64, f64),
    pub intervention: InterventionModel,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        let base = ScmConfig::default();
        Self {
            latent_ratio: 0.1,
            expected_degree: 1.5,
            latent_degree: 3.0,
            cyclic: false,
            weight_range: base.weight_range,
            noise_sd_range: (0.1, 0.3),
            mean_range: base.mean_range,
            intervention: base.intervention,
        }
    }
}

impl SimulatorConfig {
    /// Concrete SCM parameters for `p` observed variables. Edge
    /// probabilities are chosen so the expected degree does not depend on `p`.
    pub fn scm_config(&self, p: usize) -> ScmConfig {
        let p_lat = (self.latent_ratio * p as f64).round() as usize;
        let candidates_per_node = if self.cyclic {
            (p - 1) as f64
        } else {
            (p - 1) as f64 / 2.0
        };
        ScmConfig {
            p_obs: p,
            p_lat,
            edge_density: (self.expected_degree / candidates_per_node).min(0.99),
            latent_density: (self.latent_degree / p as f64).min(0.99),
            cyclic: self.cyclic,
            weight_range: self.weight_range,
            noise_sd_range: self.noise_sd_range,
            mean_range: self.mean_range,
            intervention: self.intervention,
        }
    }
}

/// Stage timing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub repeats: usize,
    /// Variable count for the fixed-|T| training measurement.
    pub train_p: usize,
    pub train_size: usize,
    /// Query sizes for the fixed-|T| measurement.
    pub query_sizes: Vec<usize>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            repeats: 3,
            train_p: 200,
            train_size: 1000,
            query_sizes: vec![1000, 10_000],
        }
    }
}

/// A complete, versioned experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub p: Vec<usize>,
    /// Fraction of labeled pairs.
    pub rho: f64,
    /// Values of `rho` visited by `vary_rho`.
    pub rho_grid: Vec<f64>,
    pub sampling: Sampling,
    pub learners: Vec<Method>,
    pub repetitions: usize,
    pub seed: u64,
    /// Perturbation fractions (`perturb`, `error_correct`) or kept positive
    /// fractions (`sparse_positive`, `random_control`). Empty means the
    /// experiment's default grid.
    pub fractions: Vec<f64>,
    pub truth: TruthSource,
    /// Variables affected by at least this fraction of interventions are
    /// dropped; `None` disables the filter.
    pub promiscuous_fraction: Option<f64>,
    pub simulator: SimulatorConfig,
    pub design: DesignConfig,
    pub histogram: HistogramConfig,
    pub pca_dim: usize,
    pub learner_params: LearnerConfig,
    pub roc_grid_points: usize,
    pub save_models: bool,
    pub save_graphs: bool,
    pub timing: TimingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: ExperimentKind::VaryP,
            p: vec![50, 100, 200, 500],
            rho: 0.5,
            rho_grid: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            sampling: Sampling::Random,
            learners: vec![Method::L1],
            repetitions: 10,
            seed: 1,
            fractions: Vec::new(),
            truth: TruthSource::Panel,
            promiscuous_fraction: Some(0.5),
            simulator: SimulatorConfig::default(),
            design: DesignConfig::default(),
            histogram: HistogramConfig::default(),
            pca_dim: 100,
            learner_params: LearnerConfig::default(),
            roc_grid_points: 101,
            save_models: true,
            save_graphs: false,
            timing: TimingConfig::default(),
        }
    }
}

fn fraction_ok(f: f64, lo_open: bool) -> bool {
    f.is_finite() && f <= 1.0 && if lo_open { f > 0.0 } else { f >= 0.0 }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| crate::Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Fingerprint of every field.
    pub fn hash(&self) -> u64 {
        crate::fingerprint::config_hash(self)
    }

    /// Visited values of `rho`.
    pub fn rho_values(&self) -> Vec<f64> {
        match self.experiment {
            ExperimentKind::VaryRho => self.rho_grid.clone(),
            _ => vec![self.rho],
        }
    }

    /// Visited protocol parameters (`None` when the experiment has none).
    pub fn param_values(&self) -> Vec<Option<f64>> {
        let grid = if self.fractions.is_empty() {
            self.experiment.default_fractions()
        } else {
            self.fractions.clone()
        };
        match self.experiment {
            ExperimentKind::VaryP | ExperimentKind::VaryRho | ExperimentKind::Timing => vec![None],
            _ => grid.into_iter().map(Some).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.p.is_empty() {
            return config("p list is empty");
        }
        let needed = self.design.n_train_test + self.design.n_calibration + self.design.n_nuisance;
        if let Some(&p) = self.p.iter().find(|&&p| p < needed.max(3)) {
            return config(format!(
                "p = {p} is too small for a design with {needed} intervention targets"
            ));
        }
        if self.design.n_train_test < 2 {
            return config("at least 2 train/test interventions are required");
        }
        if self.truth == TruthSource::Panel
            && (self.design.n_calibration == 0 || self.design.replicates_calibration == 0)
        {
            return config("panel ground truth needs a non-empty calibration panel");
        }
        if self.design.replicates_train_test == 0 {
            return config("train/test interventions need at least one replicate");
        }
        for rho in self.rho_values() {
            if !(rho > 0.0 && rho < 1.0) {
                return config(format!("rho must lie in (0, 1), got {rho}"));
            }
        }
        if self.learners.is_empty() {
            return config("no learners given");
        }
        if self.repetitions == 0 {
            return config("repetitions must be positive");
        }
        let lo_open = matches!(
            self.experiment,
            ExperimentKind::SparsePositive | ExperimentKind::RandomControl
        );
        for f in self.param_values().into_iter().flatten() {
            if !fraction_ok(f, lo_open) {
                return config(format!("fraction {f} is out of range for {}", self.experiment.name()));
            }
        }
        if let Some(f) = self.promiscuous_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return config(format!("promiscuous_fraction must lie in (0, 1], got {f}"));
            }
        }
        if self.pca_dim == 0 || self.pca_dim > self.histogram.raw_len() {
            return config(format!(
                "pca_dim must lie in 1..={}, got {}",
                self.histogram.raw_len(),
                self.pca_dim
            ));
        }
        if self.roc_grid_points < 2 {
            return config("roc_grid_points must be at least 2");
        }
        let s = &self.simulator;
        if !(s.latent_ratio >= 0.0 && s.expected_degree >= 0.0 && s.latent_degree >= 0.0) {
            return config("simulator rates must be non-negative");
        }
        if !(0.0..=1.0).contains(&s.intervention.knockdown) {
            return config("knockdown factor must lie in [0, 1]");
        }
        self.histogram
            .validate()
            .map_err(|e| crate::Error::Config(e.to_string()))?;
        self.learner_params
            .l1
            .validate()
            .map_err(|e| crate::Error::Config(e.to_string()))?;
        self.learner_params
            .nn
            .validate()
            .map_err(|e| crate::Error::Config(e.to_string()))?;
        if self.experiment == ExperimentKind::Timing {
            let t = &self.timing;
            if t.repeats == 0 || t.train_size == 0 || t.query_sizes.is_empty() {
                return config("timing needs positive repeats, train_size and at least one query size");
            }
            if t.train_p < needed.max(3) {
                return config("timing.train_p is too small for the design");
            }
            let k = t.train_p * (t.train_p - 1);
            if let Some(q) = t.query_sizes.iter().find(|&&q| q + t.train_size > k) {
                return config(format!(
                    "train_size + query size {q} exceeds the {k} pairs at p = {}",
                    t.train_p
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_defaults() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());

        let partial = ExperimentConfig::from_json(r#"{"experiment": "perturb", "p": [60]}"#).unwrap();
        assert_eq!(partial.param_values(), vec![Some(0.0), Some(0.1), Some(0.2), Some(0.3)]);
        assert_ne!(partial.hash(), cfg.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"schema_version": 9}"#,
            r#"{"p": []}"#,
            r#"{"p": [10]}"#,
            r#"{"rho": 1.0}"#,
            r#"{"experiment": "random_control", "fractions": [0.0]}"#,
            r#"{"unknown_field": 1}"#,
            r#"{"learners": ["svm"]}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(bad), Err(crate::Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn expected_degree_is_scale_free() {
        let sim = SimulatorConfig::default();
        for p in [50, 200] {
            let c = sim.scm_config(p);
            let edges = c.edge_density * (p * (p - 1)) as f64 / 2.0;
            assert!((edges / p as f64 - sim.expected_degree).abs() < 1e-12);
        }
    }
}
