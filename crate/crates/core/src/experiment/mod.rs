//! Seeded experiment protocols: simulate, featurize, split, train, score.

mod config;
mod output;
mod timing;

use std::time::Instant;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

pub use config::{
    ExperimentConfig, ExperimentKind, Method, Sampling, SimulatorConfig, TimingConfig, TruthSource, SCHEMA_VERSION,
};
pub use output::{summarize, write_outputs, SummaryRow};
pub use timing::{run_timing, write_timing, StageTimes, TimingReport, TrainTiming};

use crate::classify::{train, ClassifierModel, TrainingSet};
use crate::data::DataMatrix;
use crate::error::{domain, Result, StageContext};
use crate::evaluate::{auc, correlation_scores, roc, MetricRecord, RocCurve};
use crate::featurize::{build_raw_features, pca_fit, PcaModel};
use crate::fingerprint;
use crate::graph::{assemble, assemble_corrected, AncestralGraph};
use crate::pairspace::{
    labels_from_truth, perturb_labels, random_positives, sample_interventionwise, sample_random_from,
    sparsify_positives, PairSpace, PairSplit,
};
use crate::seed::{self, tag};
use crate::simgen::{
    ancestral_truth, exclude_promiscuous, sample_scm, simulate_study, threshold_truth, InterventionLabels, ScmSpec,
};

/// A simulated repetition with its ground truth, before featurization.
#[derive(Debug, Clone)]
pub struct LabeledStudy {
    /// Configured number of observed variables.
    pub p: usize,
    pub rep: usize,
    pub seed: u64,
    pub scm: ScmSpec,
    /// `X` restricted to the kept variables.
    pub data: DataMatrix,
    /// Original indices of the kept variables.
    pub kept: Vec<usize>,
    pub space: PairSpace,
    pub truth: Array2<u8>,
    /// Intervened variables (kept indices) whose pairs carry labels.
    pub interventions: Vec<usize>,
    /// Labeled pairs: every pair with an intervened source.
    pub universe: Vec<usize>,
}

/// Everything one repetition needs, shared by all of its cases.
#[derive(Debug, Clone)]
pub struct Instance {
    pub p: usize,
    pub rep: usize,
    pub seed: u64,
    pub data: DataMatrix,
    pub kept: Vec<usize>,
    pub space: PairSpace,
    pub truth: Array2<u8>,
    pub interventions: Vec<usize>,
    pub universe: Vec<usize>,
    pub pca: PcaModel,
    /// PCA features of all pairs, row `k` for pair `k`.
    pub features: Array2<f64>,
}

pub fn repetition_seed(master: u64, p: usize, rep: usize) -> u64 {
    seed::derive(master, &[p as u64, rep as u64])
}

/// Simulates one repetition and derives its ground truth.
pub fn simulate_labeled(cfg: &ExperimentConfig, p: usize, rep: usize) -> Result<LabeledStudy> {
    let rep_seed = repetition_seed(cfg.seed, p, rep);
    let scm =
        sample_scm(&cfg.simulator.scm_config(p), seed::derive(rep_seed, &[tag::SCM])).stage("simulate", rep_seed)?;
    let study = simulate_study(&scm, &cfg.design, rep_seed).stage("simulate", rep_seed)?;
    study.check_split().stage("split", rep_seed)?;

    let labels = match cfg.truth {
        TruthSource::Panel => threshold_truth(&study.train_test, &study.calibration).stage("truth", rep_seed)?,
        TruthSource::Graph => {
            let full = ancestral_truth(&scm);
            let targets = study.train_test.targets.clone();
            let labels = Array2::from_shape_fn((targets.len(), p), |(r, j)| full[[targets[r], j]]);
            InterventionLabels { targets, labels }
        }
    };
    let kept = match cfg.promiscuous_fraction {
        Some(f) => exclude_promiscuous(&labels, f),
        None => (0..p).collect(),
    };
    let labels = labels.select(&kept);
    if labels.targets.len() < 2 {
        return domain(format!(
            "only {} intervened variables survive the promiscuity filter",
            labels.targets.len()
        ))
        .stage("truth", rep_seed);
    }
    let truth = labels.to_truth();
    let mut interventions = labels.targets.clone();
    interventions.sort_unstable();
    let data = study.data.select_columns(&kept).stage("truth", rep_seed)?;
    let space = PairSpace::new(kept.len()).stage("truth", rep_seed)?;
    let universe = space.pairs_from(&interventions).stage("split", rep_seed)?;
    Ok(LabeledStudy {
        p,
        rep,
        seed: rep_seed,
        scm,
        data,
        kept,
        space,
        truth,
        interventions,
        universe,
    })
}

/// Raw histograms of every pair followed by the PCA reduction.
pub fn featurize_all(cfg: &ExperimentConfig, data: &DataMatrix) -> Result<(PcaModel, Array2<f64>)> {
    let space = PairSpace::new(data.p())?;
    let all: Vec<usize> = (0..space.len()).collect();
    let raw = build_raw_features(data.values().view(), &all, &cfg.histogram)?;
    let pca = pca_fit(raw.view(), cfg.pca_dim)?;
    let features = pca.transform(raw.view())?;
    Ok((pca, features))
}

/// Simulates and featurizes one repetition.
pub fn build_instance(cfg: &ExperimentConfig, p: usize, rep: usize) -> Result<Instance> {
    let s = simulate_labeled(cfg, p, rep)?;
    let (pca, features) = featurize_all(cfg, &s.data).stage("features", s.seed)?;
    Ok(Instance {
        p,
        rep,
        seed: s.seed,
        data: s.data,
        kept: s.kept,
        space: s.space,
        truth: s.truth,
        interventions: s.interventions,
        universe: s.universe,
        pca,
        features,
    })
}

/// One evaluated (rho, param, method) combination of a repetition.
#[derive(Debug, Clone)]
pub struct CaseOutput {
    pub record: MetricRecord,
    pub roc: RocCurve,
    pub model: Option<ClassifierModel>,
    pub graph: Option<AncestralGraph>,
}

impl CaseOutput {
    /// File stem shared by this case's artifacts.
    pub fn stem(&self) -> String {
        let r = &self.record;
        let param = r.param.map(|f| format!("_f{f}")).unwrap_or_default();
        format!("{}_p{}_rho{}{}_rep{}", r.method, r.p, r.rho, param, r.rep)
    }
}

/// All records and artifacts of an experiment run, in a fixed order.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub config_hash: u64,
    pub cases: Vec<CaseOutput>,
}

impl ExperimentOutput {
    pub fn records(&self) -> Vec<MetricRecord> {
        self.cases.iter().map(|c| c.record.clone()).collect()
    }
}

/// The T/Q split of a repetition's labeled universe under the configured
/// sampling scheme.
pub fn split_pairs(cfg: &ExperimentConfig, study: &LabeledStudy, rho: f64) -> Result<PairSplit> {
    split_universe(
        cfg,
        study.seed,
        study.space,
        &study.interventions,
        &study.universe,
        &study.truth,
        rho,
    )
}

/// Redraws allowed before a split without both classes on each side is an error.
const MAX_SPLIT_DRAWS: u64 = 100;

fn both_classes(truth: &Array2<u8>, pairs: &[usize]) -> Result<bool> {
    let labels = labels_from_truth(truth, pairs)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    Ok(pos > 0 && pos < labels.len())
}

/// Draw 0 uses the sampling seed itself; a draw whose T or Q lacks a class
/// is replaced by the next derived draw.
fn split_universe(
    cfg: &ExperimentConfig,
    rep_seed: u64,
    space: PairSpace,
    interventions: &[usize],
    universe: &[usize],
    truth: &Array2<u8>,
    rho: f64,
) -> Result<PairSplit> {
    let base = seed::derive(rep_seed, &[tag::SAMPLING]);
    for draw in 0..MAX_SPLIT_DRAWS {
        let split_seed = if draw == 0 { base } else { seed::derive(base, &[draw]) };
        let split = match cfg.sampling {
            Sampling::Random => sample_random_from(universe, rho, split_seed)?,
            Sampling::Interventionwise => {
                let m = interventions.len();
                let n_train = ((rho * m as f64 + 0.5).floor() as usize).clamp(1, m - 1);
                sample_interventionwise(space, interventions, n_train, split_seed)?.1
            }
        };
        split.check_disjoint()?;
        if both_classes(truth, &split.train)? && both_classes(truth, &split.query)? {
            return Ok(split);
        }
    }
    domain(format!(
        "no split at rho = {rho} with both classes in T and Q after {MAX_SPLIT_DRAWS} draws"
    ))
}

fn split_for(cfg: &ExperimentConfig, inst: &Instance, rho: f64) -> Result<PairSplit> {
    split_universe(
        cfg,
        inst.seed,
        inst.space,
        &inst.interventions,
        &inst.universe,
        &inst.truth,
        rho,
    )
}

/// Training labels after the experiment's label protocol, plus the pairs
/// and reference labels the scores are judged on.
struct Protocol {
    train_labels: Vec<u8>,
    eval_pairs: Vec<usize>,
    eval_labels: Vec<u8>,
    error_correct: bool,
}

fn protocol(cfg: &ExperimentConfig, inst: &Instance, split: &PairSplit, param: Option<f64>) -> Result<Protocol> {
    let truth_train = labels_from_truth(&inst.truth, &split.train)?;
    let label_seed = seed::derive(inst.seed, &[tag::LABELS]);
    let query = |train_labels: Vec<u8>| -> Result<Protocol> {
        Ok(Protocol {
            train_labels,
            eval_pairs: split.query.clone(),
            eval_labels: labels_from_truth(&inst.truth, &split.query)?,
            error_correct: false,
        })
    };
    let f = param.unwrap_or(0.0);
    match cfg.experiment {
        ExperimentKind::VaryP | ExperimentKind::VaryRho | ExperimentKind::Timing => query(truth_train),
        ExperimentKind::Perturb => query(perturb_labels(&truth_train, f, label_seed)?.0),
        ExperimentKind::SparsePositive => query(sparsify_positives(&truth_train, f, label_seed)?),
        ExperimentKind::RandomControl => query(random_positives(&truth_train, f, label_seed)?),
        ExperimentKind::ErrorCorrect => {
            let (noisy, plan) = perturb_labels(&truth_train, f, label_seed)?;
            let positions = plan.positions();
            Ok(Protocol {
                train_labels: noisy,
                eval_pairs: positions.iter().map(|&t| split.train[t]).collect(),
                eval_labels: positions.iter().map(|&t| truth_train[t]).collect(),
                error_correct: true,
            })
        }
    }
}

fn rows(features: &Array2<f64>, pairs: &[usize]) -> Array2<f64> {
    features.select(Axis(0), pairs)
}

/// Scores for `pairs` from a trained model or a correlation baseline.
enum Scorer {
    Model(ClassifierModel),
    Correlation(crate::evaluate::Correlation),
}

impl Scorer {
    fn score(&self, inst: &Instance, pairs: &[usize]) -> Result<Vec<f64>> {
        match self {
            Scorer::Model(m) => m.predict_features(rows(&inst.features, pairs).view()),
            Scorer::Correlation(c) => correlation_scores(inst.data.values().view(), pairs, *c),
        }
    }
}

fn run_case(
    cfg: &ExperimentConfig,
    config_hash: u64,
    inst: &Instance,
    rho: f64,
    param: Option<f64>,
    method: Method,
) -> Result<CaseOutput> {
    let split = split_for(cfg, inst, rho).stage("split", inst.seed)?;
    let proto = protocol(cfg, inst, &split, param).stage("labels", inst.seed)?;

    let start = Instant::now();
    let scorer = match (method.learner(), method.correlation()) {
        (Some(learner), _) => {
            let set = TrainingSet::new(
                rows(&inst.features, &split.train),
                proto.train_labels.clone(),
                split.train.clone(),
            )
            .stage("train", inst.seed)?;
            let classifier = train(
                learner,
                &set,
                &cfg.learner_params,
                seed::derive(inst.seed, &[tag::LEARNER]),
            )
            .stage("train", inst.seed)?;
            Scorer::Model(ClassifierModel {
                classifier,
                pca: inst.pca.clone(),
                histogram: cfg.histogram,
                config_hash,
                seed: inst.seed,
            })
        }
        (None, Some(c)) => Scorer::Correlation(c),
        (None, None) => unreachable!("every method is a learner or a correlation"),
    };
    let scores = scorer.score(inst, &proto.eval_pairs).stage("predict", inst.seed)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let area = auc(&scores, &proto.eval_labels).stage("evaluate", inst.seed)?;
    let curve = roc(&scores, &proto.eval_labels).stage("evaluate", inst.seed)?;

    let graph = if cfg.save_graphs {
        let p = inst.space.p();
        let g = if proto.error_correct {
            let all: Vec<usize> = (0..inst.space.len()).collect();
            assemble_corrected(&scorer.score(inst, &all)?, p)
        } else {
            // standard assembly predicts every pair outside T, not just Q
            let in_train: std::collections::HashSet<usize> = split.train.iter().copied().collect();
            let unknown: Vec<usize> = (0..inst.space.len()).filter(|k| !in_train.contains(k)).collect();
            let full = PairSplit {
                train: split.train.clone(),
                query: unknown,
            };
            assemble(&full, &proto.train_labels, &scorer.score(inst, &full.query)?, p)
        }
        .stage("assemble", inst.seed)?;
        Some(g.with_meta(config_hash, inst.seed))
    } else {
        None
    };

    let model = match scorer {
        Scorer::Model(m) if cfg.save_models => Some(m),
        _ => None,
    };
    Ok(CaseOutput {
        record: MetricRecord {
            experiment: cfg.experiment.name().to_string(),
            seed: inst.seed,
            p: inst.p,
            rho,
            method: method.name().to_string(),
            auc: area,
            wall_ms,
            rep: inst.rep,
            param,
            config_hash: fingerprint::hex(config_hash),
        },
        roc: curve,
        model,
        graph,
    })
}

/// Runs every case of one repetition in a fixed order.
pub fn run_repetition(cfg: &ExperimentConfig, p: usize, rep: usize) -> Result<Vec<CaseOutput>> {
    let config_hash = cfg.hash();
    let inst = build_instance(cfg, p, rep)?;
    let mut out = Vec::new();
    for rho in cfg.rho_values() {
        for param in cfg.param_values() {
            for &method in &cfg.learners {
                out.push(run_case(cfg, config_hash, &inst, rho, param, method)?);
            }
        }
    }
    Ok(out)
}

/// Runs the configured protocol over every `p` and repetition. Repetitions
/// run in parallel; results come back in `(p, rep, rho, param, method)`
/// order regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::Timing {
        return crate::error::config("timing experiments run through run_timing");
    }
    let jobs: Vec<(usize, usize)> = cfg
        .p
        .iter()
        .flat_map(|&p| (0..cfg.repetitions).map(move |rep| (p, rep)))
        .collect();
    let results: Vec<Result<Vec<CaseOutput>>> = jobs
        .par_iter()
        .map(|&(p, rep)| {
            log::info!("{}: p = {p}, repetition {rep}", cfg.experiment.name());
            run_repetition(cfg, p, rep)
        })
        .collect();
    let mut cases = Vec::new();
    for r in results {
        cases.extend(r?);
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        cases,
    })
}
