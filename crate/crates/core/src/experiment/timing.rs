use std::io::Write;
use std::time::Instant;

use ndarray::Axis;
use serde::Serialize;

use super::{repetition_seed, ExperimentConfig, Method};
use crate::classify::{train, Learner, TrainingSet};
use crate::error::{Result, StageContext};
use crate::featurize::{build_raw_features, pca_fit};
use crate::fingerprint;
use crate::pairspace::{labels_from_truth, sample_random_from, PairSpace};
use crate::seed::{self, tag};
use crate::simgen::{ancestral_truth, sample_scm, simulate_study};

pub const STAGES: [&str; 6] = ["simulate", "raw_features", "pca", "featurize", "train", "predict"];

/// Wall-clock milliseconds of each pipeline stage at one `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTimes {
    pub p: usize,
    /// Number of ordered pairs, `p(p − 1)`.
    pub pairs: usize,
    pub stage: String,
    pub mean_ms: f64,
    pub min_ms: f64,
}

/// Training and prediction time at a fixed training set for one query size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainTiming {
    pub p: usize,
    pub train_size: usize,
    pub query_size: usize,
    pub train_mean_ms: f64,
    pub train_min_ms: f64,
    pub predict_mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub config_hash: u64,
    pub seed: u64,
    pub learner: String,
    pub stages: Vec<StageTimes>,
    pub fixed_train: Vec<TrainTiming>,
    /// Total wall clock of one full pipeline pass at the largest `p`.
    pub total_ms_at_max_p: f64,
}

impl TimingReport {
    pub fn stage(&self, p: usize, stage: &str) -> Option<&StageTimes> {
        self.stages.iter().find(|s| s.p == p && s.stage == stage)
    }

    /// Raw features, PCA fit and projection together.
    pub fn featurization_min_ms(&self, p: usize) -> f64 {
        ["raw_features", "pca", "featurize"]
            .iter()
            .filter_map(|s| self.stage(p, s))
            .map(|s| s.min_ms)
            .sum()
    }
}

fn clock<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64() * 1e3))
}

fn mean_min(v: &[f64]) -> (f64, f64) {
    (
        v.iter().sum::<f64>() / v.len() as f64,
        v.iter().copied().fold(f64::INFINITY, f64::min),
    )
}

fn timed_learner(cfg: &ExperimentConfig) -> Learner {
    cfg.learners.iter().find_map(|m| m.learner()).unwrap_or(Learner::L1)
}

/// One pass of the pipeline at `p`; returns per-stage milliseconds.
fn pipeline_pass(cfg: &ExperimentConfig, p: usize, rep: usize) -> Result<[f64; 6]> {
    let rep_seed = repetition_seed(cfg.seed, p, rep);
    let ((scm, study), t_sim) = clock(|| {
        let scm = sample_scm(&cfg.simulator.scm_config(p), seed::derive(rep_seed, &[tag::SCM]))?;
        let study = simulate_study(&scm, &cfg.design, rep_seed)?;
        Ok((scm, study))
    })
    .stage("simulate", rep_seed)?;
    let space = PairSpace::new(p)?;
    let all: Vec<usize> = (0..space.len()).collect();
    let x = study.data.values().view();
    let (raw, t_raw) = clock(|| build_raw_features(x, &all, &cfg.histogram)).stage("features", rep_seed)?;
    let (pca, t_pca) = clock(|| pca_fit(raw.view(), cfg.pca_dim)).stage("pca", rep_seed)?;
    let (features, t_feat) = clock(|| pca.transform(raw.view())).stage("pca", rep_seed)?;
    drop(raw);

    let truth = ancestral_truth(&scm);
    let mut sources = study.train_test.targets.clone();
    sources.sort_unstable();
    let universe = space.pairs_from(&sources)?;
    let split = sample_random_from(&universe, cfg.rho, seed::derive(rep_seed, &[tag::SAMPLING]))?;
    let labels = labels_from_truth(&truth, &split.train)?;
    let learner = timed_learner(cfg);
    let (model, t_train) = clock(|| {
        let set = TrainingSet::new(features.select(Axis(0), &split.train), labels, split.train.clone())?;
        train(
            learner,
            &set,
            &cfg.learner_params,
            seed::derive(rep_seed, &[tag::LEARNER]),
        )
    })
    .stage("train", rep_seed)?;
    let (_, t_pred) =
        clock(|| model.predict(features.select(Axis(0), &split.query).view())).stage("predict", rep_seed)?;
    Ok([t_sim, t_raw, t_pca, t_feat, t_train, t_pred])
}

/// Training cost at a fixed `|T|` while the query set grows.
fn fixed_train(cfg: &ExperimentConfig) -> Result<Vec<TrainTiming>> {
    let t = &cfg.timing;
    let p = t.train_p;
    let rep_seed = repetition_seed(cfg.seed, p, 0);
    let scm =
        sample_scm(&cfg.simulator.scm_config(p), seed::derive(rep_seed, &[tag::SCM])).stage("simulate", rep_seed)?;
    let study = simulate_study(&scm, &cfg.design, rep_seed).stage("simulate", rep_seed)?;
    let space = PairSpace::new(p)?;
    let all: Vec<usize> = (0..space.len()).collect();
    let raw = build_raw_features(study.data.values().view(), &all, &cfg.histogram).stage("features", rep_seed)?;
    let pca = pca_fit(raw.view(), cfg.pca_dim).stage("pca", rep_seed)?;
    let features = pca.transform(raw.view()).stage("pca", rep_seed)?;
    drop(raw);
    let truth = ancestral_truth(&scm);

    // one shuffle fixes T; each query set is a prefix of the remaining pairs
    let rho = t.train_size as f64 / all.len() as f64;
    let split = sample_random_from(&all, rho, seed::derive(rep_seed, &[tag::SAMPLING]))?;
    let labels = labels_from_truth(&truth, &split.train)?;
    let set = TrainingSet::new(features.select(Axis(0), &split.train), labels, split.train.clone())?;
    let learner = timed_learner(cfg);
    let learner_seed = seed::derive(rep_seed, &[tag::LEARNER]);

    let mut rows = Vec::new();
    for &q in &t.query_sizes {
        let query = &split.query[..q.min(split.query.len())];
        let mut train_ms = Vec::new();
        let mut predict_ms = Vec::new();
        for _ in 0..t.repeats {
            let (model, t_train) =
                clock(|| train(learner, &set, &cfg.learner_params, learner_seed)).stage("train", rep_seed)?;
            let (_, t_pred) =
                clock(|| model.predict(features.select(Axis(0), query).view())).stage("predict", rep_seed)?;
            train_ms.push(t_train);
            predict_ms.push(t_pred);
        }
        let (train_mean_ms, train_min_ms) = mean_min(&train_ms);
        rows.push(TrainTiming {
            p,
            train_size: set.len(),
            query_size: query.len(),
            train_mean_ms,
            train_min_ms,
            predict_mean_ms: mean_min(&predict_ms).0,
        });
    }
    Ok(rows)
}

/// Per-stage wall-clock table over the configured `p` list, plus the
/// fixed-`|T|` training measurement.
pub fn run_timing(cfg: &ExperimentConfig) -> Result<TimingReport> {
    cfg.validate()?;
    let mut stages = Vec::new();
    let mut total_ms_at_max_p = 0.0;
    let p_max = cfg.p.iter().copied().max().unwrap_or(0);
    for &p in &cfg.p {
        let mut samples: Vec<[f64; 6]> = Vec::new();
        for rep in 0..cfg.timing.repeats {
            log::info!("timing: p = {p}, repeat {rep}");
            samples.push(pipeline_pass(cfg, p, rep)?);
        }
        for (s, name) in STAGES.iter().enumerate() {
            let v: Vec<f64> = samples.iter().map(|t| t[s]).collect();
            let (mean_ms, min_ms) = mean_min(&v);
            stages.push(StageTimes {
                p,
                pairs: p * (p - 1),
                stage: name.to_string(),
                mean_ms,
                min_ms,
            });
        }
        if p == p_max {
            total_ms_at_max_p = samples.iter().map(|t| t.iter().sum::<f64>()).sum::<f64>() / samples.len() as f64;
        }
    }
    Ok(TimingReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        learner: match timed_learner(cfg) {
            Learner::L1 => Method::L1.name().to_string(),
            Learner::Nn => Method::Nn.name().to_string(),
        },
        stages,
        fixed_train: fixed_train(cfg)?,
        total_ms_at_max_p,
    })
}

/// Writes `timing_stages.csv`, `timing_train.csv` and `timing.json`.
pub fn write_timing(report: &TimingReport, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let head = format!(
        "# config_hash={} seed={}\n",
        fingerprint::hex(report.config_hash),
        report.seed
    );

    let mut s = std::io::BufWriter::new(std::fs::File::create(dir.join("timing_stages.csv"))?);
    s.write_all(head.as_bytes())?;
    writeln!(s, "p,pairs,stage,mean_ms,min_ms")?;
    for r in &report.stages {
        writeln!(s, "{},{},{},{},{}", r.p, r.pairs, r.stage, r.mean_ms, r.min_ms)?;
    }
    s.flush()?;

    let mut t = std::io::BufWriter::new(std::fs::File::create(dir.join("timing_train.csv"))?);
    t.write_all(head.as_bytes())?;
    writeln!(t, "p,train_size,query_size,train_mean_ms,train_min_ms,predict_mean_ms")?;
    for r in &report.fixed_train {
        writeln!(
            t,
            "{},{},{},{},{},{}",
            r.p, r.train_size, r.query_size, r.train_mean_ms, r.train_min_ms, r.predict_mean_ms
        )?;
    }
    t.flush()?;

    std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{ExperimentKind, TimingConfig};

    #[test]
    fn small_timing_run_reports_every_stage() {
        let mut cfg = ExperimentConfig {
            experiment: ExperimentKind::Timing,
            p: vec![25, 30],
            pca_dim: 8,
            ..ExperimentConfig::default()
        };
        cfg.design.n_train_test = 6;
        cfg.design.n_calibration = 4;
        cfg.design.n_nuisance = 3;
        cfg.design.n_obs = 60;
        cfg.simulator.expected_degree = 3.0;
        cfg.learner_params.l1.n_lambda = 5;
        cfg.timing = TimingConfig {
            repeats: 1,
            train_p: 30,
            train_size: 200,
            query_sizes: vec![50, 500],
        };
        let report = run_timing(&cfg).unwrap();
        assert_eq!(report.stages.len(), 2 * STAGES.len());
        assert_eq!(report.stage(30, "pca").unwrap().pairs, 870);
        assert!(report.stages.iter().all(|s| s.min_ms >= 0.0 && s.min_ms <= s.mean_ms));
        assert_eq!(report.fixed_train.len(), 2);
        assert_eq!(report.fixed_train[1].query_size, 500);
        assert!(report.total_ms_at_max_p > 0.0);
        let dir = tempfile::tempdir().unwrap();
        write_timing(&report, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("timing_stages.csv")).unwrap();
        assert!(text.starts_with("# config_hash="));
    }
}
