use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use ancestral::classify::{train, ClassifierModel, TrainingSet};
use ancestral::data::DataMatrix;
use ancestral::evaluate::{auc, correlation_scores, roc};
use ancestral::experiment::{
    featurize_all, run_experiment, run_timing, simulate_labeled, split_pairs, summarize, write_outputs, write_timing,
    ExperimentConfig, Method,
};
use ancestral::featurize::{FeatureMatrix, PcaModel};
use ancestral::fingerprint;
use ancestral::graph::{assemble, AncestralGraph, Provenance};
use ancestral::pairspace::{labels_from_truth, pair_of, PairSplit, PairTable};
use ancestral::seed::{self, tag};
use ancestral::Error;

use crate::{Command, Common};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// 2 when any error in the chain is a configuration error, 3 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    let config = e.chain().any(|c| match c.downcast_ref::<Error>() {
        Some(Error::Config(_)) => true,
        Some(Error::Stage { source, .. }) => matches!(**source, Error::Config(_)),
        _ => false,
    });
    if config {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

/// The config file (or defaults) with command-line overrides applied, validated.
fn load_config(common: &Common, p: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(name) = &common.learner {
        let m = Method::parse(name).ok_or_else(|| config_error(format!("unknown learner `{name}`")))?;
        cfg.learners = vec![m];
    }
    if let Some(p) = p {
        cfg.p = vec![p];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(config_error("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn or_default(path: &Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    path.clone().unwrap_or_else(|| out.join(name))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn stamp(w: &mut impl Write, config_hash: u64, seed: u64) -> Result<()> {
    writeln!(w, "# config_hash={} seed={seed}", fingerprint::hex(config_hash))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_table(path: &Path, table: &PairTable) -> Result<()> {
    let mut w = create(path)?;
    table.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_table(path: &Path) -> Result<PairTable> {
    PairTable::read(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_data(path: &Path) -> Result<DataMatrix> {
    DataMatrix::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// The single method a pipeline stage runs.
fn single_method(cfg: &ExperimentConfig) -> Method {
    cfg.learners[0]
}

pub fn run(common: Common, command: Command) -> Result<()> {
    set_threads(common.threads)?;
    let out = common.out.clone();
    match command {
        Command::Simulate { p, rep } => simulate(&load_config(&common, p)?, rep, &out),
        Command::Featurize { data } => {
            featurize(&load_config(&common, None)?, &or_default(&data, &out, "data.csv"), &out)
        }
        Command::Train { features, pca, pairs } => train_model(
            &load_config(&common, None)?,
            &or_default(&features, &out, "features.bin"),
            &or_default(&pca, &out, "pca.bin"),
            &or_default(&pairs, &out, "train.csv"),
            &out,
        ),
        Command::Predict {
            model,
            data,
            pairs,
            background,
        } => {
            let background = background.or_else(|| Some(out.join("train.csv")).filter(|p| p.exists()));
            predict(
                &load_config(&common, None)?,
                &or_default(&model, &out, "model.bin"),
                &or_default(&data, &out, "data.csv"),
                &or_default(&pairs, &out, "query.csv"),
                background.as_deref(),
                &out,
            )
        }
        Command::Eval { graph, truth } => evaluate(
            &or_default(&graph, &out, "graph.bin"),
            &or_default(&truth, &out, "truth.csv"),
            &out,
        ),
        Command::Experiment => experiment(&load_config(&common, None)?, &out),
        Command::Timing => timing(&load_config(&common, None)?, &out),
    }
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    config_hash: String,
    seed: u64,
    p: usize,
    rep: usize,
    /// Original indices of the variables kept in `data.csv`.
    kept: &'a [usize],
    interventions: &'a [usize],
    train_pairs: usize,
    query_pairs: usize,
}

fn simulate(cfg: &ExperimentConfig, rep: usize, out: &Path) -> Result<()> {
    let p = cfg.p[0];
    let hash = cfg.hash();
    let study = simulate_labeled(cfg, p, rep)?;
    let split = split_pairs(cfg, &study, cfg.rho)?;
    let q = study.space.p();
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), cfg.to_json() + "\n")?;
    write_json(&out.join("scm.json"), &study.scm)?;

    let mut w = create(&out.join("data.csv"))?;
    stamp(&mut w, hash, study.seed)?;
    study.data.write_csv(&mut w)?;
    w.flush()?;

    let table = |pairs: &[usize], labeled: bool| -> Result<PairTable> {
        Ok(PairTable {
            p: q,
            seed: study.seed,
            pairs: pairs.to_vec(),
            labels: if labeled {
                Some(labels_from_truth(&study.truth, pairs)?)
            } else {
                None
            },
        })
    };
    write_table(&out.join("truth.csv"), &table(&study.universe, true)?)?;
    write_table(&out.join("train.csv"), &table(&split.train, true)?)?;
    write_table(&out.join("query.csv"), &table(&split.query, false)?)?;
    write_json(
        &out.join("meta.json"),
        &SimulationMeta {
            config_hash: fingerprint::hex(hash),
            seed: study.seed,
            p,
            rep,
            kept: &study.kept,
            interventions: &study.interventions,
            train_pairs: split.train.len(),
            query_pairs: split.query.len(),
        },
    )?;
    println!(
        "simulated p = {p} ({} kept), {} labeled pairs, |T| = {}, |Q| = {} -> {}",
        q,
        study.universe.len(),
        split.train.len(),
        split.query.len(),
        out.display()
    );
    Ok(())
}

fn featurize(cfg: &ExperimentConfig, data_path: &Path, out: &Path) -> Result<()> {
    let data = read_data(data_path)?;
    let (pca, features) = featurize_all(cfg, &data)?;
    let fm = FeatureMatrix::new(data.p(), (0..features.nrows()).collect(), features, cfg.hash())?;
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("features.bin"))?;
    fm.write_binary(&mut w)?;
    w.flush()?;
    let mut w = create(&out.join("pca.bin"))?;
    pca.write_binary(&mut w)?;
    w.flush()?;
    println!(
        "featurized {} pairs into {} dimensions -> {}",
        fm.pairs.len(),
        fm.dim(),
        out.display()
    );
    Ok(())
}

fn train_model(cfg: &ExperimentConfig, features: &Path, pca: &Path, pairs: &Path, out: &Path) -> Result<()> {
    let method = single_method(cfg);
    let learner = method.learner().ok_or_else(|| {
        config_error(format!(
            "`{}` is a correlation baseline and has no training step",
            method.name()
        ))
    })?;
    let fm = FeatureMatrix::read_binary(open(features)?).with_context(|| format!("reading {}", features.display()))?;
    let pca = PcaModel::read_binary(open(pca)?).with_context(|| format!("reading {}", pca.display()))?;
    let table = read_table(pairs)?;
    let labels = table
        .labels
        .clone()
        .ok_or_else(|| anyhow::anyhow!("{} has unlabeled pairs", pairs.display()))?;
    if table.p != fm.p {
        anyhow::bail!("pair table has p = {} but the features have p = {}", table.p, fm.p);
    }
    if fm.config_hash != cfg.hash() {
        log::warn!(
            "features were built under a different config (hash {})",
            fingerprint::hex(fm.config_hash)
        );
    }
    let rows = fm.position_map();
    let idx: Vec<usize> = table
        .pairs
        .iter()
        .map(|k| {
            rows.get(k)
                .copied()
                .ok_or_else(|| anyhow::anyhow!("pair {k} has no feature row"))
        })
        .collect::<Result<_>>()?;
    let set = TrainingSet::new(fm.values.select(ndarray::Axis(0), &idx), labels, table.pairs.clone())?;
    let classifier = train(
        learner,
        &set,
        &cfg.learner_params,
        seed::derive(table.seed, &[tag::LEARNER]),
    )?;
    let model = ClassifierModel {
        classifier,
        pca,
        histogram: cfg.histogram.clone(),
        config_hash: cfg.hash(),
        seed: table.seed,
    };
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("model.bin"))?;
    model.write_binary(&mut w)?;
    w.flush()?;
    println!(
        "trained {} on {} pairs ({} positive) -> {}",
        method.name(),
        set.len(),
        table.labels.iter().flatten().filter(|&&y| y == 1).count(),
        out.display()
    );
    Ok(())
}

fn predict(
    cfg: &ExperimentConfig,
    model: &Path,
    data: &Path,
    pairs: &Path,
    background: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let data = read_data(data)?;
    let query = read_table(pairs)?;
    if query.p != data.p() {
        anyhow::bail!("pair table has p = {} but the data have p = {}", query.p, data.p());
    }
    let method = single_method(cfg);
    let scores = match method.correlation() {
        Some(c) => correlation_scores(data.values().view(), &query.pairs, c)?,
        None => {
            let model =
                ClassifierModel::read_binary(open(model)?).with_context(|| format!("reading {}", model.display()))?;
            model.predict_data(data.values().view(), &query.pairs)?
        }
    };
    let (train, labels) = match background {
        Some(path) => {
            let t = read_table(path)?;
            let labels = t
                .labels
                .ok_or_else(|| anyhow::anyhow!("{} has unlabeled pairs", path.display()))?;
            (t.pairs, labels)
        }
        None => (Vec::new(), Vec::new()),
    };
    let split = PairSplit {
        train,
        query: query.pairs.clone(),
    };
    let graph = assemble(&split, &labels, &scores, data.p())?.with_meta(cfg.hash(), query.seed);
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("graph.csv"))?;
    graph.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&out.join("graph.bin"))?;
    graph.write_binary(&mut w)?;
    w.flush()?;
    println!(
        "scored {} query pairs with {} -> {}",
        scores.len(),
        method.name(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    config_hash: String,
    seed: u64,
    pairs: usize,
    positives: usize,
    auc: f64,
}

fn evaluate(graph: &Path, truth: &Path, out: &Path) -> Result<()> {
    let graph = AncestralGraph::read_binary(open(graph)?).with_context(|| format!("reading {}", graph.display()))?;
    let truth = read_table(truth)?;
    let labels = truth
        .labels
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("truth table has unlabeled pairs"))?;
    if truth.p != graph.p() {
        anyhow::bail!("truth table has p = {} but the graph has p = {}", truth.p, graph.p());
    }
    let mut scores = Vec::new();
    let mut y = Vec::new();
    for (&k, &label) in truth.pairs.iter().zip(labels) {
        let (i, j) = pair_of(k, truth.p)?;
        if graph.provenance(i, j) == Some(Provenance::Predicted) {
            scores.push(graph.score_at(k));
            y.push(label);
        }
    }
    let report = EvalReport {
        config_hash: fingerprint::hex(graph.config_hash),
        seed: graph.seed,
        pairs: y.len(),
        positives: y.iter().filter(|&&v| v == 1).count(),
        auc: auc(&scores, &y)?,
    };
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("roc.csv"))?;
    stamp(&mut w, graph.config_hash, graph.seed)?;
    roc(&scores, &y)?.write_csv(&mut w)?;
    w.flush()?;
    write_json(&out.join("eval.json"), &report)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn experiment(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let result = run_experiment(cfg)?;
    write_outputs(&result, out)?;
    println!("experiment,p,rho,method,param,n,auc_mean,auc_se");
    for s in summarize(&result) {
        let param = s.param.map(|f| f.to_string()).unwrap_or_default();
        println!(
            "{},{},{},{},{},{},{:.4},{:.4}",
            s.experiment, s.p, s.rho, s.method, param, s.n, s.auc_mean, s.auc_se
        );
    }
    Ok(())
}

fn timing(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let report = run_timing(cfg)?;
    write_timing(&report, out)?;
    println!("p,pairs,stage,mean_ms,min_ms");
    for s in &report.stages {
        println!("{},{},{},{:.2},{:.2}", s.p, s.pairs, s.stage, s.mean_ms, s.min_ms);
    }
    for t in &report.fixed_train {
        println!(
            "fixed |T| = {}: |Q| = {} train {:.1} ms (min {:.1}), predict {:.1} ms",
            t.train_size, t.query_size, t.train_mean_ms, t.train_min_ms, t.predict_mean_ms
        );
    }
    println!("total at largest p: {:.1} ms", report.total_ms_at_max_p);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors_map_to_exit_2_even_when_wrapped() {
        assert_eq!(exit_code(&config_error("bad")), EXIT_CONFIG);
        let staged = Error::Stage {
            stage: "simulate",
            seed: 1,
            source: Box::new(Error::Config("bad".into())),
        };
        assert_eq!(exit_code(&anyhow::Error::from(staged).context("running")), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Domain("x".into()).into()), EXIT_RUNTIME);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), EXIT_RUNTIME);
    }
}
