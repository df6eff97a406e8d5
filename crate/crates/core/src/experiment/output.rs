use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::ExperimentOutput;
use crate::error::Result;
use crate::evaluate::{average_roc, mean_se, RocCurve};
use crate::fingerprint;

/// Mean and standard error of the AUC for one case over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub p: usize,
    pub rho: f64,
    pub method: String,
    pub param: Option<f64>,
    pub n: usize,
    pub auc_mean: f64,
    pub auc_se: f64,
}

type CaseKey = (usize, u64, String, Option<u64>);

fn key_of(out: &ExperimentOutput, i: usize) -> CaseKey {
    let r = &out.cases[i].record;
    (r.p, r.rho.to_bits(), r.method.clone(), r.param.map(f64::to_bits))
}

/// Case indices grouped by everything except the repetition, in first-seen order.
fn groups(out: &ExperimentOutput) -> Vec<Vec<usize>> {
    let mut order: Vec<CaseKey> = Vec::new();
    let mut members: BTreeMap<CaseKey, Vec<usize>> = BTreeMap::new();
    for i in 0..out.cases.len() {
        let key = key_of(out, i);
        if !members.contains_key(&key) {
            order.push(key.clone());
        }
        members.entry(key).or_default().push(i);
    }
    order
        .into_iter()
        .map(|k| members.remove(&k).unwrap_or_default())
        .collect()
}

pub fn summarize(out: &ExperimentOutput) -> Vec<SummaryRow> {
    groups(out)
        .into_iter()
        .map(|idx| {
            let aucs: Vec<f64> = idx.iter().map(|&i| out.cases[i].record.auc).collect();
            let (auc_mean, auc_se) = mean_se(&aucs);
            let r = &out.cases[idx[0]].record;
            SummaryRow {
                experiment: r.experiment.clone(),
                p: r.p,
                rho: r.rho,
                method: r.method.clone(),
                param: r.param,
                n: aucs.len(),
                auc_mean,
                auc_se,
            }
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn stamp<W: Write>(w: &mut W, config_hash: u64, seed: u64) -> Result<()> {
    writeln!(w, "# config_hash={} seed={seed}", fingerprint::hex(config_hash))?;
    Ok(())
}

/// Writes `config.json`, `metrics.jsonl`, `summary.csv`, per-case ROC
/// curves under `roc/`, averaged curves under `roc_avg/` and, if kept,
/// models and graphs. Every file records the config hash and seed.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    let hash = out.config_hash;
    let master = out.config.seed;
    fs::create_dir_all(dir.join("roc"))?;
    fs::create_dir_all(dir.join("roc_avg"))?;

    fs::write(dir.join("config.json"), out.config.to_json() + "\n")?;

    let mut metrics = create(&dir.join("metrics.jsonl"))?;
    for r in out.records() {
        serde_json::to_writer(&mut metrics, &r)?;
        writeln!(metrics)?;
    }
    metrics.flush()?;

    let mut summary = create(&dir.join("summary.csv"))?;
    stamp(&mut summary, hash, master)?;
    writeln!(summary, "experiment,p,rho,method,param,n,auc_mean,auc_se")?;
    for s in summarize(out) {
        let param = s.param.map(|f| f.to_string()).unwrap_or_default();
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            s.experiment, s.p, s.rho, s.method, param, s.n, s.auc_mean, s.auc_se
        )?;
    }
    summary.flush()?;

    for case in &out.cases {
        let mut w = create(&dir.join("roc").join(format!("{}.csv", case.stem())))?;
        stamp(&mut w, hash, case.record.seed)?;
        case.roc.write_csv(&mut w)?;
        w.flush()?;
    }
    for idx in groups(out) {
        let curves: Vec<RocCurve> = idx.iter().map(|&i| out.cases[i].roc.clone()).collect();
        let avg = average_roc(&curves, out.config.roc_grid_points)?;
        let stem = out.cases[idx[0]].stem();
        let stem = stem.rsplit_once("_rep").map_or(stem.as_str(), |(s, _)| s);
        let mut w = create(&dir.join("roc_avg").join(format!("{stem}.csv")))?;
        stamp(&mut w, hash, master)?;
        avg.write_csv(&mut w)?;
        w.flush()?;
    }

    if out.cases.iter().any(|c| c.model.is_some()) {
        fs::create_dir_all(dir.join("models"))?;
    }
    if out.cases.iter().any(|c| c.graph.is_some()) {
        fs::create_dir_all(dir.join("graphs"))?;
    }
    for case in &out.cases {
        if let Some(m) = &case.model {
            let mut w = create(&dir.join("models").join(format!("{}.bin", case.stem())))?;
            m.write_binary(&mut w)?;
            w.flush()?;
        }
        if let Some(g) = &case.graph {
            let mut w = create(&dir.join("graphs").join(format!("{}.csv", case.stem())))?;
            g.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
