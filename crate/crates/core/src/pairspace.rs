//! Linear indexing of ordered variable pairs, background-knowledge labels,
//! train/query sampling schemes and label-perturbation protocols.
//!
//! Pairs are ordered row-major over the source variable with the diagonal
//! removed: `k(i, j) = i·(p−1) + (j if j < i else j−1)`.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::seed;

pub fn linear_index(i: usize, j: usize, p: usize) -> Result<usize> {
    if i >= p || j >= p {
        return domain(format!("pair ({i}, {j}) out of range for p = {p}"));
    }
    if i == j {
        return domain(format!("diagonal pair ({i}, {i}) has no linear index"));
    }
    Ok(i * (p - 1) + if j < i { j } else { j - 1 })
}

pub fn pair_of(k: usize, p: usize) -> Result<(usize, usize)> {
    if p < 2 || k >= p * (p - 1) {
        return domain(format!("linear index {k} out of range for p = {p}"));
    }
    let i = k / (p - 1);
    let r = k % (p - 1);
    Ok((i, if r < i { r } else { r + 1 }))
}

/// All ordered pairs `(i, j)`, `i ≠ j`, over `p` variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpace {
    p: usize,
}

impl PairSpace {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return domain(format!("a pair space needs at least 2 variables, got {p}"));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Total pair count `K = p·(p−1)`.
    pub fn len(&self) -> usize {
        self.p * (self.p - 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> Result<usize> {
        linear_index(i, j, self.p)
    }

    pub fn pair(&self, k: usize) -> Result<(usize, usize)> {
        pair_of(k, self.p)
    }

    /// Unchecked inverse for indices already known to be valid.
    pub(crate) fn pair_unchecked(&self, k: usize) -> (usize, usize) {
        let i = k / (self.p - 1);
        let r = k % (self.p - 1);
        (i, if r < i { r } else { r + 1 })
    }

    /// The contiguous block of indices whose source variable is `i`.
    pub fn source_block(&self, i: usize) -> std::ops::Range<usize> {
        i * (self.p - 1)..(i + 1) * (self.p - 1)
    }

    /// Every pair whose source is one of `sources`, in source order.
    pub fn pairs_from(&self, sources: &[usize]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(sources.len() * (self.p - 1));
        for &i in sources {
            if i >= self.p {
                return domain(format!("source {i} out of range for p = {}", self.p));
            }
            out.extend(self.source_block(i));
        }
        Ok(out)
    }
}

/// Training pairs `T` and query pairs `Q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSplit {
    pub train: Vec<usize>,
    pub query: Vec<usize>,
}

impl PairSplit {
    pub fn check_disjoint(&self) -> Result<()> {
        let train: HashSet<usize> = self.train.iter().copied().collect();
        if let Some(k) = self.query.iter().find(|k| train.contains(k)) {
            return domain(format!("pair {k} appears in both the training and query sets"));
        }
        Ok(())
    }
}

/// Background knowledge: labels on the training pairs plus the query set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundKnowledge {
    pub p: usize,
    pub train: Vec<usize>,
    pub labels: Vec<u8>,
    pub query: Vec<usize>,
}

impl BackgroundKnowledge {
    pub fn new(p: usize, train: Vec<usize>, labels: Vec<u8>, query: Vec<usize>) -> Result<Self> {
        let space = PairSpace::new(p)?;
        if train.len() != labels.len() {
            return Err(Error::Dimension {
                context: "background labels",
                expected: train.len(),
                got: labels.len(),
            });
        }
        if let Some(&k) = train.iter().chain(&query).find(|&&k| k >= space.len()) {
            return domain(format!("pair index {k} out of range for K = {}", space.len()));
        }
        if labels.iter().any(|&y| y > 1) {
            return domain("labels must be 0 or 1");
        }
        let split = PairSplit { train, query };
        split.check_disjoint()?;
        Ok(Self {
            p,
            train: split.train,
            labels,
            query: split.query,
        })
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}

/// `y_k = truth[i(k), j(k)]` for each `k` in `train`.
pub fn labels_from_truth(truth: &Array2<u8>, train: &[usize]) -> Result<Vec<u8>> {
    let p = truth.nrows();
    if truth.ncols() != p {
        return Err(Error::Dimension {
            context: "truth matrix columns",
            expected: p,
            got: truth.ncols(),
        });
    }
    if (0..p).any(|i| truth[[i, i]] != 0) {
        return domain("truth matrix must have a zero diagonal");
    }
    train
        .iter()
        .map(|&k| pair_of(k, p).map(|(i, j)| truth[[i, j]].min(1)))
        .collect()
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn count_ceil(fraction: f64, n: usize) -> usize {
    // guards against 0.1·50 = 5.000000000000001 style overshoot
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Random split of the full pair space with `|T| = round(rho·K)`.
pub fn sample_random(space: PairSpace, rho: f64, seed: u64) -> Result<PairSplit> {
    let universe: Vec<usize> = (0..space.len()).collect();
    sample_random_from(&universe, rho, seed)
}

/// Random split of an arbitrary pair universe; both halves come back sorted.
pub fn sample_random_from(universe: &[usize], rho: f64, seed: u64) -> Result<PairSplit> {
    if !(rho > 0.0 && rho < 1.0) {
        return domain(format!("rho must lie in (0, 1), got {rho}"));
    }
    let m = round_half_up(rho * universe.len() as f64).min(universe.len());
    let mut shuffled = universe.to_vec();
    shuffled.shuffle(&mut seed::rng(seed));
    let mut query = shuffled.split_off(m);
    let mut train = shuffled;
    train.sort_unstable();
    query.sort_unstable();
    Ok(PairSplit { train, query })
}

/// Intervention-wise split: train on every pair whose source is one of
/// `n_train` randomly chosen intervened variables, query the pairs of the
/// remaining intervened variables.
///
/// Returns the chosen training interventions (sorted) and the split.
pub fn sample_interventionwise(
    space: PairSpace,
    interventions: &[usize],
    n_train: usize,
    seed: u64,
) -> Result<(Vec<usize>, PairSplit)> {
    if n_train == 0 || n_train >= interventions.len() {
        return domain(format!("n_train must lie in 1..{}, got {n_train}", interventions.len()));
    }
    let distinct: HashSet<usize> = interventions.iter().copied().collect();
    if distinct.len() != interventions.len() {
        return domain("intervention targets must be distinct");
    }
    let mut shuffled = interventions.to_vec();
    shuffled.sort_unstable();
    shuffled.shuffle(&mut seed::rng(seed));
    let mut held_out = shuffled.split_off(n_train);
    let mut chosen = shuffled;
    chosen.sort_unstable();
    held_out.sort_unstable();
    let split = PairSplit {
        train: space.pairs_from(&chosen)?,
        query: space.pairs_from(&held_out)?,
    };
    Ok((chosen, split))
}

/// Which training labels were flipped. Entries are positions in the label vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPlan {
    /// Positives flipped to 0.
    pub flipped_to_zero: Vec<usize>,
    /// Negatives flipped to 1.
    pub flipped_to_one: Vec<usize>,
    pub fraction: f64,
}

impl PerturbationPlan {
    /// All perturbed positions, sorted.
    pub fn positions(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .flipped_to_zero
            .iter()
            .chain(&self.flipped_to_one)
            .copied()
            .collect();
        all.sort_unstable();
        all
    }
}

fn positions_with(labels: &[u8], value: u8) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|(_, &y)| y == value)
        .map(|(t, _)| t)
        .collect()
}

fn choose_sorted(from: &[usize], m: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, from.len(), m)
        .into_iter()
        .map(|t| from[t])
        .collect();
    picked.sort_unstable();
    picked
}

/// Swaps `⌊f·|T⁽¹⁾|⌋` positives with as many negatives, keeping the label
/// mean fixed.
pub fn perturb_labels(labels: &[u8], fraction: f64, seed: u64) -> Result<(Vec<u8>, PerturbationPlan)> {
    if !(0.0..=1.0).contains(&fraction) {
        return domain(format!("perturbation fraction must lie in [0, 1], got {fraction}"));
    }
    let pos = positions_with(labels, 1);
    let neg = positions_with(labels, 0);
    if pos.len() + neg.len() != labels.len() {
        return domain("labels must be 0 or 1");
    }
    let m = (fraction * pos.len() as f64 + 1e-9).floor() as usize;
    if neg.len() < m {
        return domain(format!(
            "cannot balance {m} flipped positives with only {} negatives",
            neg.len()
        ));
    }
    let mut rng = seed::rng(seed);
    let flipped_to_zero = choose_sorted(&pos, m, &mut rng);
    let flipped_to_one = choose_sorted(&neg, m, &mut rng);
    let mut out = labels.to_vec();
    for &t in &flipped_to_zero {
        out[t] = 0;
    }
    for &t in &flipped_to_one {
        out[t] = 1;
    }
    Ok((
        out,
        PerturbationPlan {
            flipped_to_zero,
            flipped_to_one,
            fraction,
        },
    ))
}

/// Keeps a random `⌈g·|T⁽¹⁾|⌉` of the positives and marks everything else 0.
pub fn sparsify_positives(labels: &[u8], fraction: f64, seed: u64) -> Result<Vec<u8>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return domain(format!("positive fraction must lie in (0, 1], got {fraction}"));
    }
    let pos = positions_with(labels, 1);
    let m = count_ceil(fraction, pos.len()).min(pos.len());
    let keep = choose_sorted(&pos, m, &mut seed::rng(seed));
    let mut out = vec![0u8; labels.len()];
    for t in keep {
        out[t] = 1;
    }
    Ok(out)
}

/// Control for [`sparsify_positives`]: the same number of ones, placed
/// uniformly at random over all training positions.
pub fn random_positives(labels: &[u8], fraction: f64, seed: u64) -> Result<Vec<u8>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return domain(format!("positive fraction must lie in (0, 1], got {fraction}"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let m = count_ceil(fraction, n_pos).min(labels.len());
    let all: Vec<usize> = (0..labels.len()).collect();
    let chosen = choose_sorted(&all, m, &mut seed::rng(seed));
    let mut out = vec![0u8; labels.len()];
    for t in chosen {
        out[t] = 1;
    }
    Ok(out)
}

/// A serialized pair set: one `k,i,j,label` line per pair, `-` for
/// unlabeled pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTable {
    pub p: usize,
    pub seed: u64,
    pub pairs: Vec<usize>,
    pub labels: Option<Vec<u8>>,
}

const PAIR_TABLE_MAGIC: &str = "# ancestral-pairs v1";

impl PairTable {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(labels) = &self.labels {
            if labels.len() != self.pairs.len() {
                return Err(Error::Dimension {
                    context: "pair table labels",
                    expected: self.pairs.len(),
                    got: labels.len(),
                });
            }
        }
        writeln!(w, "{PAIR_TABLE_MAGIC}")?;
        writeln!(w, "# p={} seed={}", self.p, self.seed)?;
        writeln!(w, "k,i,j,label")?;
        for (t, &k) in self.pairs.iter().enumerate() {
            let (i, j) = pair_of(k, self.p)?;
            match &self.labels {
                Some(l) => writeln!(w, "{k},{i},{j},{}", l[t])?,
                None => writeln!(w, "{k},{i},{j},-")?,
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format("truncated pair table".into()))?
                .map_err(Error::from)
        };
        if next()?.trim() != PAIR_TABLE_MAGIC {
            return Err(Error::Format("missing pair table magic line".into()));
        }
        let meta = next()?;
        let mut p = None;
        let mut seed = None;
        for field in meta.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("p", v)) => p = v.parse::<usize>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                _ => {}
            }
        }
        let (p, seed) = p
            .zip(seed)
            .ok_or_else(|| Error::Format(format!("bad pair table header: {meta}")))?;
        if next()?.trim() != "k,i,j,label" {
            return Err(Error::Format("missing pair table column header".into()));
        }
        let mut pairs = Vec::new();
        let mut labels = Vec::new();
        let mut any_unlabeled = false;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Format(format!("expected 4 fields: {line}")));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad integer {s:?} in {line}")))
            };
            let (k, i, j) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
            if linear_index(i, j, p)? != k {
                return Err(Error::Format(format!("pair ({i}, {j}) does not match index {k}")));
            }
            pairs.push(k);
            match fields[3].trim() {
                "-" => any_unlabeled = true,
                "0" => labels.push(0),
                "1" => labels.push(1),
                other => return Err(Error::Format(format!("bad label {other:?}"))),
            }
        }
        let labels = if any_unlabeled {
            if !labels.is_empty() {
                return Err(Error::Format("pair table mixes labeled and unlabeled rows".into()));
            }
            None
        } else {
            Some(labels)
        };
        Ok(Self { p, seed, pairs, labels })
    }
}
