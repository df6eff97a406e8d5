//! The estimated ancestral graph: a `p × p` score matrix with per-entry
//! provenance.

use std::io::{BufRead, Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::binio;
use crate::error::{domain, Error, Result};
use crate::pairspace::{PairSpace, PairSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Copied from the supplied labels.
    Background,
    /// Output of the fitted classifier.
    Predicted,
    Undefined,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Background => "background",
            Provenance::Predicted => "predicted",
            Provenance::Undefined => "undefined",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Provenance::Background),
            1 => Ok(Provenance::Predicted),
            2 => Ok(Provenance::Undefined),
            _ => Err(Error::Format(format!("bad provenance code {c}"))),
        }
    }
}

/// Entry `(i, j)` is the belief that `i` is an ancestor of `j`. Entries
/// are stored by linear pair index; the diagonal does not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct AncestralGraph {
    space: PairSpace,
    scores: Vec<f64>,
    provenance: Vec<Provenance>,
    pub config_hash: u64,
    pub seed: u64,
}

fn check_score(k: usize, s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return domain(format!("score {s} for pair {k} is outside [0, 1]"));
    }
    Ok(())
}

impl AncestralGraph {
    fn empty(p: usize) -> Result<Self> {
        let space = PairSpace::new(p)?;
        Ok(Self {
            space,
            scores: vec![f64::NAN; space.len()],
            provenance: vec![Provenance::Undefined; space.len()],
            config_hash: 0,
            seed: 0,
        })
    }

    /// Graph with a predicted score for every pair, in linear order.
    pub fn from_scores(p: usize, scores: &[f64]) -> Result<Self> {
        assemble_corrected(scores, p)
    }

    pub fn with_meta(mut self, config_hash: u64, seed: u64) -> Self {
        self.config_hash = config_hash;
        self.seed = seed;
        self
    }

    pub fn p(&self) -> usize {
        self.space.p()
    }

    pub fn score(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.space.index(i, j).ok()?;
        let s = self.scores[k];
        (self.provenance[k] != Provenance::Undefined).then_some(s)
    }

    pub fn provenance(&self, i: usize, j: usize) -> Option<Provenance> {
        self.space.index(i, j).ok().map(|k| self.provenance[k])
    }

    /// Score of linear pair `k` (NaN when undefined).
    pub fn score_at(&self, k: usize) -> f64 {
        self.scores[k]
    }

    pub fn scores_of(&self, pairs: &[usize]) -> Vec<f64> {
        pairs.iter().map(|&k| self.scores[k]).collect()
    }

    /// Dense `p × p` matrix with NaN on the diagonal and undefined entries.
    pub fn to_dense(&self) -> Array2<f64> {
        let p = self.p();
        let mut out = Array2::from_elem((p, p), f64::NAN);
        for k in 0..self.space.len() {
            let (i, j) = self.space.pair_unchecked(k);
            out[[i, j]] = self.scores[k];
        }
        out
    }

    /// Edge list `i,j,score,provenance` over defined entries.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# ancestral-graph v1 p={} config_hash={:016x} seed={}",
            self.p(),
            self.config_hash,
            self.seed
        )?;
        writeln!(w, "i,j,score,provenance")?;
        for k in 0..self.space.len() {
            if self.provenance[k] == Provenance::Undefined {
                continue;
            }
            let (i, j) = self.space.pair_unchecked(k);
            writeln!(w, "{i},{j},{},{}", self.scores[k], self.provenance[k].as_str())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let head = lines.next().ok_or_else(|| Error::Format("empty graph file".into()))??;
        let field = |name: &str| -> Result<&str> {
            head.split_whitespace()
                .find_map(|tok| tok.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| Error::Format(format!("graph header lacks {name}")))
        };
        let p: usize = field("p")?.parse().map_err(|_| Error::Format("bad p".into()))?;
        let hash = u64::from_str_radix(field("config_hash")?, 16).map_err(|_| Error::Format("bad hash".into()))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| Error::Format("bad seed".into()))?;
        let mut g = Self::empty(p)?.with_meta(hash, seed);
        lines.next();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Format(format!("bad graph row {line:?}")));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad index {s:?}")))
            };
            let k = g.space.index(parse(f[0])?, parse(f[1])?)?;
            g.scores[k] = f[2]
                .parse()
                .map_err(|_| Error::Format(format!("bad score {:?}", f[2])))?;
            g.provenance[k] = match f[3] {
                "background" => Provenance::Background,
                "predicted" => Provenance::Predicted,
                other => return Err(Error::Format(format!("bad provenance {other:?}"))),
            };
        }
        Ok(g)
    }

    /// Dense little-endian layout: magic, version, p, hash, seed, then
    /// `p·(p−1)` scores in linear pair order and one provenance byte each.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        binio::write_magic(&mut w, GRAPH_MAGIC, GRAPH_VERSION)?;
        binio::write_u64(&mut w, self.p() as u64)?;
        binio::write_u64(&mut w, self.config_hash)?;
        binio::write_u64(&mut w, self.seed)?;
        binio::write_f64s(&mut w, self.scores.iter().copied())?;
        let codes: Vec<u8> = self.provenance.iter().map(|p| p.code()).collect();
        w.write_all(&codes)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let version = binio::read_magic(&mut r, GRAPH_MAGIC)?;
        if version != GRAPH_VERSION {
            return Err(Error::Format(format!("unsupported graph version {version}")));
        }
        let p = binio::read_len(&mut r, 1 << 20)?;
        let hash = binio::read_u64(&mut r)?;
        let seed = binio::read_u64(&mut r)?;
        let mut g = Self::empty(p)?.with_meta(hash, seed);
        g.scores = binio::read_f64s(&mut r, g.space.len())?;
        let mut codes = vec![0u8; g.space.len()];
        r.read_exact(&mut codes)?;
        g.provenance = codes.into_iter().map(Provenance::from_code).collect::<Result<_>>()?;
        Ok(g)
    }
}

const GRAPH_MAGIC: &[u8; 8] = b"ANCGRAPH";
const GRAPH_VERSION: u32 = 1;

/// Standard assembly: training pairs carry their labels unchanged, query
/// pairs carry the classifier scores (`query_scores[t]` belongs to
/// `split.query[t]`).
pub fn assemble(split: &PairSplit, labels: &[u8], query_scores: &[f64], p: usize) -> Result<AncestralGraph> {
    let mut g = AncestralGraph::empty(p)?;
    split.check_disjoint()?;
    if labels.len() != split.train.len() {
        return Err(Error::Dimension {
            context: "training labels",
            expected: split.train.len(),
            got: labels.len(),
        });
    }
    if query_scores.len() != split.query.len() {
        return Err(Error::Dimension {
            context: "query scores",
            expected: split.query.len(),
            got: query_scores.len(),
        });
    }
    for (&k, &y) in split.train.iter().zip(labels) {
        if k >= g.space.len() || y > 1 {
            return domain(format!("bad training entry (k = {k}, label = {y})"));
        }
        g.scores[k] = f64::from(y);
        g.provenance[k] = Provenance::Background;
    }
    for (&k, &s) in split.query.iter().zip(query_scores) {
        if k >= g.space.len() {
            return domain(format!("query pair {k} out of range"));
        }
        check_score(k, s)?;
        g.scores[k] = s;
        g.provenance[k] = Provenance::Predicted;
    }
    Ok(g)
}

/// Error-correcting assembly: every entry is the classifier score.
pub fn assemble_corrected(scores: &[f64], p: usize) -> Result<AncestralGraph> {
    let mut g = AncestralGraph::empty(p)?;
    if scores.len() != g.space.len() {
        return Err(Error::Dimension {
            context: "scores over all pairs",
            expected: g.space.len(),
            got: scores.len(),
        });
    }
    for (k, &s) in scores.iter().enumerate() {
        check_score(k, s)?;
    }
    g.scores = scores.to_vec();
    g.provenance = vec![Provenance::Predicted; scores.len()];
    Ok(g)
}
