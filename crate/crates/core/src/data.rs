//! The n×p data matrix shared by the simulator, featurizer and baselines.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{domain, Error, Result};

/// Samples (rows) of `p` observed variables, each tagged with the variable
/// it was intervened on, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    targets: Vec<Option<usize>>,
    names: Vec<String>,
}

pub fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("V{i}")).collect()
}

impl DataMatrix {
    pub fn new(values: Array2<f64>, targets: Vec<Option<usize>>) -> Result<Self> {
        let p = values.ncols();
        Self::with_names(values, targets, default_names(p))
    }

    pub fn with_names(values: Array2<f64>, targets: Vec<Option<usize>>, names: Vec<String>) -> Result<Self> {
        let (n, p) = values.dim();
        if targets.len() != n {
            return Err(Error::Dimension {
                context: "intervention metadata rows",
                expected: n,
                got: targets.len(),
            });
        }
        if names.len() != p {
            return Err(Error::Dimension {
                context: "variable names",
                expected: p,
                got: names.len(),
            });
        }
        if let Some(t) = targets.iter().flatten().find(|&&t| t >= p) {
            return domain(format!("intervention target {t} out of range for p = {p}"));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { values, targets, names })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn targets(&self) -> &[Option<usize>] {
        &self.targets
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Stacks `other` below `self`.
    pub fn concat(&self, other: &DataMatrix) -> Result<DataMatrix> {
        if other.p() != self.p() {
            return Err(Error::Dimension {
                context: "concatenated data columns",
                expected: self.p(),
                got: other.p(),
            });
        }
        let values = ndarray::concatenate(Axis(0), &[self.values.view(), other.values.view()])
            .map_err(|e| Error::Format(e.to_string()))?;
        let targets = self.targets.iter().chain(&other.targets).copied().collect();
        Ok(DataMatrix {
            values,
            targets,
            names: self.names.clone(),
        })
    }

    /// Keeps only the listed variables, in the given order. Intervention
    /// tags pointing at dropped variables become `None`.
    pub fn select_columns(&self, keep: &[usize]) -> Result<DataMatrix> {
        if let Some(&c) = keep.iter().find(|&&c| c >= self.p()) {
            return domain(format!("column {c} out of range for p = {}", self.p()));
        }
        let remap: HashMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let values = self.values.select(Axis(1), keep);
        let targets = self
            .targets
            .iter()
            .map(|t| t.and_then(|t| remap.get(&t).copied()))
            .collect();
        let names = keep.iter().map(|&c| self.names[c].clone()).collect();
        Ok(DataMatrix { values, targets, names })
    }

    /// CSV with a header of variable names plus an `intervention` column
    /// holding `none` or the target's name. The reader skips leading `#`
    /// comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},intervention", self.names.join(","))?;
        for (row, target) in self.values.rows().into_iter().zip(&self.targets) {
            let mut line = String::new();
            for v in row {
                line.push_str(&v.to_string());
                line.push(',');
            }
            match target {
                Some(t) => line.push_str(&self.names[*t]),
                None => line.push_str("none"),
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().peekable();
        // leading `#` lines carry provenance and are skipped
        while let Some(Ok(line)) = lines.peek() {
            if !line.starts_with('#') {
                break;
            }
            lines.next();
        }
        let header = lines.next().ok_or_else(|| Error::Format("empty data file".into()))??;
        let mut names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if names.pop().as_deref() != Some("intervention") {
            return Err(Error::Format("last column must be `intervention`".into()));
        }
        let p = names.len();
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut flat = Vec::new();
        let mut targets = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != p + 1 {
                return Err(Error::Format(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 1,
                    fields.len(),
                    p + 1
                )));
            }
            for f in &fields[..p] {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad number {f:?} on row {}", lineno + 1)))?;
                flat.push(v);
            }
            let tag = fields[p].trim();
            targets.push(if tag == "none" {
                None
            } else {
                Some(
                    *index
                        .get(tag)
                        .ok_or_else(|| Error::Format(format!("unknown intervention target {tag:?}")))?,
                )
            });
        }
        let values = Array2::from_shape_vec((targets.len(), p), flat).map_err(|e| Error::Format(e.to_string()))?;
        Self::with_names(values, targets, names)
    }
}
