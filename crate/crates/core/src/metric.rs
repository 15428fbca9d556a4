//! Dissimilarity between fitted context trees and labelled distance matrices.
//!
//! `divergence(T1, T2)` averages, over every context `w` of `T1` (root
//! included), the KL divergence from `T1`'s raw distribution at `w` to `T2`'s
//! smoothed distribution at the longest suffix of `w` that `T2` knows.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vlmc::ContextTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Asymmetric,
    #[default]
    Symmetric,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymmetric" => Ok(Mode::Asymmetric),
            "symmetric" => Ok(Mode::Symmetric),
            _ => Err(Error::InvalidConfig(format!(
                "mode must be `symmetric` or `asymmetric`, got `{s}`"
            ))),
        }
    }
}

pub fn divergence(t1: &ContextTree, t2: &ContextTree) -> Result<f64> {
    if t1.alphabet() != t2.alphabet() {
        return Err(Error::AlphabetMismatch(
            t1.alphabet().size(),
            t2.alphabet().size(),
        ));
    }
    let n = t1.alphabet().size();
    let total: f64 = t1
        .nodes()
        .iter()
        .map(|w| {
            if w.count() == 0 {
                return 0.0;
            }
            let p = t2.context_lookup(w.context());
            let kl: f64 = w
                .child_counts()
                .iter()
                .map(|&(x, _)| {
                    let q = w.probability(x);
                    q * (q / p.smoothed_probability(x, n)).ln()
                })
                .sum();
            // smoothing can push a near-identical pair a hair below zero
            kl.max(0.0)
        })
        .sum();
    Ok(total / t1.len() as f64)
}

/// max(divergence(T1, T2), divergence(T2, T1)).
pub fn symmetric_distance(t1: &ContextTree, t2: &ContextTree) -> Result<f64> {
    Ok(divergence(t1, t2)?.max(divergence(t2, t1)?))
}

/// Square matrix of dissimilarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
    symmetric: bool,
}

impl DistanceMatrix {
    /// Validates shape, sign and diagonal; the symmetry flag is derived.
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig(format!(
                "distance matrix must be {n}x{n}"
            )));
        }
        for (i, row) in values.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "diagonal entry {i} is {} (must be 0)",
                    row[i]
                )));
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "row {i} has invalid distance {v}"
                )));
            }
        }
        let symmetric = (0..n).all(|i| (0..i).all(|j| values[i][j] == values[j][i]));
        Ok(DistanceMatrix {
            labels,
            values,
            symmetric,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// First (i, j) with M[i][j] != M[j][i], if any.
    pub fn first_asymmetry(&self) -> Option<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .find(|&(i, j)| self.values[i][j] != self.values[j][i])
    }
}

/// All pairwise dissimilarities, computed in parallel and assembled in input
/// order. The diagonal is set to exactly zero.
pub fn distance_matrix(trees: &[(String, ContextTree)], mode: Mode) -> Result<DistanceMatrix> {
    let n = trees.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "distance matrix needs >= 2 trees, got {n}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let directed = pairs
        .par_iter()
        .map(|&(i, j)| divergence(&trees[i].1, &trees[j].1))
        .collect::<Result<Vec<f64>>>()?;
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(directed) {
        values[i][j] = d;
    }
    if mode == Mode::Symmetric {
        for i in 0..n {
            for j in 0..i {
                let m = values[i][j].max(values[j][i]);
                values[i][j] = m;
                values[j][i] = m;
            }
        }
    }
    DistanceMatrix::new(trees.iter().map(|t| t.0.clone()).collect(), values)
}

/// CSV with header `label,<labels...>` and one row per item.
pub fn write_matrix<W: Write>(m: &DistanceMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend(m.labels.iter().cloned());
    w.write_record(&header)?;
    for (label, row) in m.labels.iter().zip(&m.values) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(reader: R) -> Result<DistanceMatrix> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::with_capacity(labels.len());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let malformed = |message: String| Error::MalformedRow {
            path: "distance matrix".into(),
            row: i + 2,
            message,
        };
        if rec.get(0) != labels.get(i).map(String::as_str) {
            return Err(malformed(format!(
                "row label {:?} does not match column {:?}",
                rec.get(0),
                labels.get(i)
            )));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| malformed(format!("not a number: `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    DistanceMatrix::new(labels, values)
}

pub fn save_matrix(m: &DistanceMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_matrix(m, std::fs::File::create(path)?)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_matrix(std::fs::File::open(path)?)
}
