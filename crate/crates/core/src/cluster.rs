//! Average-linkage (UPGMA) clustering, dendrogram cuts and the adjusted Rand
//! index.
//!
//! Merge ids follow the usual convention: leaves are `0..n` and the cluster
//! created by merge `i` gets id `n + i`.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::DistanceMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Number of leaves under the new cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    labels: Vec<String>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn n_leaves(&self) -> usize {
        self.labels.len()
    }

    /// Leaves in recursive left-first order from the final merge.
    pub fn leaf_order(&self) -> Vec<usize> {
        let n = self.n_leaves();
        if self.merges.is_empty() {
            return (0..n).collect();
        }
        let mut out = Vec::with_capacity(n);
        let mut stack = vec![n + self.merges.len() - 1];
        while let Some(id) = stack.pop() {
            if id < n {
                out.push(id);
            } else {
                let m = &self.merges[id - n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out
    }

    fn height_of(&self, id: usize) -> f64 {
        let n = self.n_leaves();
        if id < n {
            0.0
        } else {
            self.merges[id - n].height
        }
    }

    /// Newick text with branch lengths equal to height differences.
    pub fn to_newick(&self) -> String {
        let n = self.n_leaves();
        if self.merges.is_empty() {
            return match self.labels.first() {
                Some(l) => format!("{};", newick_label(l)),
                None => ";".into(),
            };
        }
        fn render(d: &Dendrogram, id: usize, out: &mut String) {
            let n = d.n_leaves();
            if id < n {
                out.push_str(&newick_label(&d.labels[id]));
                return;
            }
            let m = &d.merges[id - n];
            out.push('(');
            for (k, child) in [m.left, m.right].into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                render(d, child, out);
                out.push_str(&format!(":{}", m.height - d.height_of(child)));
            }
            out.push(')');
        }
        let mut out = String::new();
        render(self, n + self.merges.len() - 1, &mut out);
        out.push(';');
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "labels": self.labels,
            "merges": self.merges,
            "leaf_order": self.leaf_order(),
        })
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, &self.to_json())?;
        writeln!(f)?;
        Ok(())
    }

    pub fn save_newick(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_newick() + "\n")?;
        Ok(())
    }
}

fn newick_label(label: &str) -> String {
    let plain = !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || "()[]':;,".contains(c));
    if plain {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// UPGMA on a symmetric matrix. At each step the pair of active clusters with
/// the smallest mean inter-cluster distance is merged; ties go to the pair
/// whose smallest leaf indices come first.
pub fn average_linkage(m: &DistanceMatrix) -> Result<Dendrogram> {
    if let Some((i, j)) = m.first_asymmetry() {
        return Err(Error::Asymmetric(i, j));
    }
    let n = m.len();
    // slot k holds the cluster whose smallest leaf is k
    let mut d: Vec<Vec<f64>> = m.rows().to_vec();
    let mut active: Vec<bool> = vec![true; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && best.is_none_or(|(a, b)| d[i][j] < d[a][b]) {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("two active clusters");
        let (si, sj) = (size[i] as f64, size[j] as f64);
        merges.push(Merge {
            left: id[i],
            right: id[j],
            height: d[i][j],
            size: size[i] + size[j],
        });
        for k in 0..n {
            if active[k] && k != i && k != j {
                let v = (si * d[i][k] + sj * d[j][k]) / (si + sj);
                d[i][k] = v;
                d[k][i] = v;
            }
        }
        active[j] = false;
        size[i] += size[j];
        id[i] = n + step;
    }
    Ok(Dendrogram {
        labels: m.labels().to_vec(),
        merges,
    })
}

/// Flat partition into `k` clusters: applies the first `n - k` merges.
/// Cluster ids are numbered by the leaf order of each cluster's first member.
pub fn cut(d: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    let n = d.n_leaves();
    if k == 0 || k > n {
        return Err(Error::ClusterCount { k, n });
    }
    // leaf membership of every cluster id, built incrementally
    let mut parent: Vec<usize> = (0..n + d.merges.len()).collect();
    for (step, m) in d.merges.iter().take(n - k).enumerate() {
        parent[m.left] = n + step;
        parent[m.right] = n + step;
    }
    let root = |mut x: usize| {
        while parent[x] != x {
            x = parent[x];
        }
        x
    };
    let mut ids: HashMap<usize, usize> = HashMap::new();
    Ok((0..n)
        .map(|leaf| {
            let next = ids.len();
            *ids.entry(root(leaf)).or_insert(next)
        })
        .collect())
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index from the pair-counting contingency table. Returns 1.0
/// when both partitions are trivial in the same way (the index is 0/0).
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + Hash,
    B: Eq + Hash,
{
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData(
            "adjusted Rand index needs >= 2 items".into(),
        ));
    }
    let mut table: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(a.len() as u64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AriSweep {
    /// (k, ARI) for k = 2..=n.
    pub scores: Vec<(usize, f64)>,
    pub best_k: usize,
    pub best_ari: f64,
}

/// ARI of every cut k = 2..=n against `reference`; the first k attaining
/// the maximum is reported.
pub fn ari_sweep<L: Eq + Hash>(d: &Dendrogram, reference: &[L]) -> Result<AriSweep> {
    let n = d.n_leaves();
    if reference.len() != n {
        return Err(Error::LengthMismatch(reference.len(), n));
    }
    if n < 2 {
        return Err(Error::InsufficientData("sweep needs >= 2 leaves".into()));
    }
    let scores = (2..=n)
        .map(|k| Ok((k, adjusted_rand_index(&cut(d, k)?, reference)?)))
        .collect::<Result<Vec<_>>>()?;
    let (best_k, best_ari) = scores
        .iter()
        .copied()
        .fold((0, f64::NEG_INFINITY), |acc, s| if s.1 > acc.1 { s } else { acc });
    Ok(AriSweep {
        scores,
        best_k,
        best_ari,
    })
}
