//! JSON form of a fitted tree:
//!
//! ```json
//! {"alphabet_size": 21, "delta_t": 0.05, "t_max": 1.0, "D": 10, "K": 15.7,
//!  "contexts": [{"context": [], "count": 99, "child_counts": {"4": 60, "20": 39}}]}
//! ```
//!
//! Only integer counts are stored; distributions are recomputed on load.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::{Alphabet, DiscretizationConfig, Symbol};

use super::ContextTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub context: Vec<Symbol>,
    pub count: u64,
    pub child_counts: BTreeMap<Symbol, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub alphabet_size: usize,
    pub delta_t: Option<f64>,
    pub t_max: Option<f64>,
    #[serde(rename = "D")]
    pub max_depth: usize,
    #[serde(rename = "K")]
    pub threshold: Option<f64>,
    pub contexts: Vec<ContextEntry>,
}

impl From<&ContextTree> for TreeDocument {
    fn from(tree: &ContextTree) -> Self {
        let disc = tree.discretization();
        TreeDocument {
            alphabet_size: tree.alphabet().size(),
            delta_t: disc.map(|d| d.delta_t),
            t_max: disc.map(|d| d.t_max),
            max_depth: tree.max_depth(),
            threshold: tree.threshold().filter(|k| k.is_finite()),
            contexts: tree
                .nodes()
                .iter()
                .map(|n| ContextEntry {
                    context: n.context().to_vec(),
                    count: n.count(),
                    child_counts: n.child_counts().iter().copied().collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<TreeDocument> for ContextTree {
    type Error = Error;

    fn try_from(doc: TreeDocument) -> Result<Self> {
        if doc.alphabet_size < 2 || doc.alphabet_size > Symbol::MAX as usize {
            return Err(Error::InvalidTree(format!(
                "alphabet size {} out of range",
                doc.alphabet_size
            )));
        }
        let discretization = match (doc.delta_t, doc.t_max) {
            (Some(delta_t), Some(t_max)) => Some(DiscretizationConfig::new(delta_t, t_max)?),
            (None, None) => None,
            _ => {
                return Err(Error::InvalidTree(
                    "delta_t and t_max must be given together".into(),
                ))
            }
        };
        let entries = doc
            .contexts
            .into_iter()
            .map(|e| (e.context, e.count, e.child_counts.into_iter().collect()))
            .collect();
        ContextTree::from_entries(
            Alphabet::new(doc.alphabet_size),
            doc.max_depth,
            doc.threshold,
            discretization,
            entries,
        )
    }
}

pub fn write_tree<W: Write>(tree: &ContextTree, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, &TreeDocument::from(tree))?;
    Ok(())
}

pub fn read_tree<R: Read>(reader: R) -> Result<ContextTree> {
    let doc: TreeDocument = serde_json::from_reader(reader)?;
    doc.try_into()
}

pub fn save_tree(tree: &ContextTree, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_tree(tree, std::io::BufWriter::new(file))
}

pub fn load_tree(path: impl AsRef<Path>) -> Result<ContextTree> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_tree(std::io::BufReader::new(std::fs::File::open(path)?))
}
