use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tokenize::{Symbol, SymbolStream};

use super::ContextTree;

fn check_alphabet(tree: &ContextTree, symbols: &[Symbol]) -> Result<()> {
    tree.alphabet().check(symbols).map_err(|_| {
        let max = symbols.iter().copied().max().unwrap_or(0) as usize;
        Error::AlphabetMismatch(tree.alphabet().size(), max + 1)
    })
}

/// Smoothed log-likelihood of `symbols` when the model has already seen
/// `prefix`. The prefix itself is not scored.
pub fn log_likelihood_after(
    tree: &ContextTree,
    prefix: &[Symbol],
    symbols: &[Symbol],
) -> Result<f64> {
    check_alphabet(tree, prefix)?;
    check_alphabet(tree, symbols)?;
    let n = tree.alphabet().size();
    let mut history: Vec<Symbol> = prefix.to_vec();
    history.extend_from_slice(symbols);
    let offset = prefix.len();
    let total = (0..symbols.len())
        .map(|i| {
            let at = offset + i;
            let node = tree.context_lookup(&history[..at]);
            node.smoothed_probability(history[at], n).ln()
        })
        .sum();
    Ok(total)
}

/// Sum over positions of ln p(x_i | longest context of x_<i), smoothed.
pub fn log_likelihood(tree: &ContextTree, stream: &SymbolStream) -> Result<f64> {
    if stream.alphabet() != tree.alphabet() {
        return Err(Error::AlphabetMismatch(
            tree.alphabet().size(),
            stream.alphabet().size(),
        ));
    }
    log_likelihood_after(tree, &[], stream.symbols())
}

/// Free parameters: (contexts incl. root) * (alphabet size - 1).
pub fn parameter_count(tree: &ContextTree) -> usize {
    tree.len() * (tree.alphabet().size() - 1)
}

pub fn aic(tree: &ContextTree, stream: &SymbolStream) -> Result<f64> {
    let ll = log_likelihood(tree, stream)?;
    Ok(2.0 * parameter_count(tree) as f64 - 2.0 * ll)
}

/// Assigns a coda to the model under which it is most likely.
///
/// Each coda is scored as if it followed a coda boundary (history = end
/// symbol). Ties go to the lexicographically first label.
pub fn classify(coda: &[Symbol], models: &BTreeMap<String, ContextTree>) -> Result<String> {
    if models.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "classification needs >= 2 models, got {}",
            models.len()
        )));
    }
    let mut sizes = models.values().map(|t| t.alphabet());
    let first = sizes.next().expect("non-empty");
    if let Some(other) = sizes.find(|a| *a != first) {
        return Err(Error::AlphabetMismatch(first.size(), other.size()));
    }
    let prefix = [first.end_symbol()];
    let mut best: Option<(&String, f64)> = None;
    for (label, tree) in models {
        let ll = log_likelihood_after(tree, &prefix, coda)?;
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((label, ll));
        }
    }
    Ok(best.expect("non-empty").0.clone())
}
