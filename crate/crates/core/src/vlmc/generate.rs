use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tokenize::Symbol;

use super::ContextTree;

/// Longest coda `generate` will emit before giving up.
pub const GENERATION_CAP: usize = 200;

/// Samples `n_codas` codas from the tree's maximum-likelihood distributions.
///
/// Generation starts just after a coda boundary (history = end symbol), and
/// the end symbol stays in the rolling history so transitions between codas
/// follow the model too. Each returned coda ends with the end symbol.
pub fn generate(tree: &ContextTree, n_codas: usize, seed: u64) -> Result<Vec<Vec<Symbol>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = tree.alphabet().end_symbol();
    let depth = tree.max_depth().max(1);
    let mut history: Vec<Symbol> = vec![end];
    let mut codas = Vec::with_capacity(n_codas);
    for _ in 0..n_codas {
        let mut coda = Vec::new();
        loop {
            if coda.len() == GENERATION_CAP {
                return Err(Error::GenerationCap(GENERATION_CAP));
            }
            let node = tree.context_lookup(&history);
            if node.count() == 0 {
                return Err(Error::InvalidTree(format!(
                    "context {:?} has no observed transitions",
                    node.context()
                )));
            }
            let mut r = rng.random_range(0..node.count());
            let mut next = node.child_counts()[0].0;
            for &(s, c) in node.child_counts() {
                if r < c {
                    next = s;
                    break;
                }
                r -= c;
            }
            coda.push(next);
            history.push(next);
            if history.len() > 2 * depth {
                history.drain(..history.len() - depth);
            }
            if next == end {
                break;
            }
        }
        codas.push(coda);
    }
    Ok(codas)
}
