use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::tokenize::{Alphabet, DiscretizationConfig, Symbol, SymbolStream};

use super::{default_threshold, FitConfig, Threshold, SMOOTHING_ALPHA};

/// A history `w` together with the counts of the symbols that followed it.
///
/// `context` is in chronological order: the last element is the most recent
/// symbol. `count` is N(w), the number of positions where `w` occurs and is
/// followed by another symbol, so it always equals the sum of `child_counts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextNode {
    context: Vec<Symbol>,
    count: u64,
    /// (next symbol, N(wx)), sorted by symbol, zero counts omitted.
    child_counts: Vec<(Symbol, u64)>,
    parent: Option<usize>,
    /// Trie edges keyed by the symbol one step further into the past.
    children: Vec<(Symbol, usize)>,
}

impl ContextNode {
    fn new(context: Vec<Symbol>, parent: Option<usize>) -> Self {
        ContextNode {
            context,
            count: 0,
            child_counts: Vec::new(),
            parent,
            children: Vec::new(),
        }
    }

    pub fn context(&self) -> &[Symbol] {
        &self.context
    }

    pub fn depth(&self) -> usize {
        self.context.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn child_counts(&self) -> &[(Symbol, u64)] {
        &self.child_counts
    }

    pub fn next_count(&self, x: Symbol) -> u64 {
        self.child_counts
            .binary_search_by_key(&x, |&(s, _)| s)
            .map(|i| self.child_counts[i].1)
            .unwrap_or(0)
    }

    /// Maximum-likelihood q_w(x) = N(wx) / N(w).
    pub fn probability(&self, x: Symbol) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.next_count(x) as f64 / self.count as f64
    }

    /// Additive smoothing over the full alphabet:
    /// (N(wx) + alpha) / (N(w) + alpha * n).
    pub fn smoothed_probability(&self, x: Symbol, alphabet_size: usize) -> f64 {
        (self.next_count(x) as f64 + SMOOTHING_ALPHA)
            / (self.count as f64 + SMOOTHING_ALPHA * alphabet_size as f64)
    }

    /// Dense maximum-likelihood distribution over the alphabet.
    pub fn distribution(&self, alphabet_size: usize) -> Vec<f64> {
        let mut q = vec![0.0; alphabet_size];
        for &(s, c) in &self.child_counts {
            q[s as usize] = c as f64 / self.count as f64;
        }
        q
    }

    fn child(&self, s: Symbol) -> Option<usize> {
        self.children
            .binary_search_by_key(&s, |&(k, _)| k)
            .ok()
            .map(|i| self.children[i].1)
    }

    fn observe(&mut self, next: Symbol) {
        self.count += 1;
        match self.child_counts.binary_search_by_key(&next, |&(s, _)| s) {
            Ok(i) => self.child_counts[i].1 += 1,
            Err(i) => self.child_counts.insert(i, (next, 1)),
        }
    }
}

/// Weighted KL divergence N(w) * D_KL(q_w || q_u) between a context and its parent.
///
/// Computed on raw counts; terms with N(wx) = 0 vanish, and N(wx) <= N(ux)
/// keeps the logarithms finite.
pub fn information_gain(w: &ContextNode, u: &ContextNode) -> Result<f64> {
    let is_parent = !w.context.is_empty() && w.context[1..] == u.context[..];
    if !is_parent {
        return Err(Error::NotParent {
            child: w.context.clone(),
            context: u.context.clone(),
        });
    }
    if w.count == 0 {
        return Ok(0.0);
    }
    let (nw, nu) = (w.count as f64, u.count as f64);
    let mut gain = 0.0;
    for &(x, cw) in &w.child_counts {
        let cu = u.next_count(x);
        if cu == 0 {
            return Err(Error::InvalidTree(format!(
                "count of {x} after {:?} exceeds count after its suffix",
                w.context
            )));
        }
        gain += cw as f64 * ((cw as f64 * nu) / (cu as f64 * nw)).ln();
    }
    // rounding can leave a tiny negative value when q_w == q_u
    Ok(gain.max(0.0))
}

/// A suffix-closed set of contexts with their transition counts.
///
/// Node 0 is the root (empty context). The structure is a trie read from the
/// most recent symbol backwards, so walking it along a reversed history finds
/// the longest suffix of that history that is a context.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextTree {
    alphabet: Alphabet,
    max_depth: usize,
    /// `None` for a saturated (unpruned) tree.
    threshold: Option<f64>,
    discretization: Option<DiscretizationConfig>,
    nodes: Vec<ContextNode>,
}

impl ContextTree {
    fn empty(alphabet: Alphabet, max_depth: usize) -> Self {
        ContextTree {
            alphabet,
            max_depth,
            threshold: None,
            discretization: None,
            nodes: vec![ContextNode::new(Vec::new(), None)],
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn discretization(&self) -> Option<DiscretizationConfig> {
        self.discretization
    }

    pub fn set_discretization(&mut self, cfg: Option<DiscretizationConfig>) {
        self.discretization = cfg;
    }

    pub fn root(&self) -> &ContextNode {
        &self.nodes[0]
    }

    /// Number of contexts, root included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of the longest context.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(ContextNode::depth).max().unwrap_or(0)
    }

    /// Number of symbols the tree was fit on (root count plus the final symbol).
    pub fn stream_len(&self) -> u64 {
        self.root().count + 1
    }

    pub fn nodes(&self) -> &[ContextNode] {
        &self.nodes
    }

    pub fn parent_of(&self, node: &ContextNode) -> Option<&ContextNode> {
        node.parent.map(|p| &self.nodes[p])
    }

    pub fn get(&self, context: &[Symbol]) -> Option<&ContextNode> {
        let mut idx = 0;
        for &s in context.iter().rev() {
            idx = self.nodes[idx].child(s)?;
        }
        Some(&self.nodes[idx])
    }

    pub fn contains(&self, context: &[Symbol]) -> bool {
        self.get(context).is_some()
    }

    fn lookup_index(&self, history: &[Symbol]) -> usize {
        let mut idx = 0;
        for &s in history.iter().rev().take(self.max_depth) {
            match self.nodes[idx].child(s) {
                Some(next) => idx = next,
                None => break,
            }
        }
        idx
    }

    /// The node for the longest suffix of `history` that is a context; the
    /// root when no suffix is.
    pub fn context_lookup(&self, history: &[Symbol]) -> &ContextNode {
        &self.nodes[self.lookup_index(history)]
    }

    /// Information gain of every non-root node against its parent, in node order.
    pub fn gains(&self) -> Vec<(&ContextNode, f64)> {
        self.nodes
            .iter()
            .skip(1)
            .map(|n| {
                let parent = &self.nodes[n.parent.expect("non-root has parent")];
                (n, information_gain(n, parent).expect("tree counts are consistent"))
            })
            .collect()
    }

    /// Same structure with every count multiplied by `factor`.
    pub fn with_scaled_counts(&self, factor: u64) -> ContextTree {
        let mut out = self.clone();
        for n in &mut out.nodes {
            n.count *= factor;
            for c in &mut n.child_counts {
                c.1 *= factor;
            }
        }
        out
    }

    /// Rebuilds the arena in canonical order: breadth-first, children sorted
    /// by symbol. Only nodes with `keep[i]` are retained; `keep` must be
    /// closed under taking parents.
    fn canonical(&self, keep: &[bool]) -> ContextTree {
        let mut out = ContextTree {
            alphabet: self.alphabet,
            max_depth: self.max_depth,
            threshold: self.threshold,
            discretization: self.discretization,
            nodes: Vec::with_capacity(keep.iter().filter(|&&k| k).count()),
        };
        let mut queue = VecDeque::from([(0usize, None::<usize>)]);
        while let Some((old, parent)) = queue.pop_front() {
            let src = &self.nodes[old];
            let new_idx = out.nodes.len();
            out.nodes.push(ContextNode {
                context: src.context.clone(),
                count: src.count,
                child_counts: src.child_counts.clone(),
                parent,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                let s = src.context[0];
                out.nodes[p].children.push((s, new_idx));
            }
            let mut kids: Vec<(Symbol, usize)> = src
                .children
                .iter()
                .copied()
                .filter(|&(_, c)| keep[c])
                .collect();
            kids.sort_unstable();
            for (_, c) in kids {
                queue.push_back((c, Some(new_idx)));
            }
        }
        // BFS visits a node's children in symbol order, so edges are sorted already
        out
    }

    /// Builds a tree from explicit (context, counts) entries. Validates that
    /// the root is present, the set is suffix-closed, counts are consistent
    /// and every symbol is in the alphabet.
    pub fn from_entries(
        alphabet: Alphabet,
        max_depth: usize,
        threshold: Option<f64>,
        discretization: Option<DiscretizationConfig>,
        entries: Vec<(Vec<Symbol>, u64, Vec<(Symbol, u64)>)>,
    ) -> Result<ContextTree> {
        let mut by_context: HashMap<Vec<Symbol>, (u64, Vec<(Symbol, u64)>)> = HashMap::new();
        for (context, count, mut counts) in entries {
            alphabet.check(&context)?;
            alphabet.check(&counts.iter().map(|c| c.0).collect::<Vec<_>>())?;
            if context.len() > max_depth {
                return Err(Error::InvalidTree(format!(
                    "context {context:?} deeper than D = {max_depth}"
                )));
            }
            counts.retain(|c| c.1 > 0);
            counts.sort_unstable();
            if counts.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidTree(format!(
                    "repeated symbol in counts of {context:?}"
                )));
            }
            let total: u64 = counts.iter().map(|c| c.1).sum();
            if total != count {
                return Err(Error::InvalidTree(format!(
                    "count {count} of {context:?} differs from the sum of its next-symbol counts {total}"
                )));
            }
            if by_context.insert(context.clone(), (count, counts)).is_some() {
                return Err(Error::InvalidTree(format!("duplicate context {context:?}")));
            }
        }
        let root = by_context
            .remove(&Vec::new())
            .ok_or_else(|| Error::InvalidTree("root context missing".into()))?;
        let mut tree = ContextTree::empty(alphabet, max_depth);
        tree.threshold = threshold;
        tree.discretization = discretization;
        tree.nodes[0].count = root.0;
        tree.nodes[0].child_counts = root.1;

        let mut rest: Vec<(Vec<Symbol>, (u64, Vec<(Symbol, u64)>))> =
            by_context.into_iter().collect();
        rest.sort_by(|a, b| {
            a.0.len()
                .cmp(&b.0.len())
                .then_with(|| a.0.iter().rev().cmp(b.0.iter().rev()))
        });
        for (context, (count, counts)) in rest {
            let parent_ctx = &context[1..];
            let mut parent = 0;
            for &s in parent_ctx.iter().rev() {
                parent = tree.nodes[parent].child(s).ok_or_else(|| {
                    Error::InvalidTree(format!("context {context:?} lacks its suffix"))
                })?;
            }
            let idx = tree.nodes.len();
            let mut node = ContextNode::new(context.clone(), Some(parent));
            node.count = count;
            node.child_counts = counts;
            for &(x, c) in &node.child_counts {
                if c > tree.nodes[parent].next_count(x) {
                    return Err(Error::InvalidTree(format!(
                        "count of {x} after {context:?} exceeds count after its suffix"
                    )));
                }
            }
            tree.nodes.push(node);
            let edges = &mut tree.nodes[parent].children;
            let pos = edges.partition_point(|&(s, _)| s < context[0]);
            edges.insert(pos, (context[0], idx));
        }
        let keep = vec![true; tree.nodes.len()];
        Ok(tree.canonical(&keep))
    }
}

/// Saturated tree: every history of length <= `max_depth` that occurs at a
/// position followed by at least one symbol, with N(w) and N(wx).
pub fn count_subsequences(stream: &SymbolStream, max_depth: usize) -> Result<ContextTree> {
    if stream.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "stream of length {} (need >= 2)",
            stream.len()
        )));
    }
    if max_depth == 0 {
        return Err(Error::InvalidConfig("maximum depth must be >= 1".into()));
    }
    let s = stream.symbols();
    let mut tree = ContextTree::empty(stream.alphabet(), max_depth);
    // (node, older symbol) -> child
    let mut edges: HashMap<(usize, Symbol), usize> = HashMap::new();
    for t in 0..s.len() - 1 {
        let next = s[t + 1];
        let mut idx = 0;
        tree.nodes[0].observe(next);
        for d in 1..=max_depth.min(t + 1) {
            let sym = s[t + 1 - d];
            idx = match edges.get(&(idx, sym)) {
                Some(&c) => c,
                None => {
                    let c = tree.nodes.len();
                    tree.nodes
                        .push(ContextNode::new(s[t + 1 - d..=t].to_vec(), Some(idx)));
                    tree.nodes[idx].children.push((sym, c));
                    edges.insert((idx, sym), c);
                    c
                }
            };
            tree.nodes[idx].observe(next);
        }
    }
    let keep = vec![true; tree.nodes.len()];
    Ok(tree.canonical(&keep))
}

/// Keeps every context whose information gain exceeds `threshold`, plus all
/// of their suffixes and the root.
pub fn prune(saturated: &ContextTree, threshold: f64) -> ContextTree {
    let n = saturated.nodes.len();
    let mut keep = vec![false; n];
    keep[0] = true;
    for i in 1..n {
        let node = &saturated.nodes[i];
        let parent = &saturated.nodes[node.parent.expect("non-root has parent")];
        let gain = information_gain(node, parent).expect("saturated counts are consistent");
        if gain > threshold {
            let mut j = i;
            while !keep[j] {
                keep[j] = true;
                j = saturated.nodes[j].parent.expect("non-root has parent");
            }
        }
    }
    let mut out = saturated.canonical(&keep);
    out.threshold = Some(threshold);
    out
}

/// Count, then prune at the configured (or default) threshold.
pub fn fit(stream: &SymbolStream, cfg: &FitConfig) -> Result<ContextTree> {
    let saturated = count_subsequences(stream, cfg.max_depth)?;
    let k = match cfg.threshold {
        Threshold::Auto => default_threshold(stream.alphabet().size()),
        Threshold::Value(k) => k,
    };
    let mut tree = prune(&saturated, k);
    tree.discretization = cfg.discretization;
    Ok(tree)
}
