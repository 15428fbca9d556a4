//! Synthetic sources with known structure.
//!
//! A [`SourceModel`] is a variable-length Markov chain given directly by
//! probabilities rather than fitted counts. It samples symbol streams and
//! codas, and codas can be turned back into intervals that discretize to the
//! same symbols, so a planted source can drive the whole pipeline from a
//! coda CSV onwards.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{read_overlap_matrix, CodaRecord, Dataset, OverlapMatrix};
use crate::tokenize::{Alphabet, DiscretizationConfig, Symbol};
use crate::vlmc::GENERATION_CAP;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    alphabet: Alphabet,
    max_depth: usize,
    contexts: HashMap<Vec<Symbol>, Vec<(Symbol, f64)>>,
}

impl SourceModel {
    /// `contexts` maps chronological histories to next-symbol probabilities.
    /// The empty history must be present. Histories need not be suffix-closed:
    /// lookup falls back to the longest listed suffix.
    pub fn new(
        alphabet: Alphabet,
        contexts: impl IntoIterator<Item = (Vec<Symbol>, Vec<(Symbol, f64)>)>,
    ) -> Result<Self> {
        let contexts: HashMap<_, _> = contexts.into_iter().collect();
        if !contexts.contains_key(&Vec::new()) {
            return Err(Error::InvalidTree("source needs a root distribution".into()));
        }
        for (ctx, dist) in &contexts {
            alphabet.check(ctx)?;
            alphabet.check(&dist.iter().map(|d| d.0).collect::<Vec<_>>())?;
            let total: f64 = dist.iter().map(|d| d.1).sum();
            if (total - 1.0).abs() > 1e-9 || dist.iter().any(|d| d.1 < 0.0) {
                return Err(Error::InvalidTree(format!(
                    "distribution for {ctx:?} is not a probability vector"
                )));
            }
        }
        let max_depth = contexts.keys().map(Vec::len).max().unwrap_or(0);
        Ok(SourceModel {
            alphabet,
            max_depth,
            contexts,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Distribution of the longest listed suffix of `history`.
    pub fn distribution_for(&self, history: &[Symbol]) -> &[(Symbol, f64)] {
        let longest = self.max_depth.min(history.len());
        (0..=longest)
            .rev()
            .find_map(|d| self.contexts.get(&history[history.len() - d..]))
            .expect("root present")
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&Vec<Symbol>, &Vec<(Symbol, f64)>)> {
        self.contexts.iter()
    }

    fn draw<R: Rng>(&self, history: &[Symbol], rng: &mut R) -> Symbol {
        let dist = self.distribution_for(history);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(s, p) in dist {
            acc += p;
            if u < acc {
                return s;
            }
        }
        dist.iter().rev().find(|d| d.1 > 0.0).expect("non-empty").0
    }

    /// A stream of `len` symbols starting from an empty history.
    pub fn sample_stream<R: Rng>(&self, len: usize, rng: &mut R) -> Vec<Symbol> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let start = out.len().saturating_sub(self.max_depth);
            let next = self.draw(&out[start..], rng);
            out.push(next);
        }
        out
    }

    /// `n` consecutive codas, starting right after a coda boundary.
    pub fn sample_codas<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<Symbol>>> {
        let end = self.alphabet.end_symbol();
        let mut history = vec![end];
        let mut codas = Vec::with_capacity(n);
        for _ in 0..n {
            let mut coda = Vec::new();
            loop {
                if coda.len() == GENERATION_CAP {
                    return Err(Error::GenerationCap(GENERATION_CAP));
                }
                let start = history.len().saturating_sub(self.max_depth);
                let next = self.draw(&history[start..], rng);
                coda.push(next);
                history.push(next);
                if next == end {
                    break;
                }
            }
            codas.push(coda);
        }
        Ok(codas)
    }
}

/// Intervals at bin centres (rounded to 1e-9 s), one per non-terminal
/// symbol; discretizing them with `cfg` gives back the coda (end symbol
/// appended).
pub fn symbols_to_icis(coda: &[Symbol], cfg: &DiscretizationConfig) -> Vec<f64> {
    let end = cfg.alphabet().end_symbol();
    coda.iter()
        .filter(|&&s| s != end)
        .map(|&s| ((s as f64 + 0.5) * cfg.delta_t * 1e9).round() / 1e9)
        .collect()
}

/// Specification of one planted clan.
#[derive(Debug, Clone)]
pub struct PlantedClan<'a> {
    pub label: &'a str,
    pub source: &'a SourceModel,
    pub samples: usize,
    pub codas_per_sample: usize,
}

/// Builds a dataset with one sample per (clan, index) pair. Sample ids are
/// `<clan>-s<index>`, every record carries its clan and a unit id equal to
/// the sample id.
pub fn planted_dataset(
    clans: &[PlantedClan<'_>],
    cfg: &DiscretizationConfig,
    seed: u64,
) -> Result<Dataset> {
    let mut records = Vec::new();
    for (ci, clan) in clans.iter().enumerate() {
        if clan.source.alphabet() != cfg.alphabet() {
            return Err(Error::AlphabetMismatch(
                clan.source.alphabet().size(),
                cfg.alphabet().size(),
            ));
        }
        for si in 0..clan.samples {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((ci as u64) << 32) | si as u64);
            let sample_id = format!("{}-s{si}", clan.label);
            for (k, coda) in clan
                .source
                .sample_codas(clan.codas_per_sample, &mut rng)?
                .into_iter()
                .enumerate()
            {
                let icis = symbols_to_icis(&coda, cfg);
                if icis.is_empty() {
                    return Err(Error::InvalidTree(format!(
                        "source for {} emitted an empty coda",
                        clan.label
                    )));
                }
                records.push(CodaRecord {
                    coda_id: format!("{sample_id}-c{k}"),
                    sample_id: sample_id.clone(),
                    unit_id: Some(sample_id.clone()),
                    clan: Some(clan.label.to_string()),
                    coda_type: None,
                    id_flag: None,
                    icis,
                });
            }
        }
    }
    Dataset::from_records(records)
}

fn coda_alphabet() -> Alphabet {
    DiscretizationConfig::default().alphabet()
}

const E: Symbol = 20;

/// Two coda-style sources over the default 21-symbol alphabet. Their
/// distributions after the end symbol, after 4 and after 8 each differ by a
/// total variation of 0.4; clan A also has a depth-2 context `[4, 4]` and
/// clan B one at `[8, 8]`.
pub fn two_clan_sources() -> (SourceModel, SourceModel) {
    let a = SourceModel::new(
        coda_alphabet(),
        [
            (vec![], vec![(4, 0.4), (8, 0.3), (E, 0.3)]),
            (vec![E], vec![(4, 0.6), (8, 0.4)]),
            (vec![4], vec![(4, 0.5), (8, 0.2), (E, 0.3)]),
            (vec![8], vec![(4, 0.3), (8, 0.3), (E, 0.4)]),
            (vec![4, 4], vec![(4, 0.1), (8, 0.1), (E, 0.8)]),
        ],
    )
    .expect("valid source");
    let b = SourceModel::new(
        coda_alphabet(),
        [
            (vec![], vec![(4, 0.2), (8, 0.5), (E, 0.3)]),
            (vec![E], vec![(4, 0.2), (8, 0.8)]),
            (vec![4], vec![(4, 0.1), (8, 0.6), (E, 0.3)]),
            (vec![8], vec![(4, 0.1), (8, 0.7), (E, 0.2)]),
            (vec![8, 8], vec![(4, 0.1), (8, 0.2), (E, 0.7)]),
        ],
    )
    .expect("valid source");
    (a, b)
}

/// Two overlapping coda-style sources: their codas share every symbol and
/// most transitions, so a likelihood classifier is right only most of the
/// time.
pub fn overlapping_clan_sources() -> (SourceModel, SourceModel) {
    let a = SourceModel::new(
        coda_alphabet(),
        [
            (vec![], vec![(3, 0.3), (5, 0.3), (9, 0.1), (E, 0.3)]),
            (vec![E], vec![(3, 0.5), (5, 0.35), (9, 0.15)]),
            (vec![3], vec![(3, 0.45), (5, 0.2), (9, 0.05), (E, 0.3)]),
            (vec![5], vec![(3, 0.2), (5, 0.35), (9, 0.1), (E, 0.35)]),
            (vec![9], vec![(3, 0.3), (5, 0.3), (9, 0.1), (E, 0.3)]),
            (vec![3, 3], vec![(3, 0.25), (5, 0.15), (E, 0.6)]),
        ],
    )
    .expect("valid source");
    let b = SourceModel::new(
        coda_alphabet(),
        [
            (vec![], vec![(3, 0.25), (5, 0.35), (9, 0.1), (E, 0.3)]),
            (vec![E], vec![(3, 0.3), (5, 0.45), (9, 0.25)]),
            (vec![3], vec![(3, 0.3), (5, 0.3), (9, 0.1), (E, 0.3)]),
            (vec![5], vec![(3, 0.15), (5, 0.45), (9, 0.1), (E, 0.3)]),
            (vec![9], vec![(3, 0.2), (5, 0.4), (9, 0.1), (E, 0.3)]),
            (vec![5, 5], vec![(3, 0.1), (5, 0.3), (E, 0.6)]),
        ],
    )
    .expect("valid source");
    (a, b)
}

/// Order-3 chain over four symbols. Every length-3 history has two equally
/// likely successors, `(a + b + c) mod 4` and `(a*c + 2b + 1) mod 4` (moved
/// off the first when they collide), so two symbols of memory leave the next
/// symbol ambiguous and three resolve it to a fair coin.
pub fn order3_chain() -> SourceModel {
    let alphabet = Alphabet::new(4);
    let mut contexts = vec![(vec![], (0..4).map(|s| (s, 0.25)).collect::<Vec<_>>())];
    for a in 0..4u16 {
        for b in 0..4u16 {
            for c in 0..4u16 {
                let first = (a + b + c) % 4;
                let mut second = (a * c + 2 * b + 1) % 4;
                if second == first {
                    second = if (first + 1 + a) % 4 != first {
                        (first + 1 + a) % 4
                    } else {
                        (first + 2) % 4
                    };
                }
                contexts.push((vec![a, b, c], vec![(first, 0.5), (second, 0.5)]));
            }
        }
    }
    SourceModel::new(alphabet, contexts).expect("valid source")
}

/// A structured coda stream with its symbols randomly permuted, which keeps
/// symbol frequencies and destroys all sequential structure.
pub fn shuffled_coda_stream(len: usize, seed: u64) -> Vec<Symbol> {
    let (a, _) = two_clan_sources();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stream = a.sample_stream(len, &mut rng);
    stream.shuffle(&mut rng);
    stream
}

/// Spatial overlap table of the seven Pacific clans, bundled with the crate.
pub fn pacific_overlap() -> OverlapMatrix {
    read_overlap_matrix(include_str!("../data/pacific_overlap.csv").as_bytes())
        .expect("bundled overlap table parses")
}

/// Interval symbols used by the overlap sources.
const OVERLAP_SYMBOLS: [Symbol; 6] = [2, 4, 6, 8, 10, 12];

/// Probability of ending a coda after any interval in the overlap sources.
const OVERLAP_END: f64 = 0.3;

/// Per-clan sources for the overlap regression: `(identity, non_identity)`.
///
/// Every clan gets a random base style (depth-1 contexts over six interval
/// symbols). Its identity source is that base. Its non-identity source mixes
/// the bases of all clans, weighting clan b by `overlap(a, b)` (and itself by
/// 1), so clans that overlap more sound more alike in non-identity codas
/// while identity codas ignore overlap.
pub fn overlap_sources(overlap: &OverlapMatrix, seed: u64) -> (Vec<SourceModel>, Vec<SourceModel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let contexts: Vec<Vec<Symbol>> = std::iter::once(vec![])
        .chain(std::iter::once(vec![E]))
        .chain(OVERLAP_SYMBOLS.iter().map(|&s| vec![s]))
        .collect();
    let random_weights = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let w: Vec<f64> = (0..OVERLAP_SYMBOLS.len())
            .map(|_| rng.random::<f64>().powi(3) + 0.01)
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    };
    // bases[clan][context] = weights over OVERLAP_SYMBOLS
    let bases: Vec<Vec<Vec<f64>>> = (0..overlap.labels().len())
        .map(|_| contexts.iter().map(|_| random_weights(&mut rng)).collect())
        .collect();
    let build = |weights: &[Vec<f64>]| {
        let entries = contexts.iter().zip(weights).map(|(ctx, w)| {
            let keep = if ctx.as_slice() == [E] { 1.0 } else { 1.0 - OVERLAP_END };
            let mut dist: Vec<(Symbol, f64)> = OVERLAP_SYMBOLS
                .iter()
                .zip(w)
                .map(|(&s, &p)| (s, keep * p))
                .collect();
            if ctx.as_slice() != [E] {
                dist.push((E, OVERLAP_END));
            }
            (ctx.clone(), dist)
        });
        SourceModel::new(coda_alphabet(), entries).expect("valid source")
    };
    let n = bases.len();
    let id = bases.iter().map(|b| build(b)).collect();
    let nonid = (0..n)
        .map(|a| {
            let weights: Vec<f64> = (0..n)
                .map(|b| if a == b { 1.0 } else { overlap.value(a, b) })
                .collect();
            let total: f64 = weights.iter().sum();
            let mixed: Vec<Vec<f64>> = (0..contexts.len())
                .map(|c| {
                    (0..OVERLAP_SYMBOLS.len())
                        .map(|k| (0..n).map(|b| weights[b] * bases[b][c][k]).sum::<f64>() / total)
                        .collect()
                })
                .collect();
            build(&mixed)
        })
        .collect();
    (id, nonid)
}

/// One sample per clan of the overlap table, `codas_per_clan` codas each.
/// A fraction `id_fraction` of codas comes from the clan's identity source.
/// Identity codas have coda type `id-<clan>`; non-identity codas are typed
/// by their first interval symbol (`t<symbol>`), so types are shared across
/// clans.
pub fn overlap_dataset(
    overlap: &OverlapMatrix,
    codas_per_clan: usize,
    id_fraction: f64,
    cfg: &DiscretizationConfig,
    seed: u64,
) -> Result<Dataset> {
    if cfg.alphabet() != coda_alphabet() {
        return Err(Error::AlphabetMismatch(coda_alphabet().size(), cfg.alphabet().size()));
    }
    let (id, nonid) = overlap_sources(overlap, seed);
    let mut records = Vec::new();
    for (ci, clan) in overlap.labels().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + ci as u64);
        let sample_id = format!("{clan}-s0");
        for k in 0..codas_per_clan {
            let is_id = rng.random::<f64>() < id_fraction;
            let source = if is_id { &id[ci] } else { &nonid[ci] };
            let coda = source.sample_codas(1, &mut rng)?.remove(0);
            let coda_type = if is_id {
                format!("id-{clan}")
            } else {
                format!("t{}", coda[0])
            };
            records.push(CodaRecord {
                coda_id: format!("{sample_id}-c{k}"),
                sample_id: sample_id.clone(),
                unit_id: Some(sample_id.clone()),
                clan: Some(clan.clone()),
                coda_type: Some(coda_type),
                id_flag: Some(is_id),
                icis: symbols_to_icis(&coda, cfg),
            });
        }
    }
    Dataset::from_records(records)
}
