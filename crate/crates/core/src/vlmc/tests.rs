use std::collections::{BTreeMap, BTreeSet, HashMap};

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::planted::{two_clan_sources, SourceModel};
use crate::tokenize::{Alphabet, Symbol, SymbolStream};

const A: Symbol = 0;
const B: Symbol = 1;
const C: Symbol = 2;

fn stream(n: usize, s: &[Symbol]) -> SymbolStream {
    SymbolStream::new(Alphabet::new(n), s.to_vec()).unwrap()
}

fn contexts(tree: &ContextTree) -> BTreeSet<Vec<Symbol>> {
    tree.nodes().iter().map(|n| n.context().to_vec()).collect()
}

/// Number of positions i >= 1 with s[i-|w|..i] == w (and s[i] == next).
/// The first symbol has no predecessor, so even the root skips it.
fn scan_count(s: &[Symbol], w: &[Symbol], next: Option<Symbol>) -> u64 {
    (w.len().max(1)..s.len())
        .filter(|&i| s[i - w.len()..i] == *w && next.is_none_or(|x| s[i] == x))
        .count() as u64
}

fn entry(ctx: &[Symbol], counts: &[(Symbol, u64)]) -> (Vec<Symbol>, u64, Vec<(Symbol, u64)>) {
    (ctx.to_vec(), counts.iter().map(|c| c.1).sum(), counts.to_vec())
}

fn tree_from(n: usize, depth: usize, entries: &[(&[Symbol], &[(Symbol, u64)])]) -> ContextTree {
    ContextTree::from_entries(
        Alphabet::new(n),
        depth,
        None,
        None,
        entries.iter().map(|(c, k)| entry(c, k)).collect(),
    )
    .unwrap()
}

#[test]
fn counts_abab() {
    let t = count_subsequences(&stream(2, &[A, B, A, B]), 2).unwrap();
    assert_eq!(t.get(&[A]).unwrap().count(), 2);
    assert_eq!(t.get(&[B]).unwrap().count(), 1);
    assert_eq!(t.get(&[A, B]).unwrap().count(), 1);
    assert_eq!(t.get(&[B, A]).unwrap().count(), 1);
    assert_eq!(t.root().count(), 3);
    assert!(t.get(&[A, A]).is_none());
}

#[test]
fn counts_repeated_symbol() {
    let t = count_subsequences(&stream(2, &[A, A, A, A]), 2).unwrap();
    assert_eq!(t.get(&[A]).unwrap().count(), 3);
    assert_eq!(t.get(&[A, A]).unwrap().count(), 2);
}

#[test]
fn depth_beyond_stream_is_finite() {
    let t = count_subsequences(&stream(2, &[A, B, B]), 10).unwrap();
    assert_eq!(t.depth(), 2);
    assert!(count_subsequences(&stream(2, &[A]), 3).is_err());
    assert!(count_subsequences(&stream(2, &[A, B]), 0).is_err());
}

#[test]
fn gain_of_identical_distribution_is_zero() {
    let t = tree_from(2, 2, &[(&[], &[(A, 10), (B, 10)]), (&[A], &[(A, 5), (B, 5)])]);
    let w = t.get(&[A]).unwrap();
    assert_eq!(information_gain(w, t.root()).unwrap(), 0.0);
}

#[test]
fn gain_closed_form() {
    let t = tree_from(2, 2, &[(&[], &[(A, 10), (B, 10)]), (&[A], &[(A, 10)])]);
    let g = information_gain(t.get(&[A]).unwrap(), t.root()).unwrap();
    assert_relative_eq!(g, 10.0 * 2f64.ln(), epsilon = 1e-12);
}

#[test]
fn gain_requires_parent() {
    let t = tree_from(
        2,
        2,
        &[(&[], &[(A, 10), (B, 10)]), (&[A], &[(A, 6)]), (&[B], &[(B, 4)])],
    );
    let err = information_gain(t.get(&[A]).unwrap(), t.get(&[B]).unwrap());
    assert!(matches!(err, Err(crate::Error::NotParent { .. })));
}

#[test]
fn period_three_depth_two_context_dominates() {
    let s: Vec<Symbol> = (0..3000).map(|i| [A, A, B][i % 3]).collect();
    let t = count_subsequences(&stream(2, &s), 2).unwrap();
    let gains: HashMap<Vec<Symbol>, f64> = t
        .gains()
        .into_iter()
        .map(|(n, g)| (n.context().to_vec(), g))
        .collect();
    let best_depth1 = gains
        .iter()
        .filter(|(w, _)| w.len() == 1)
        .map(|(_, &g)| g)
        .fold(0.0, f64::max);
    assert!(gains[&vec![A, A]] > best_depth1);
    assert!(gains[&vec![B, A]] > best_depth1);
}

#[test]
fn default_thresholds() {
    // tabulated chi-square 0.95 quantiles
    assert_relative_eq!(default_threshold(21), 31.410 / 2.0, epsilon = 5e-4);
    assert_relative_eq!(default_threshold(2), 3.841 / 2.0, epsilon = 5e-4);
    assert_relative_eq!(default_threshold(11), 18.307 / 2.0, epsilon = 5e-4);
}

#[test]
fn threshold_parsing() {
    assert_eq!("auto".parse::<Threshold>().unwrap(), Threshold::Auto);
    assert_eq!("2.5".parse::<Threshold>().unwrap(), Threshold::Value(2.5));
    assert!("-1".parse::<Threshold>().is_err());
    assert!("x".parse::<Threshold>().is_err());
    assert_eq!(serde_json::to_string(&Threshold::Auto).unwrap(), "\"auto\"");
    assert_eq!(serde_json::to_string(&Threshold::Value(2.5)).unwrap(), "2.5");
    assert_eq!(serde_json::from_str::<Threshold>("3").unwrap(), Threshold::Value(3.0));
    assert!(serde_json::from_str::<Threshold>("-3").is_err());
}

#[test]
fn alternation_keeps_depth_one() {
    let s: Vec<Symbol> = (0..10_000).map(|i| (i % 2) as Symbol).collect();
    let t = fit(&stream(2, &s), &FitConfig::default()).unwrap();
    let expect: BTreeSet<Vec<Symbol>> = [vec![], vec![A], vec![B]].into();
    assert_eq!(contexts(&t), expect);
}

#[test]
fn infinite_threshold_gives_root() {
    let s: Vec<Symbol> = (0..1000).map(|i| (i % 3) as Symbol).collect();
    let t = fit(&stream(3, &s), &FitConfig::default().with_threshold(f64::INFINITY)).unwrap();
    assert_eq!(t.len(), 1);
}

/// An i.i.d. uniform stream over four symbols keeps spurious contexts at the
/// default threshold: with ~1000 candidate contexts each tested at 5%,
/// some always pass. Kept as a record of the measured behaviour.
#[test]
#[ignore = "multiple testing makes this fail on uniform i.i.d. data"]
fn uniform_iid_has_no_structure() {
    let mut depth0 = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<Symbol> = (0..10_000)
            .map(|_| rand::Rng::random_range(&mut rng, 0..4))
            .collect();
        let t = fit(&stream(4, &s), &FitConfig::default()).unwrap();
        depth0 += usize::from(t.len() == 1);
    }
    assert!(depth0 >= 95, "{depth0}/100 depth-0 trees");
}

#[test]
fn fit_is_deterministic() {
    let (a, _) = two_clan_sources();
    let s = a.sample_stream(5000, &mut ChaCha8Rng::seed_from_u64(1));
    let st = SymbolStream::new(a.alphabet(), s).unwrap();
    let t1 = fit(&st, &FitConfig::default()).unwrap();
    let t2 = fit(&st, &FitConfig::default()).unwrap();
    assert_eq!(t1, t2);
}

#[test]
fn doubled_stream_keeps_contexts() {
    let (a, _) = two_clan_sources();
    let s = a.sample_stream(5000, &mut ChaCha8Rng::seed_from_u64(4));
    let once = SymbolStream::new(a.alphabet(), s.clone()).unwrap();
    let twice = SymbolStream::new(a.alphabet(), [s.clone(), s].concat()).unwrap();
    let t1 = fit(&once, &FitConfig::default()).unwrap();
    let t2 = fit(&twice, &FitConfig::default()).unwrap();
    assert!(contexts(&t1).is_subset(&contexts(&t2)));
}

#[test]
fn lookup_longest_suffix() {
    let t = tree_from(
        3,
        3,
        &[
            (&[], &[(A, 5), (B, 5), (C, 5)]),
            (&[A], &[(A, 2), (B, 3)]),
            (&[B, A], &[(B, 3)]),
        ],
    );
    assert!(t.context_lookup(&[]).context().is_empty());
    assert_eq!(t.context_lookup(&[C, B, A]).context(), &[B, A]);
    assert_eq!(t.context_lookup(&[C, A]).context(), &[A]);
    assert_eq!(t.context_lookup(&[A, C]).context(), &[] as &[Symbol]);
}

#[test]
fn from_entries_rejects_bad_trees() {
    let bad = |entries: Vec<(Vec<Symbol>, u64, Vec<(Symbol, u64)>)>| {
        ContextTree::from_entries(Alphabet::new(2), 3, None, None, entries).is_err()
    };
    // no root
    assert!(bad(vec![entry(&[A], &[(A, 1)])]));
    // missing suffix
    assert!(bad(vec![entry(&[], &[(A, 3)]), entry(&[B, A], &[(A, 1)])]));
    // count larger than the suffix allows
    assert!(bad(vec![entry(&[], &[(A, 3)]), entry(&[A], &[(A, 4)])]));
    // inconsistent total
    assert!(bad(vec![(vec![], 5, vec![(A, 3)])]));
    // symbol outside alphabet
    assert!(bad(vec![entry(&[], &[(5, 3)])]));
}

#[test]
fn uniform_root_log_likelihood() {
    let t = tree_from(4, 1, &[(&[], &[(0, 25), (1, 25), (2, 25), (3, 25)])]);
    let s: Vec<Symbol> = (0..100).map(|i| (i * 7 % 4) as Symbol).collect();
    let ll = log_likelihood(&t, &stream(4, &s)).unwrap();
    assert_relative_eq!(ll, -100.0 * 4f64.ln(), epsilon = 1e-9);
    assert_relative_eq!(aic(&t, &stream(4, &s)).unwrap(), 283.2589, epsilon = 1e-3);
    assert!(log_likelihood(&t, &stream(3, &[0, 1])).is_err());
}

#[test]
fn uninformative_context_raises_aic() {
    let root: &[(Symbol, u64)] = &[(0, 25), (1, 25), (2, 25), (3, 25)];
    let plain = tree_from(4, 1, &[(&[], root)]);
    let extra = tree_from(4, 1, &[(&[], root), (&[0], &[(0, 6), (1, 6), (2, 6), (3, 6)])]);
    let s = stream(4, &(0..100).map(|i| (i % 4) as Symbol).collect::<Vec<_>>());
    let (a0, a1) = (aic(&plain, &s).unwrap(), aic(&extra, &s).unwrap());
    assert_relative_eq!(a1 - a0, 6.0, epsilon = 1e-9);
}

#[test]
fn deterministic_tree_scores_own_stream_near_zero() {
    let s: Vec<Symbol> = (0..10_000).map(|i| (i % 2) as Symbol).collect();
    let st = stream(2, &s);
    let t = fit(&st, &FitConfig::default()).unwrap();
    let ll = log_likelihood(&t, &st).unwrap();
    assert!(ll <= 0.0 && ll > -1e-3 * s.len() as f64, "{ll}");
}

#[test]
fn pruned_beats_saturated_on_period_three() {
    let s: Vec<Symbol> = (0..3000).map(|i| [A, A, B][i % 3]).collect();
    let st = stream(2, &s);
    let saturated = count_subsequences(&st, 10).unwrap();
    let pruned = fit(&st, &FitConfig::default()).unwrap();
    assert!(pruned.len() < saturated.len());
    assert!(aic(&pruned, &st).unwrap() < aic(&saturated, &st).unwrap());
}

#[test]
fn pruning_loses_at_most_removed_gain() {
    let (a, _) = two_clan_sources();
    let s = a.sample_stream(20_000, &mut ChaCha8Rng::seed_from_u64(9));
    let st = SymbolStream::new(a.alphabet(), s).unwrap();
    let saturated = count_subsequences(&st, 4).unwrap();
    let k = default_threshold(21);
    let pruned = prune(&saturated, k);
    assert!(parameter_count(&pruned) < parameter_count(&saturated));
    let removed: f64 = saturated
        .gains()
        .into_iter()
        .filter(|(n, _)| !pruned.contains(n.context()))
        .map(|(_, g)| g)
        .sum();
    let drop = log_likelihood(&saturated, &st).unwrap() - log_likelihood(&pruned, &st).unwrap();
    assert!(drop <= removed, "drop {drop} > removed gain {removed}");
}

#[test]
fn generating_tree_prefers_own_data() {
    let (a, b) = two_clan_sources();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let fit_on = |src: &SourceModel, rng: &mut ChaCha8Rng| {
        let s = SymbolStream::new(src.alphabet(), src.sample_stream(20_000, rng)).unwrap();
        fit(&s, &FitConfig::default()).unwrap()
    };
    let (ta, tb) = (fit_on(&a, &mut rng), fit_on(&b, &mut rng));
    let mut wins = 0;
    for _ in 0..20 {
        let s = SymbolStream::new(a.alphabet(), a.sample_stream(500, &mut rng)).unwrap();
        wins += usize::from(log_likelihood(&ta, &s).unwrap() > log_likelihood(&tb, &s).unwrap());
    }
    assert_eq!(wins, 20);
}

#[test]
fn fit_recovers_generator_distributions() {
    let (a, _) = two_clan_sources();
    let s = a.sample_stream(200_000, &mut ChaCha8Rng::seed_from_u64(21));
    let t = fit(&SymbolStream::new(a.alphabet(), s).unwrap(), &FitConfig::default()).unwrap();
    // internal nodes and the root mix several source histories; leaves do not
    let is_leaf = |n: &ContextNode| {
        !t.nodes()
            .iter()
            .any(|m| m.depth() == n.depth() + 1 && m.context()[1..] == *n.context())
    };
    for node in t.nodes().iter().filter(|n| n.depth() > 0 && is_leaf(n)) {
        let truth = a.distribution_for(node.context());
        let n = node.count() as f64;
        for &(x, p) in truth {
            let sd = (p * (1.0 - p) / n).sqrt();
            assert!(
                (node.probability(x) - p).abs() <= 4.0 * sd + 1e-9,
                "context {:?} symbol {x}",
                node.context()
            );
        }
    }
    for ctx in [vec![], vec![20], vec![4], vec![8], vec![4, 4]] {
        assert!(t.contains(&ctx), "{ctx:?} missing");
    }
}

fn cycle_tree() -> ContextTree {
    let e = 20;
    ContextTree::from_entries(
        Alphabet::new(21),
        3,
        None,
        None,
        vec![
            entry(&[], &[(4, 3), (e, 1)]),
            entry(&[e], &[(4, 1)]),
            entry(&[4], &[(4, 2), (e, 1)]),
            entry(&[4, 4], &[(4, 1), (e, 1)]),
            entry(&[e, 4], &[(4, 1)]),
            entry(&[4, 4, 4], &[(e, 1)]),
            entry(&[e, 4, 4], &[(4, 1)]),
        ],
    )
    .unwrap()
}

#[test]
fn deterministic_generation() {
    for coda in generate(&cycle_tree(), 50, 3).unwrap() {
        assert_eq!(coda, vec![4, 4, 4, 20]);
    }
}

#[test]
fn generation_is_seeded() {
    let (a, _) = two_clan_sources();
    let s = a.sample_stream(5000, &mut ChaCha8Rng::seed_from_u64(0));
    let t = fit(&SymbolStream::new(a.alphabet(), s).unwrap(), &FitConfig::default()).unwrap();
    assert_eq!(generate(&t, 100, 5).unwrap(), generate(&t, 100, 5).unwrap());
    assert_ne!(generate(&t, 100, 5).unwrap(), generate(&t, 100, 6).unwrap());
}

#[test]
fn generation_cap() {
    let t = tree_from(21, 1, &[(&[], &[(4, 5)])]);
    assert!(matches!(generate(&t, 1, 0), Err(crate::Error::GenerationCap(200))));
}

#[test]
fn generated_frequencies_match_tree() {
    let (a, _) = two_clan_sources();
    let s = a.sample_stream(20_000, &mut ChaCha8Rng::seed_from_u64(8));
    let t = fit(&SymbolStream::new(a.alphabet(), s).unwrap(), &FitConfig::default()).unwrap();
    let codas = generate(&t, 10_000, 77).unwrap();
    let mut history = vec![20];
    let mut seen: HashMap<Vec<Symbol>, BTreeMap<Symbol, u64>> = HashMap::new();
    for x in codas.into_iter().flatten() {
        let ctx = t.context_lookup(&history).context().to_vec();
        *seen.entry(ctx).or_default().entry(x).or_default() += 1;
        history.push(x);
    }
    for (ctx, counts) in seen {
        let node = t.get(&ctx).unwrap();
        let n: u64 = counts.values().sum();
        for &(x, _) in node.child_counts() {
            let p = node.probability(x);
            let observed = *counts.get(&x).unwrap_or(&0) as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((observed - p).abs() <= 3.0 * sd, "{ctx:?} -> {x}");
        }
        assert!(counts.keys().all(|&x| node.next_count(x) > 0));
    }
}

#[test]
fn classify_rules() {
    let det = cycle_tree();
    let uniform = tree_from(21, 1, &[(&[], &(0..21).map(|s| (s, 1)).collect::<Vec<_>>())]);
    let models: BTreeMap<String, ContextTree> =
        [("A".to_string(), det.clone()), ("B".to_string(), uniform)].into();
    assert_eq!(classify(&[4, 4, 4, 20], &models).unwrap(), "A");

    let twins: BTreeMap<String, ContextTree> =
        [("y".to_string(), det.clone()), ("x".to_string(), det.clone())].into();
    assert_eq!(classify(&[4, 20], &twins).unwrap(), "x");

    let one: BTreeMap<String, ContextTree> = [("A".to_string(), det.clone())].into();
    assert!(classify(&[4, 20], &one).is_err());

    let other = tree_from(5, 1, &[(&[], &[(0, 1), (4, 1)])]);
    let mixed: BTreeMap<String, ContextTree> =
        [("A".to_string(), det), ("B".to_string(), other)].into();
    assert!(matches!(
        classify(&[4, 20], &mixed),
        Err(crate::Error::AlphabetMismatch(..))
    ));
}

/// Clan A favours 4 after 4, clan B favours 8 after 8.
fn separated_sources() -> (SourceModel, SourceModel) {
    let e = 20;
    let a = SourceModel::new(
        Alphabet::new(21),
        [
            (vec![], vec![(4, 0.5), (8, 0.2), (e, 0.3)]),
            (vec![e], vec![(4, 0.85), (8, 0.15)]),
            (vec![4], vec![(4, 0.6), (8, 0.1), (e, 0.3)]),
            (vec![8], vec![(4, 0.5), (8, 0.1), (e, 0.4)]),
        ],
    )
    .unwrap();
    let b = SourceModel::new(
        Alphabet::new(21),
        [
            (vec![], vec![(4, 0.2), (8, 0.5), (e, 0.3)]),
            (vec![e], vec![(4, 0.15), (8, 0.85)]),
            (vec![4], vec![(4, 0.1), (8, 0.5), (e, 0.4)]),
            (vec![8], vec![(4, 0.1), (8, 0.6), (e, 0.3)]),
        ],
    )
    .unwrap();
    (a, b)
}

#[test]
fn classify_separated_clans() {
    let (a, b) = separated_sources();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut models = BTreeMap::new();
    for (label, src) in [("A", &a), ("B", &b)] {
        let codas = src.sample_codas(3000, &mut rng).unwrap();
        let s = SymbolStream::from_codas(src.alphabet(), codas.iter().map(Vec::as_slice)).unwrap();
        models.insert(label.to_string(), fit(&s, &FitConfig::default()).unwrap());
    }
    let mut correct = 0;
    for (label, src) in [("A", &a), ("B", &b)] {
        for coda in src.sample_codas(1000, &mut rng).unwrap() {
            correct += usize::from(classify(&coda, &models).unwrap() == label);
        }
    }
    let acc = correct as f64 / 2000.0;
    assert!(acc >= 0.85, "accuracy {acc}");
}

#[test]
fn json_round_trip_exact() {
    let (a, _) = two_clan_sources();
    let s = a.sample_stream(3000, &mut ChaCha8Rng::seed_from_u64(2));
    let mut t = fit(&SymbolStream::new(a.alphabet(), s).unwrap(), &FitConfig::default()).unwrap();
    t.set_discretization(Some(crate::tokenize::DiscretizationConfig::default()));
    let mut buf = Vec::new();
    write_tree(&t, &mut buf).unwrap();
    let back = read_tree(buf.as_slice()).unwrap();
    assert_eq!(back, t);
    let doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(doc["alphabet_size"], 21);
    assert_eq!(doc["D"], 10);
    assert!(doc["contexts"][0]["child_counts"].is_object());
}

#[test]
fn load_missing_tree() {
    assert!(matches!(
        load_tree("/nonexistent/tree.json"),
        Err(crate::Error::MissingFile(_))
    ));
}

fn arb_stream() -> impl Strategy<Value = (usize, Vec<Symbol>, usize)> {
    (2usize..=4, 2usize..=200, 1usize..=5).prop_flat_map(|(n, len, d)| {
        (
            Just(n),
            proptest::collection::vec(0..n as Symbol, len),
            Just(d),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn saturated_counts_match_position_scan((n, s, d) in arb_stream()) {
        let t = count_subsequences(&stream(n, &s), d).unwrap();
        for node in t.nodes() {
            prop_assert_eq!(node.count(), scan_count(&s, node.context(), None));
            let total: u64 = node.child_counts().iter().map(|c| c.1).sum();
            prop_assert_eq!(node.count(), total);
            for &(x, c) in node.child_counts() {
                prop_assert_eq!(c, scan_count(&s, node.context(), Some(x)));
            }
        }
    }

    #[test]
    fn counts_bounded_by_parent((n, s, d) in arb_stream()) {
        let t = count_subsequences(&stream(n, &s), d).unwrap();
        for node in t.nodes().iter().skip(1) {
            let parent = t.parent_of(node).unwrap();
            prop_assert_eq!(parent.context(), &node.context()[1..]);
            for &(x, c) in node.child_counts() {
                prop_assert!(c <= parent.next_count(x));
            }
        }
        for (_, g) in t.gains() {
            prop_assert!(g >= 0.0 && g.is_finite());
        }
    }

    #[test]
    fn fitted_tree_is_suffix_closed((n, s, d) in arb_stream(), k in 0.0f64..5.0) {
        let t = fit(&stream(n, &s), &FitConfig::default().with_max_depth(d).with_threshold(k)).unwrap();
        let set = contexts(&t);
        prop_assert!(set.contains(&Vec::new()));
        for w in &set {
            prop_assert!(w.len() <= d);
            for i in 0..w.len() {
                prop_assert!(set.contains(&w[i + 1..].to_vec()));
            }
        }
    }

    #[test]
    fn pruning_is_monotone((n, s, d) in arb_stream(), k1 in 0.0f64..5.0, dk in 0.0f64..5.0) {
        let saturated = count_subsequences(&stream(n, &s), d).unwrap();
        let low = contexts(&prune(&saturated, k1));
        let high = contexts(&prune(&saturated, k1 + dk));
        prop_assert!(high.is_subset(&low));
        prop_assert!(low.is_subset(&contexts(&saturated)));
        let scaled = contexts(&prune(&saturated.with_scaled_counts(2), k1));
        prop_assert!(low.is_subset(&scaled));
    }

    #[test]
    fn json_round_trip((n, s, d) in arb_stream(), k in 0.0f64..3.0) {
        let t = fit(&stream(n, &s), &FitConfig::default().with_max_depth(d).with_threshold(k)).unwrap();
        let mut buf = Vec::new();
        write_tree(&t, &mut buf).unwrap();
        prop_assert_eq!(read_tree(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn lookup_returns_longest_context((n, s, d) in arb_stream(), h in proptest::collection::vec(0u16..4, 0..8)) {
        let t = fit(&stream(n, &s), &FitConfig::default().with_max_depth(d).with_threshold(0.5)).unwrap();
        let h: Vec<Symbol> = h.into_iter().map(|x| x % n as Symbol).collect();
        let found = t.context_lookup(&h).context().to_vec();
        prop_assert!(h.ends_with(&found));
        let longest = (0..=h.len().min(d)).rev()
            .find(|&l| t.contains(&h[h.len() - l..]))
            .unwrap();
        prop_assert_eq!(found.len(), longest);
    }
}
