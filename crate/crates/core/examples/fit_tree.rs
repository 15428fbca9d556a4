//! Fit a context tree to one planted clan and inspect it.
//!
//! cargo run --example fit_tree

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subcoda::planted::{symbols_to_icis, two_clan_sources};
use subcoda::tokenize::{encode_icis, DiscretizationConfig, SymbolStream};
use subcoda::vlmc::{self, FitConfig};

fn main() -> subcoda::Result<()> {
    let disc = DiscretizationConfig::default();
    let (source, _) = two_clan_sources();
    let codas = source.sample_codas(2000, &mut ChaCha8Rng::seed_from_u64(1))?;

    // Round-trip through intervals, the way recorded data arrives.
    let icis: Vec<Vec<f64>> = codas.iter().map(|c| symbols_to_icis(c, &disc)).collect();
    let encoded = icis.iter().map(|c| encode_icis(c, &disc)).collect::<subcoda::Result<Vec<_>>>()?;
    let stream = SymbolStream::from_codas(disc.alphabet(), encoded.iter().map(Vec::as_slice))?;

    let tree = vlmc::fit(&stream, &FitConfig::default())?;
    println!(
        "{} symbols, {} contexts kept, depth {}, K = {:.3}",
        stream.len(),
        tree.len(),
        tree.depth(),
        tree.threshold().unwrap_or_default()
    );
    for node in tree.nodes() {
        let mut next: Vec<_> = node
            .child_counts()
            .iter()
            .map(|&(x, _)| format!("{x}:{:.2}", node.probability(x)))
            .collect();
        next.sort();
        println!("  {:?} (n={}) -> {}", node.context(), node.count(), next.join(" "));
    }
    println!("AIC {:.1}", vlmc::aic(&tree, &stream)?);

    let mut json = Vec::new();
    vlmc::write_tree(&tree, &mut json)?;
    println!("serialized tree: {} bytes of JSON", json.len());
    Ok(())
}
