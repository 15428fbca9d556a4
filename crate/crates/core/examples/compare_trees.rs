//! Divergences between trees fitted to two clans and to repeated samples.
//!
//! cargo run --example compare_trees

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subcoda::metric::{distance_matrix, divergence, symmetric_distance, Mode};
use subcoda::planted::two_clan_sources;
use subcoda::tokenize::{Alphabet, SymbolStream};
use subcoda::vlmc::{self, ContextTree, FitConfig};

fn fit_sample(source: &subcoda::planted::SourceModel, seed: u64) -> subcoda::Result<ContextTree> {
    let codas = source.sample_codas(1000, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let alphabet: Alphabet = source.alphabet();
    let stream = SymbolStream::from_codas(alphabet, codas.iter().map(Vec::as_slice))?;
    vlmc::fit(&stream, &FitConfig::default())
}

fn main() -> subcoda::Result<()> {
    let (a, b) = two_clan_sources();
    let trees = vec![
        ("A1".to_string(), fit_sample(&a, 1)?),
        ("A2".to_string(), fit_sample(&a, 2)?),
        ("B1".to_string(), fit_sample(&b, 3)?),
        ("B2".to_string(), fit_sample(&b, 4)?),
    ];
    let (a1, b1) = (&trees[0].1, &trees[2].1);
    println!("D(A1 || B1) = {:.4}", divergence(a1, b1)?);
    println!("D(B1 || A1) = {:.4}", divergence(b1, a1)?);
    println!("symmetric   = {:.4}", symmetric_distance(a1, b1)?);
    println!("D(A1 || A1) = {:.4}  (smoothing bias)", divergence(a1, a1)?);

    let m = distance_matrix(&trees, Mode::Symmetric)?;
    println!();
    let mut csv = Vec::new();
    subcoda::metric::write_matrix(&m, &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
