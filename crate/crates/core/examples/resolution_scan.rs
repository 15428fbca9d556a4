//! Which bin width exposes the most sequential structure?
//!
//! cargo run --release --example resolution_scan
//!
//! Codas alternate two intervals 20 ms apart, so bins much wider than
//! 20 ms merge them and the context tree loses its advantage over order 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subcoda::ingest::CodaRecord;
use subcoda::markov::resolution_scan;
use subcoda::vlmc::FitConfig;

fn main() -> subcoda::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let records: Vec<CodaRecord> = (0..3000)
        .map(|i| {
            let n = rng.random_range(3..7);
            let start = rng.random_bool(0.5);
            let icis = (0..n)
                .map(|k| if (k % 2 == 0) == start { 0.065 } else { 0.085 })
                .collect();
            CodaRecord {
                coda_id: format!("c{i}"),
                sample_id: "s0".into(),
                unit_id: None,
                clan: None,
                coda_type: None,
                id_flag: None,
                icis,
            }
        })
        .collect();
    let widths = [0.01, 0.02, 0.05, 0.1, 0.2];
    let scan = resolution_scan(&records, &widths, 1.0, &FitConfig::default())?;
    println!("delta_t  alphabet  AIC tree    AIC order0  difference");
    for r in &scan.rows {
        println!(
            "{:<7}  {:>8}  {:>10.1}  {:>10.1}  {:>10.1}",
            r.delta_t, r.alphabet_size, r.aic_vlmc, r.aic_order0, r.difference
        );
    }
    println!("best delta_t: {}", scan.best_delta_t);
    Ok(())
}
