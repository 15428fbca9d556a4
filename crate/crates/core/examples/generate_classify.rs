//! Train per-clan trees, generate synthetic codas, and classify both
//! held-out and synthetic codas by likelihood.
//!
//! cargo run --release --example generate_classify

use subcoda::pipeline::{run_generate_and_classify, run_generate, RunConfig};
use subcoda::planted::{overlapping_clan_sources, planted_dataset, PlantedClan};
use subcoda::tokenize::DiscretizationConfig;
use subcoda::vlmc::{self, FitConfig};

fn main() -> subcoda::Result<()> {
    let disc = DiscretizationConfig::default();
    let (a, b) = overlapping_clan_sources();
    let data = planted_dataset(
        &[
            PlantedClan { label: "A", source: &a, samples: 10, codas_per_sample: 300 },
            PlantedClan { label: "B", source: &b, samples: 10, codas_per_sample: 300 },
        ],
        &disc,
        9,
    )?;
    let cfg = RunConfig { seed: 9, ..RunConfig::default() };
    let report = run_generate_and_classify(&data, &cfg)?;
    for c in &report.clans {
        println!(
            "clan {}: trained on {}, {} / {} held-out correct, {} / {} synthetic correct",
            c.clan, c.n_train, c.real_correct, c.n_test, c.synthetic_correct, c.n_test
        );
    }
    println!(
        "accuracy: held-out {:.3}, synthetic {:.3}",
        report.accuracy_real, report.accuracy_synthetic
    );

    let stream = subcoda::tokenize::encode_records(data.restrict_clan("A").records(), &disc)?;
    let tree = vlmc::fit(&stream, &FitConfig::default())?;
    println!("a few synthetic codas of clan A:");
    for coda in run_generate(&tree, 5, 1)? {
        println!("  symbols [{}]  icis [{}]", coda.symbols, coda.icis);
    }
    Ok(())
}
