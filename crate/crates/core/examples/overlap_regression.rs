//! Style distance against spatial overlap for seven planted clans.
//!
//! cargo run --release --example overlap_regression
//!
//! Non-identity codas of each clan mix in the styles of the clans it
//! overlaps with; identity codas do not.

use subcoda::pipeline::{run_regress_overlap, CodaSubset, RunConfig};
use subcoda::planted::{overlap_dataset, pacific_overlap};
use subcoda::tokenize::DiscretizationConfig;

fn main() -> subcoda::Result<()> {
    let table = pacific_overlap();
    let data = overlap_dataset(&table, 6000, 0.3, &DiscretizationConfig::default(), 0)?;
    let cfg = RunConfig { seed: 1, ..RunConfig::default() };
    for subset in [CodaSubset::Nonid, CodaSubset::Id] {
        let r = run_regress_overlap(&data, &table, subset, false, &cfg)?;
        let o = &r.overall;
        println!(
            "{subset:?}: slope {:.4} (p = {:.3}), r2 {:.3}, 95% CI [{:.4}, {:.4}], Spearman {:.2}",
            o.slope, o.p_value, o.r_squared, o.ci.lower, o.ci.upper, o.spearman.coefficient
        );
    }

    let by_type = run_regress_overlap(&data, &table, CodaSubset::Nonid, true, &cfg)?;
    println!("per coda type (skipped: {:?})", by_type.skipped_types);
    for t in by_type.by_type.unwrap_or_default() {
        match t.regression {
            Some(r) => println!("  {}: slope {:.4}, p {:.3}", t.coda_type, r.slope, r.p_value),
            None => println!("  {}: {}", t.coda_type, t.note.unwrap_or_default()),
        }
    }
    Ok(())
}
