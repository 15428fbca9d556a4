use super::*;
use crate::ingest::write_dataset;
use crate::planted::{
    overlap_dataset, pacific_overlap, planted_dataset, two_clan_sources, PlantedClan, SourceModel,
};

const E: Symbol = 20;

fn cfg_in(dir: &Path, name: &str) -> RunConfig {
    RunConfig {
        min_codas: 50,
        seed: 7,
        out: dir.join(name),
        ..RunConfig::default()
    }
}

fn two_clans(samples: usize, codas: usize, seed: u64) -> Dataset {
    let (a, b) = two_clan_sources();
    planted_dataset(
        &[
            PlantedClan { label: "A", source: &a, samples, codas_per_sample: codas },
            PlantedClan { label: "B", source: &b, samples, codas_per_sample: codas },
        ],
        &DiscretizationConfig::default(),
        seed,
    )
    .unwrap()
}

fn fixed_coda_source(symbol: Symbol) -> SourceModel {
    SourceModel::new(
        DiscretizationConfig::default().alphabet(),
        [
            (vec![], vec![(symbol, 0.5), (E, 0.5)]),
            (vec![E], vec![(symbol, 1.0)]),
            (vec![symbol], vec![(E, 1.0)]),
        ],
    )
    .unwrap()
}

fn save(dataset: &Dataset, path: &Path) {
    write_dataset(dataset, File::create(path).unwrap()).unwrap();
}

#[test]
fn run_config_round_trips_through_json() {
    let cfg = RunConfig {
        threshold: Threshold::Value(3.5),
        ..RunConfig::default()
    }
    .with_option("grouping", Grouping::Unit);
    let text = serde_json::to_string(&cfg).unwrap();
    assert!(text.contains("\"grouping\":\"unit\""));
    assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    let auto = serde_json::to_string(&RunConfig::default()).unwrap();
    assert!(auto.contains("\"threshold\":\"auto\""));
}

#[test]
fn run_config_validation() {
    assert!(RunConfig::default().validate().is_ok());
    let bad = RunConfig {
        delta_t: 0.0,
        ..RunConfig::default()
    };
    assert!(matches!(bad.validate(), Err(Error::InvalidInterval(_)) | Err(Error::InvalidConfig(_))));
}

#[test]
fn clan_grouping_gives_one_tree_per_clan() {
    let data = two_clans(3, 100, 1);
    let cfg = RunConfig {
        min_codas: 50,
        ..RunConfig::default()
    };
    let (fitted, skipped) = fit_groups(&data, Grouping::Clan, &cfg).unwrap();
    assert_eq!(fitted.len(), 2);
    assert!(skipped.is_empty());
    assert_eq!(fitted[0].label, "A");
    assert_eq!(fitted[0].n_codas, 300);
    let (by_sample, _) = fit_groups(&data, Grouping::Sample, &cfg).unwrap();
    assert_eq!(by_sample.len(), 6);
}

#[test]
fn small_groups_are_skipped_and_empty_data_fails() {
    let data = two_clans(2, 60, 2);
    let cfg = RunConfig {
        min_codas: 100,
        ..RunConfig::default()
    };
    let (fitted, skipped) = fit_groups(&data, Grouping::Clan, &cfg).unwrap();
    assert_eq!(fitted.len(), 2);
    assert!(skipped.is_empty());
    let err = fit_groups(&data, Grouping::Sample, &cfg).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)));

    let empty = Dataset::from_records(Vec::new()).unwrap();
    assert!(fit_groups(&empty, Grouping::Clan, &cfg).is_err());
}

#[test]
fn fit_command_writes_trees_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("codas.csv");
    save(&two_clans(2, 80, 3), &input);
    let cfg = cfg_in(dir.path(), "fit");
    let manifest = cmd_fit(&cfg, &input, Grouping::Sample).unwrap();
    assert_eq!(manifest.groups.len(), 4);
    for entry in &manifest.groups {
        assert!(cfg.out.join(&entry.file).exists());
    }
    assert!(cfg.out.join("run_config.json").exists());
    assert!(cfg.out.join("groups.csv").exists());
    let groups = load_groups(&cfg.out.join("groups.csv")).unwrap();
    assert_eq!(groups["A-s1"], "A");

    let models = load_models(&[cfg.out.clone()]).unwrap();
    assert_eq!(models.len(), 4);
    assert_eq!(models[0].0, "A-s0");
    let single = load_models(&[cfg.out.join(&manifest.groups[2].file)]).unwrap();
    assert_eq!(single[0].0, "B-s0");
    assert_eq!(single[0].1, models[2].1);
}

#[test]
fn failed_command_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cfg_in(dir.path(), "nested/out");
    let err = cmd_fit(&cfg, &dir.path().join("missing.csv"), Grouping::Sample).unwrap_err();
    assert!(matches!(err, Error::MissingFile(_)));
    assert!(!dir.path().join("nested").exists());

    // A pre-existing directory survives, but nothing is left inside it.
    let input = dir.path().join("codas.csv");
    save(&two_clans(1, 20, 1), &input);
    let cfg = cfg_in(dir.path(), "existing");
    fs::create_dir(&cfg.out).unwrap();
    assert!(cmd_fit(&cfg, &input, Grouping::Sample).is_err());
    assert_eq!(fs::read_dir(&cfg.out).unwrap().count(), 0);
}

#[test]
fn clan_recovery_on_planted_clans() {
    let data = two_clans(6, 300, 11);
    let cfg = RunConfig {
        min_codas: 100,
        ..RunConfig::default()
    };
    let r = run_clan_recovery(&data, Grouping::Sample, &cfg).unwrap();
    assert_eq!(r.report.k, 2);
    assert_eq!(r.report.ari, 1.0);
    assert!(r.report.comparison.ks.p_value < 0.01);
    assert!(r.report.comparison.mean_within < r.report.comparison.mean_between);
    assert_eq!(r.report.comparison.n_within, 2 * 15);
    assert_eq!(r.report.comparison.n_between, 36);
}

#[test]
fn clan_recovery_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("codas.csv");
    save(&two_clans(4, 120, 5), &input);
    let first = cfg_in(dir.path(), "one");
    let second = cfg_in(dir.path(), "two");
    cmd_pipeline_clan_recovery(&first, &input, Grouping::Sample).unwrap();
    cmd_pipeline_clan_recovery(&second, &input, Grouping::Sample).unwrap();
    for name in ["distance.csv", "dendrogram.json", "dendrogram.nwk", "report.json"] {
        let a = fs::read(first.out.join(name)).unwrap();
        let b = fs::read(second.out.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn clan_recovery_needs_two_clans() {
    let (a, _) = two_clan_sources();
    let data = planted_dataset(
        &[PlantedClan { label: "A", source: &a, samples: 3, codas_per_sample: 60 }],
        &DiscretizationConfig::default(),
        1,
    )
    .unwrap();
    let cfg = RunConfig {
        min_codas: 10,
        ..RunConfig::default()
    };
    assert!(matches!(
        run_clan_recovery(&data, Grouping::Sample, &cfg),
        Err(Error::InsufficientData(_))
    ));
}

#[test]
fn dist_cluster_and_within_between_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("codas.csv");
    save(&two_clans(3, 200, 8), &input);
    let fit = cfg_in(dir.path(), "fit");
    cmd_fit(&fit, &input, Grouping::Sample).unwrap();

    let dist = cfg_in(dir.path(), "dist");
    let m = cmd_dist(&dist, &[fit.out.clone()], Mode::Symmetric).unwrap();
    assert_eq!(m.len(), 6);
    let matrix = dist.out.join("distance.csv");
    assert_eq!(load_matrix(&matrix).unwrap(), m);

    let groups = fit.out.join("groups.csv");
    let cl = cfg_in(dir.path(), "cluster");
    let report = cmd_cluster(&cl, &matrix, Some(2), Some(&groups)).unwrap();
    assert_eq!(report.ari, Some(1.0));
    assert!(cl.out.join("clusters.csv").exists());
    assert!(cl.out.join("dendrogram.nwk").exists());

    let wb = cfg_in(dir.path(), "wb");
    let cmp = cmd_within_between(&wb, &matrix, &groups).unwrap();
    assert_eq!(cmp.n_within, 6);
    assert_eq!(cmp.n_between, 9);
    let rows = fs::read_to_string(wb.out.join("within_between.csv")).unwrap();
    assert_eq!(rows.lines().count(), 16);

    let asym = cfg_in(dir.path(), "asym");
    let m = cmd_dist(&asym, &[fit.out.clone()], Mode::Asymmetric).unwrap();
    assert!(!m.is_symmetric());
    assert!(cmd_cluster(&cfg_in(dir.path(), "bad"), &asym.out.join("distance.csv"), None, None).is_err());
}

#[test]
fn overlap_regression_follows_planted_convergence() {
    let table = pacific_overlap();
    let data = overlap_dataset(&table, 6000, 0.3, &DiscretizationConfig::default(), 0).unwrap();
    let cfg = RunConfig {
        min_codas: 200,
        seed: 3,
        ..RunConfig::default()
    };
    let nonid = run_regress_overlap(&data, &table, CodaSubset::Nonid, false, &cfg).unwrap();
    assert_eq!(nonid.overall.n_pairs, 42);
    assert!(nonid.overall.slope < 0.0);
    assert!(nonid.overall.p_value < 0.05);
    assert!(nonid.overall.ci.upper < 0.0);

    let id = run_regress_overlap(&data, &table, CodaSubset::Id, false, &cfg).unwrap();
    assert!(id.overall.ci.contains(0.0), "{:?}", id.overall.ci);
}

#[test]
fn overlap_regression_by_coda_type_skips_rare_types() {
    let table = pacific_overlap();
    let data = overlap_dataset(&table, 2000, 0.3, &DiscretizationConfig::default(), 4).unwrap();
    let cfg = RunConfig {
        min_codas: 100,
        ..RunConfig::default()
    };
    let all = run_regress_overlap(&data, &table, CodaSubset::All, true, &cfg).unwrap();
    let types = all.by_type.as_ref().unwrap();
    assert_eq!(types.len(), 6);
    assert!(types.iter().all(|t| t.coda_type.starts_with('t') && t.clans.len() == 7));
    assert_eq!(all.skipped_types.len(), 7);
    assert!(all.skipped_types.iter().all(|t| t.starts_with("id-")));
}

#[test]
fn overlap_regression_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let table = pacific_overlap();
    let mut data = overlap_dataset(&table, 300, 0.3, &DiscretizationConfig::default(), 4).unwrap();
    data.samples[0].records[0].id_flag = None;
    let input = dir.path().join("codas.csv");
    save(&data, &input);
    let cfg = cfg_in(dir.path(), "reg");
    let err = cmd_regress_overlap(&cfg, &input, &dir.path().join("none.csv"), CodaSubset::All, false).unwrap_err();
    assert!(matches!(err, Error::MissingFile(_)));
    assert!(!cfg.out.exists());

    let cfg = RunConfig {
        min_codas: 10,
        ..RunConfig::default()
    };
    let err = run_regress_overlap(&data, &table, CodaSubset::Nonid, false, &cfg).unwrap_err();
    assert!(matches!(err, Error::MissingAnnotation(_)));
    assert!(run_regress_overlap(&data, &table, CodaSubset::All, false, &cfg).is_ok());
}

#[test]
fn regress_overlap_command_writes_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = dir.path().join("overlap.csv");
    fs::write(&table_path, include_str!("../../data/pacific_overlap.csv")).unwrap();
    let input = dir.path().join("codas.csv");
    save(
        &overlap_dataset(&pacific_overlap(), 800, 0.3, &DiscretizationConfig::default(), 9).unwrap(),
        &input,
    );
    let cfg = cfg_in(dir.path(), "reg");
    cmd_regress_overlap(&cfg, &input, &table_path, CodaSubset::Nonid, true).unwrap();
    let pairs = fs::read_to_string(cfg.out.join("pairs.csv")).unwrap();
    assert_eq!(pairs.lines().next().unwrap(), "clan_a,clan_b,overlap,distance");
    assert_eq!(pairs.lines().count(), 43);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.out.join("summary.json")).unwrap()).unwrap();
    for key in ["slope", "r_squared", "p_value", "ci"] {
        assert!(summary.get(key).is_some(), "summary lacks {key}");
    }
    assert!(cfg.out.join("pairs_by_type.csv").exists());
}

#[test]
fn deterministic_clans_classify_perfectly() {
    let a = fixed_coda_source(4);
    let b = fixed_coda_source(9);
    let data = planted_dataset(
        &[
            PlantedClan { label: "A", source: &a, samples: 2, codas_per_sample: 100 },
            PlantedClan { label: "B", source: &b, samples: 2, codas_per_sample: 100 },
        ],
        &DiscretizationConfig::default(),
        3,
    )
    .unwrap();
    let cfg = RunConfig {
        min_codas: 50,
        ..RunConfig::default()
    };
    let r = run_generate_and_classify(&data, &cfg).unwrap();
    assert_eq!(r.accuracy_real, 1.0);
    assert_eq!(r.accuracy_synthetic, 1.0);
    assert_eq!(r.clans[0].n_test, 40);
    assert_eq!(r.clans[0].n_train, 160);
    assert_eq!(r.predictions.len(), 160);
}

#[test]
fn split_is_seeded() {
    let data = two_clans(2, 150, 4);
    let cfg = RunConfig {
        min_codas: 50,
        ..RunConfig::default()
    };
    let first = run_generate_and_classify(&data, &cfg).unwrap();
    assert_eq!(first, run_generate_and_classify(&data, &cfg).unwrap());
    let other = RunConfig { seed: 1, ..cfg };
    let second = run_generate_and_classify(&data, &other).unwrap();
    let ids = |r: &GenerateClassifyReport| -> Vec<String> {
        r.predictions.iter().filter(|p| p.kind == "real").map(|p| p.coda_id.clone()).collect()
    };
    assert_ne!(ids(&first), ids(&second));
}

#[test]
fn single_clan_cannot_be_classified() {
    let a = fixed_coda_source(4);
    let data = planted_dataset(
        &[PlantedClan { label: "A", source: &a, samples: 1, codas_per_sample: 100 }],
        &DiscretizationConfig::default(),
        3,
    )
    .unwrap();
    let cfg = RunConfig {
        min_codas: 10,
        ..RunConfig::default()
    };
    assert!(matches!(
        run_generate_and_classify(&data, &cfg),
        Err(Error::InsufficientData(_))
    ));
}

#[test]
fn generate_and_classify_commands() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("codas.csv");
    save(&two_clans(2, 100, 6), &input);
    let fit = cfg_in(dir.path(), "fit");
    let manifest = cmd_fit(&fit, &input, Grouping::Clan).unwrap();

    let gen = cfg_in(dir.path(), "gen");
    let tree_file = fit.out.join(&manifest.groups[0].file);
    let codas = cmd_generate(&gen, &tree_file, 25).unwrap();
    assert_eq!(codas.len(), 25);
    let text = fs::read_to_string(gen.out.join("generated.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "coda_id,symbols,icis");
    assert!(codas.iter().all(|c| c.symbols.ends_with("20")));
    assert_eq!(codas, cmd_generate(&cfg_in(dir.path(), "gen2"), &tree_file, 25).unwrap());

    let cls = cfg_in(dir.path(), "cls");
    let summary = cmd_classify(&cls, &input, &[fit.out.clone()]).unwrap();
    assert_eq!(summary.n_codas, 400);
    assert!(summary.accuracy.unwrap() > 0.6);

    let gc = cfg_in(dir.path(), "gc");
    let report = cmd_generate_and_classify(&gc, &input).unwrap();
    assert!(report.accuracy_real > 0.5);
    assert!(gc.out.join("predictions.csv").exists());
}

#[test]
fn scans_per_sample_and_pooled() {
    let data = two_clans(2, 150, 12);
    let cfg = RunConfig {
        min_codas: 100,
        ..RunConfig::default()
    };
    let pooled = run_markov_scan(&data, ScanScope::Pooled, 0, 3, &cfg).unwrap();
    assert_eq!(pooled.len(), 1);
    assert_eq!(pooled[0].0, "pooled");
    assert_eq!(pooled[0].1.rows.len(), 4);
    let per = run_markov_scan(&data, ScanScope::Sample, 0, 2, &cfg).unwrap();
    assert_eq!(per.len(), 4);

    let res = run_resolution_scan(&data, ScanScope::Sample, &[0.05, 0.1], &cfg).unwrap();
    assert_eq!(res.len(), 4);
    assert_eq!(res[0].1.rows[1].alphabet_size, 11);
}

#[test]
fn scan_commands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("codas.csv");
    save(&two_clans(2, 100, 2), &input);
    let ms = cfg_in(dir.path(), "ms");
    cmd_markov_scan(&ms, &input, ScanScope::Sample, 0, 2).unwrap();
    let text = fs::read_to_string(ms.out.join("markov_scan.csv")).unwrap();
    assert!(text.starts_with("group,h,mean_probability,"));
    assert_eq!(text.lines().count(), 1 + 4 * 3);

    let rs = cfg_in(dir.path(), "rs");
    cmd_resolution_scan(&rs, &input, ScanScope::Pooled, &[0.05, 0.1, 0.2]).unwrap();
    let text = fs::read_to_string(rs.out.join("resolution_scan.csv")).unwrap();
    assert!(text.starts_with("group,delta_t,alphabet_size,aic_vlmc,aic_order0,difference"));
    assert_eq!(text.lines().count(), 4);
}

