//! Commands behind the `subcoda` binary.
//!
//! The `run_*` functions compute reports from in-memory data. The `cmd_*`
//! functions load their inputs, write every artifact plus `run_config.json`
//! into the output directory, and delete what they wrote if anything fails.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{adjusted_rand_index, ari_sweep, average_linkage, cut, AriSweep, Dendrogram};
use crate::error::{Error, Result};
use crate::ingest::{load_dataset, load_overlap_matrix, partition_id_nonid, CodaRecord, Dataset, Grouping, OverlapMatrix};
use crate::markov::{resolution_scan, scan_orders, OrderScanReport, ResolutionScan};
use crate::metric::{distance_matrix, load_matrix, symmetric_distance, write_matrix, DistanceMatrix, Mode};
use crate::planted::symbols_to_icis;
use crate::stats::{
    bootstrap_slope_ci, cohens_d, ks_two_sample, ols, pearson, spearman, welch_t_test, within_between,
    BootstrapCI, Correlation, RegressionResult, TestResult, DEFAULT_LEVEL, DEFAULT_RESAMPLES,
};
use crate::tokenize::{encode_coda, encode_records, DiscretizationConfig, Symbol};
use crate::vlmc::{self, classify, generate, load_tree, read_tree, ContextTree, FitConfig, Threshold};

/// Fraction of each clan's codas held out by [`run_generate_and_classify`].
pub const TEST_FRACTION: f64 = 0.2;

/// Minimum number of clans that must utter a coda type for it to enter the
/// per-type overlap regression.
pub const MIN_CLANS_PER_TYPE: usize = 3;

/// Resolved parameters of one command, written as `run_config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub delta_t: f64,
    pub t_max: f64,
    pub depth: usize,
    pub threshold: Threshold,
    pub min_codas: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Command-specific settings.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, serde_json::Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let disc = DiscretizationConfig::default();
        RunConfig {
            command: String::new(),
            inputs: Vec::new(),
            delta_t: disc.delta_t,
            t_max: disc.t_max,
            depth: vlmc::DEFAULT_MAX_DEPTH,
            threshold: Threshold::Auto,
            min_codas: 200,
            seed: 0,
            out: PathBuf::from("out"),
            options: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn discretization(&self) -> Result<DiscretizationConfig> {
        DiscretizationConfig::new(self.delta_t, self.t_max)
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        Ok(FitConfig {
            max_depth: self.depth,
            threshold: self.threshold,
            discretization: Some(self.discretization()?),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.discretization()?;
        if let Threshold::Value(k) = self.threshold {
            if !(k >= 0.0) {
                return Err(Error::InvalidConfig(format!("threshold must be >= 0, got {k}")));
            }
        }
        Ok(())
    }

    pub fn with_option(mut self, key: &str, value: impl Serialize) -> Self {
        let value = serde_json::to_value(value).expect("option serializes");
        self.options.insert(key.to_string(), value);
        self
    }
}

/// Files written by one command. Dropping the guard without calling
/// [`OutputDir::keep`] removes them again.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    keep: bool,
}

impl OutputDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let mut out = OutputDir {
            root: root.clone(),
            files: Vec::new(),
            dirs: Vec::new(),
            keep: false,
        };
        out.make_dir(&root)?;
        Ok(out)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn make_dir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir)?;
        missing.reverse();
        self.dirs.extend(missing);
        Ok(())
    }

    /// Path of `name` under the output root, registered for cleanup.
    pub fn path(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            let parent = parent.to_path_buf();
            self.make_dir(&parent)?;
        }
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn create_file(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name)?;
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create_file(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let mut w = self.create_file(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn csv_writer(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(self.create_file(name)?))
    }

    pub fn keep(mut self) {
        self.keep = true;
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.keep {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

/// Runs `body` against a fresh output directory and writes the config next
/// to its artifacts. On error everything written is removed.
pub fn with_output<T>(cfg: &RunConfig, body: impl FnOnce(&mut OutputDir) -> Result<T>) -> Result<T> {
    cfg.validate()?;
    let mut out = OutputDir::create(&cfg.out)?;
    out.write_json("run_config.json", cfg)?;
    let value = body(&mut out)?;
    out.keep();
    Ok(value)
}

fn derived_seed(seed: u64, tag: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 32) | index as u64);
    rng.next_u64()
}

fn write_rows<T: Serialize>(out: &mut OutputDir, name: &str, rows: &[T]) -> Result<()> {
    let mut w = out.csv_writer(name)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- fitting

#[derive(Debug, Clone, PartialEq)]
pub struct FittedGroup {
    pub label: String,
    pub clan: Option<String>,
    pub n_codas: usize,
    pub tree: ContextTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub label: String,
    pub n_codas: usize,
}

fn fit_records(records: &[CodaRecord], cfg: &RunConfig) -> Result<ContextTree> {
    let fit = cfg.fit_config()?;
    let disc = cfg.discretization()?;
    vlmc::fit(&encode_records(records, &disc)?, &fit)
}

/// One tree per group, sorted by label. Groups with fewer than
/// `cfg.min_codas` codas are skipped with a warning.
pub fn fit_groups(
    dataset: &Dataset,
    grouping: Grouping,
    cfg: &RunConfig,
) -> Result<(Vec<FittedGroup>, Vec<SkippedGroup>)> {
    if dataset.n_codas() == 0 {
        return Err(Error::InsufficientData("dataset has no codas".into()));
    }
    let mut groups = dataset.groups(grouping)?;
    groups.sort_by(|a, b| a.label.cmp(&b.label));
    let (keep, drop): (Vec<_>, Vec<_>) = groups.into_iter().partition(|g| g.records.len() >= cfg.min_codas);
    let skipped: Vec<SkippedGroup> = drop
        .into_iter()
        .map(|g| {
            log::warn!(
                "skipping group {} with {} codas (< {})",
                g.label,
                g.records.len(),
                cfg.min_codas
            );
            SkippedGroup {
                label: g.label,
                n_codas: g.records.len(),
            }
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no group has at least {} codas",
            cfg.min_codas
        )));
    }
    let fitted = keep
        .into_par_iter()
        .map(|g| {
            Ok(FittedGroup {
                tree: fit_records(&g.records, cfg)?,
                n_codas: g.records.len(),
                label: g.label,
                clan: g.clan,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fitted, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub clan: Option<String>,
    pub n_codas: usize,
    pub n_contexts: usize,
    pub depth: usize,
    /// Relative to the manifest's directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub grouping: Grouping,
    pub groups: Vec<ManifestEntry>,
    pub skipped: Vec<SkippedGroup>,
}

fn file_stem_for(label: &str, taken: &mut HashMap<String, usize>) -> String {
    let clean: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    let n = taken.entry(clean.clone()).or_insert(0);
    *n += 1;
    if *n == 1 {
        clean
    } else {
        format!("{clean}-{n}")
    }
}

/// Writes `trees/<label>.json` per group, `manifest.json` and `groups.csv`
/// (label, clan).
pub fn cmd_fit(cfg: &RunConfig, dataset: &Path, grouping: Grouping) -> Result<FitManifest> {
    with_output(cfg, |out| {
        let data = load_dataset(dataset)?;
        let (fitted, skipped) = fit_groups(&data, grouping, cfg)?;
        let mut taken = HashMap::new();
        let mut groups = Vec::with_capacity(fitted.len());
        for g in &fitted {
            let file = format!("trees/{}.json", file_stem_for(&g.label, &mut taken));
            let mut w = out.create_file(&file)?;
            vlmc::write_tree(&g.tree, &mut w)?;
            w.flush()?;
            groups.push(ManifestEntry {
                label: g.label.clone(),
                clan: g.clan.clone(),
                n_codas: g.n_codas,
                n_contexts: g.tree.len(),
                depth: g.tree.depth(),
                file,
            });
        }
        let rows: Vec<GroupRow> = fitted
            .iter()
            .filter_map(|g| {
                g.clan.as_ref().map(|c| GroupRow {
                    label: g.label.clone(),
                    group: c.clone(),
                })
            })
            .collect();
        write_rows(out, "groups.csv", &rows)?;
        let manifest = FitManifest {
            grouping,
            groups,
            skipped,
        };
        out.write_json("manifest.json", &manifest)?;
        Ok(manifest)
    })
}

/// Labelled trees from tree files, fit manifests, or fit output directories.
/// A bare tree file is labelled by its file stem.
pub fn load_models(paths: &[PathBuf]) -> Result<Vec<(String, ContextTree)>> {
    let mut models = Vec::new();
    for path in paths {
        let path = if path.is_dir() {
            path.join("manifest.json")
        } else {
            path.clone()
        };
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        let text = fs::read_to_string(&path)?;
        if let Ok(manifest) = serde_json::from_str::<FitManifest>(&text) {
            let base = path.parent().unwrap_or(Path::new("."));
            for entry in manifest.groups {
                models.push((entry.label, load_tree(base.join(&entry.file))?));
            }
        } else {
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            models.push((label, read_tree(text.as_bytes())?));
        }
    }
    let mut seen = HashMap::new();
    for (label, _) in &models {
        if seen.insert(label.clone(), ()).is_some() {
            return Err(Error::InvalidConfig(format!("model label `{label}` appears twice")));
        }
    }
    Ok(models)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GroupRow {
    label: String,
    group: String,
}

/// Reads a `label,group` CSV into a map.
pub fn load_groups(path: &Path) -> Result<HashMap<String, String>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut map = HashMap::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let row: GroupRow = row?;
        map.insert(row.label, row.group);
    }
    Ok(map)
}

fn labels_for(items: &[String], groups: &HashMap<String, String>) -> Result<Vec<String>> {
    items
        .iter()
        .map(|l| {
            groups
                .get(l)
                .cloned()
                .ok_or_else(|| Error::MissingAnnotation(format!("no group for `{l}`")))
        })
        .collect()
}

// ------------------------------------------------------ distances & groups

/// Summary of within-group against between-group distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub n_within: usize,
    pub n_between: usize,
    pub mean_within: f64,
    pub mean_between: f64,
    pub ks: TestResult,
    pub welch: TestResult,
    pub cohens_d: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn compare_groups<L: PartialEq>(m: &DistanceMatrix, labels: &[L]) -> Result<GroupComparison> {
    let (within, between) = within_between(m, labels)?;
    if within.is_empty() || between.is_empty() {
        return Err(Error::InsufficientData(
            "need at least one within-group and one between-group pair".into(),
        ));
    }
    Ok(GroupComparison {
        n_within: within.len(),
        n_between: between.len(),
        mean_within: mean(&within),
        mean_between: mean(&between),
        ks: ks_two_sample(&within, &between)?,
        welch: welch_t_test(&within, &between)?,
        cohens_d: cohens_d(&within, &between)?,
    })
}

/// Writes `distance.csv` for the given models.
pub fn cmd_dist(cfg: &RunConfig, models: &[PathBuf], mode: Mode) -> Result<DistanceMatrix> {
    with_output(cfg, |out| {
        let trees = load_models(models)?;
        let m = distance_matrix(&trees, mode)?;
        let mut w = out.create_file("distance.csv")?;
        write_matrix(&m, &mut w)?;
        w.flush()?;
        Ok(m)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: Option<usize>,
    pub assignment: Option<Vec<usize>>,
    pub ari: Option<f64>,
    pub sweep: Option<AriSweep>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ClusterRow<'a> {
    label: &'a str,
    cluster: usize,
}

fn write_dendrogram(out: &mut OutputDir, d: &Dendrogram) -> Result<()> {
    out.write_json("dendrogram.json", &d.to_json())?;
    out.write_text("dendrogram.nwk", &format!("{}\n", d.to_newick()))
}

/// Average-linkage dendrogram of a distance matrix. With `k`, also writes
/// `clusters.csv`; with `groups`, scores the cut (and every other cut)
/// against those reference labels.
pub fn cmd_cluster(
    cfg: &RunConfig,
    matrix: &Path,
    k: Option<usize>,
    groups: Option<&Path>,
) -> Result<ClusterReport> {
    with_output(cfg, |out| {
        let m = load_matrix(matrix)?;
        let d = average_linkage(&m)?;
        write_dendrogram(out, &d)?;
        let assignment = k.map(|k| cut(&d, k)).transpose()?;
        if let Some(a) = &assignment {
            let rows: Vec<ClusterRow> = m
                .labels()
                .iter()
                .zip(a)
                .map(|(l, &c)| ClusterRow { label: l, cluster: c })
                .collect();
            write_rows(out, "clusters.csv", &rows)?;
        }
        let reference = groups
            .map(|p| labels_for(m.labels(), &load_groups(p)?))
            .transpose()?;
        let ari = match (&assignment, &reference) {
            (Some(a), Some(r)) => Some(adjusted_rand_index(a, r)?),
            _ => None,
        };
        let sweep = reference.as_ref().map(|r| ari_sweep(&d, r)).transpose()?;
        let report = ClusterReport {
            k,
            assignment,
            ari,
            sweep,
        };
        out.write_json("cluster_report.json", &report)?;
        Ok(report)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct DistanceRow<'a> {
    kind: &'a str,
    distance: f64,
}

/// Writes `within_between.json` and the raw distances as `within_between.csv`.
pub fn cmd_within_between(cfg: &RunConfig, matrix: &Path, groups: &Path) -> Result<GroupComparison> {
    with_output(cfg, |out| {
        let m = load_matrix(matrix)?;
        let labels = labels_for(m.labels(), &load_groups(groups)?)?;
        let report = compare_groups(&m, &labels)?;
        let (within, between) = within_between(&m, &labels)?;
        let rows: Vec<DistanceRow> = within
            .iter()
            .map(|&d| DistanceRow { kind: "within", distance: d })
            .chain(between.iter().map(|&d| DistanceRow { kind: "between", distance: d }))
            .collect();
        write_rows(out, "within_between.csv", &rows)?;
        out.write_json("within_between.json", &report)?;
        Ok(report)
    })
}

// ------------------------------------------------------------ clan recovery

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClanRecoveryReport {
    pub grouping: Grouping,
    pub labels: Vec<String>,
    pub clans: Vec<String>,
    pub k: usize,
    pub assignment: Vec<usize>,
    pub ari: f64,
    pub sweep: AriSweep,
    pub comparison: GroupComparison,
    pub skipped: Vec<SkippedGroup>,
}

#[derive(Debug, Clone)]
pub struct ClanRecovery {
    pub report: ClanRecoveryReport,
    pub matrix: DistanceMatrix,
    pub dendrogram: Dendrogram,
}

/// Fit per group, symmetric distances, average linkage, cut at the number of
/// reference clans, then ARI and the within/between comparison.
pub fn run_clan_recovery(dataset: &Dataset, grouping: Grouping, cfg: &RunConfig) -> Result<ClanRecovery> {
    let (fitted, skipped) = fit_groups(dataset, grouping, cfg)?;
    let clans = fitted
        .iter()
        .map(|g| {
            g.clan
                .clone()
                .ok_or_else(|| Error::MissingAnnotation(format!("group {} has no single clan", g.label)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut distinct = clans.clone();
    distinct.sort();
    distinct.dedup();
    let k = distinct.len();
    if k < 2 {
        return Err(Error::InsufficientData("clan recovery needs >= 2 clans".into()));
    }
    let labels: Vec<String> = fitted.iter().map(|g| g.label.clone()).collect();
    let trees: Vec<(String, ContextTree)> = fitted.into_iter().map(|g| (g.label, g.tree)).collect();
    let matrix = distance_matrix(&trees, Mode::Symmetric)?;
    let dendrogram = average_linkage(&matrix)?;
    let assignment = cut(&dendrogram, k)?;
    let ari = adjusted_rand_index(&assignment, &clans)?;
    let sweep = ari_sweep(&dendrogram, &clans)?;
    let comparison = compare_groups(&matrix, &clans)?;
    Ok(ClanRecovery {
        report: ClanRecoveryReport {
            grouping,
            labels,
            clans,
            k,
            assignment,
            ari,
            sweep,
            comparison,
            skipped,
        },
        matrix,
        dendrogram,
    })
}

/// Writes `distance.csv`, `dendrogram.json`, `dendrogram.nwk` and `report.json`.
pub fn cmd_pipeline_clan_recovery(cfg: &RunConfig, dataset: &Path, grouping: Grouping) -> Result<ClanRecoveryReport> {
    with_output(cfg, |out| {
        let data = load_dataset(dataset)?;
        let result = run_clan_recovery(&data, grouping, cfg)?;
        let mut w = out.create_file("distance.csv")?;
        write_matrix(&result.matrix, &mut w)?;
        w.flush()?;
        write_dendrogram(out, &result.dendrogram)?;
        out.write_json("report.json", &result.report)?;
        Ok(result.report)
    })
}

// ------------------------------------------------------- overlap regression

/// Which codas of each clan enter the overlap regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodaSubset {
    Id,
    Nonid,
    All,
}

impl std::str::FromStr for CodaSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id" => Ok(CodaSubset::Id),
            "nonid" => Ok(CodaSubset::Nonid),
            "all" => Ok(CodaSubset::All),
            other => Err(Error::InvalidConfig(format!(
                "codas must be `id`, `nonid` or `all`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub clan_a: String,
    pub clan_b: String,
    pub overlap: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRegression {
    #[serde(skip)]
    pub rows: Vec<PairRow>,
    pub n_pairs: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub p_value: f64,
    pub std_err: f64,
    pub pearson: Correlation,
    pub spearman: Correlation,
    pub ci: BootstrapCI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRegression {
    pub coda_type: String,
    pub clans: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<PairRow>,
    /// `None` when the fit could not be computed; see `note`.
    pub regression: Option<OverlapRegression>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub codas: CodaSubset,
    pub clans: Vec<String>,
    pub skipped_clans: Vec<String>,
    #[serde(flatten)]
    pub overall: OverlapRegression,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub by_type: Option<Vec<TypeRegression>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub skipped_types: Vec<String>,
}

fn subset_records(dataset: &Dataset, clan: &str, subset: CodaSubset) -> Result<Vec<CodaRecord>> {
    let chosen = match subset {
        CodaSubset::All => dataset.restrict_clan(clan),
        CodaSubset::Id => partition_id_nonid(dataset, clan)?.0,
        CodaSubset::Nonid => partition_id_nonid(dataset, clan)?.1,
    };
    Ok(chosen.records().cloned().collect())
}

fn pair_rows(clans: &[(String, usize, ContextTree)], overlap: &OverlapMatrix) -> Result<Vec<PairRow>> {
    let pairs: Vec<(usize, usize)> = (0..clans.len())
        .flat_map(|a| (0..clans.len()).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(a, b)| {
            let (ref la, ia, ref ta) = clans[a];
            let (ref lb, ib, ref tb) = clans[b];
            Ok(PairRow {
                clan_a: la.clone(),
                clan_b: lb.clone(),
                overlap: overlap.value(ia, ib),
                distance: symmetric_distance(ta, tb)?,
            })
        })
        .collect()
}

fn regress_rows(rows: Vec<PairRow>, seed: u64) -> Result<OverlapRegression> {
    let x: Vec<f64> = rows.iter().map(|r| r.overlap).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let fit: RegressionResult = ols(&x, &y)?;
    Ok(OverlapRegression {
        n_pairs: rows.len(),
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        p_value: fit.p_value,
        std_err: fit.std_err,
        pearson: pearson(&x, &y)?,
        spearman: spearman(&x, &y)?,
        ci: bootstrap_slope_ci(&x, &y, DEFAULT_RESAMPLES, DEFAULT_LEVEL, seed)?,
        rows,
    })
}

fn fit_clans(
    pools: Vec<(String, usize, Vec<CodaRecord>)>,
    cfg: &RunConfig,
) -> Result<Vec<(String, usize, ContextTree)>> {
    pools
        .into_par_iter()
        .map(|(clan, idx, records)| Ok((clan, idx, fit_records(&records, cfg)?)))
        .collect()
}

/// Style distance against spatial overlap over all directed clan pairs.
///
/// Clans are those of the overlap table that have at least `cfg.min_codas`
/// codas of the chosen subset; the others are skipped with a warning. In
/// per-type mode each coda type is regressed on its own, over the clans that
/// utter it, and types uttered by fewer than three clans are skipped.
pub fn run_regress_overlap(
    dataset: &Dataset,
    overlap: &OverlapMatrix,
    subset: CodaSubset,
    by_coda_type: bool,
    cfg: &RunConfig,
) -> Result<OverlapReport> {
    let mut pools = Vec::new();
    let mut skipped_clans = Vec::new();
    let present = dataset.clans();
    for (idx, clan) in overlap.labels().iter().enumerate() {
        if !present.contains(clan) {
            log::warn!("clan {clan} of the overlap table has no codas");
            skipped_clans.push(clan.clone());
            continue;
        }
        let records = subset_records(dataset, clan, subset)?;
        if records.len() < cfg.min_codas {
            log::warn!("skipping clan {clan} with {} codas (< {})", records.len(), cfg.min_codas);
            skipped_clans.push(clan.clone());
            continue;
        }
        pools.push((clan.clone(), idx, records));
    }
    if pools.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "overlap regression needs >= 3 clans, got {}",
            pools.len()
        )));
    }
    let clans: Vec<String> = pools.iter().map(|p| p.0.clone()).collect();

    let (by_type, skipped_types) = if by_coda_type {
        let (t, s) = regress_by_type(&pools, overlap, cfg)?;
        (Some(t), s)
    } else {
        (None, Vec::new())
    };
    let trees = fit_clans(pools, cfg)?;
    let overall = regress_rows(pair_rows(&trees, overlap)?, cfg.seed)?;
    Ok(OverlapReport {
        codas: subset,
        clans,
        skipped_clans,
        overall,
        by_type,
        skipped_types,
    })
}

fn regress_by_type(
    pools: &[(String, usize, Vec<CodaRecord>)],
    overlap: &OverlapMatrix,
    cfg: &RunConfig,
) -> Result<(Vec<TypeRegression>, Vec<String>)> {
    let mut types: BTreeMap<String, Vec<(String, usize, Vec<CodaRecord>)>> = BTreeMap::new();
    for (clan, idx, records) in pools {
        let mut per_type: BTreeMap<&str, Vec<CodaRecord>> = BTreeMap::new();
        for r in records {
            if let Some(t) = &r.coda_type {
                per_type.entry(t).or_default().push(r.clone());
            }
        }
        for (t, recs) in per_type {
            types.entry(t.to_string()).or_default().push((clan.clone(), *idx, recs));
        }
    }
    if types.is_empty() {
        return Err(Error::MissingAnnotation("no coda carries a coda_type".into()));
    }
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for (coda_type, clan_pools) in types {
        if clan_pools.len() < MIN_CLANS_PER_TYPE {
            skipped.push(coda_type);
            continue;
        }
        let clans = clan_pools.iter().map(|p| p.0.clone()).collect();
        let trees = fit_clans(clan_pools, cfg)?;
        let rows = pair_rows(&trees, overlap)?;
        let (regression, note) = match regress_rows(rows.clone(), cfg.seed) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        results.push(TypeRegression {
            coda_type,
            clans,
            rows,
            regression,
            note,
        });
    }
    Ok((results, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TypedPairRow<'a> {
    coda_type: &'a str,
    clan_a: &'a str,
    clan_b: &'a str,
    overlap: f64,
    distance: f64,
}

/// Writes `pairs.csv` and `summary.json`; in per-type mode also
/// `pairs_by_type.csv`.
pub fn cmd_regress_overlap(
    cfg: &RunConfig,
    dataset: &Path,
    overlap: &Path,
    subset: CodaSubset,
    by_coda_type: bool,
) -> Result<OverlapReport> {
    with_output(cfg, |out| {
        let table = load_overlap_matrix(overlap)?;
        let data = load_dataset(dataset)?;
        let report = run_regress_overlap(&data, &table, subset, by_coda_type, cfg)?;
        write_rows(out, "pairs.csv", &report.overall.rows)?;
        if let Some(types) = &report.by_type {
            let rows: Vec<TypedPairRow> = types
                .iter()
                .flat_map(|t| {
                    t.rows.iter().map(|r| TypedPairRow {
                        coda_type: &t.coda_type,
                        clan_a: &r.clan_a,
                        clan_b: &r.clan_b,
                        overlap: r.overlap,
                        distance: r.distance,
                    })
                })
                .collect();
            write_rows(out, "pairs_by_type.csv", &rows)?;
        }
        out.write_json("summary.json", &report)?;
        Ok(report)
    })
}

// ------------------------------------------------- generation & classifying

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClanAccuracy {
    pub clan: String,
    pub n_train: usize,
    pub n_test: usize,
    pub real_correct: usize,
    pub synthetic_correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub coda_id: String,
    pub kind: String,
    pub clan: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateClassifyReport {
    pub clans: Vec<ClanAccuracy>,
    pub accuracy_real: f64,
    pub accuracy_synthetic: f64,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

/// Stratified split: a seeded `TEST_FRACTION` of each clan's codas is held
/// out, the rest (in dataset order) trains that clan's tree. Each tree then
/// generates as many codas as its clan has held out, and both held-out real
/// codas and synthetic codas are classified by maximum likelihood.
pub fn run_generate_and_classify(dataset: &Dataset, cfg: &RunConfig) -> Result<GenerateClassifyReport> {
    if let Some(r) = dataset.records().find(|r| r.clan.is_none()) {
        return Err(Error::MissingAnnotation(format!("coda {} has no clan", r.coda_id)));
    }
    let mut clans = Vec::new();
    for clan in dataset.clans() {
        let records: Vec<CodaRecord> = dataset.restrict_clan(&clan).records().cloned().collect();
        if records.len() < cfg.min_codas.max(2) {
            log::warn!("skipping clan {clan} with {} codas", records.len());
            continue;
        }
        clans.push((clan, records));
    }
    if clans.len() < 2 {
        return Err(Error::InsufficientData("classification needs >= 2 clans".into()));
    }
    let disc = cfg.discretization()?;
    let splits: Vec<(String, Vec<CodaRecord>, Vec<CodaRecord>)> = clans
        .into_iter()
        .enumerate()
        .map(|(ci, (clan, records))| {
            let n = records.len();
            let n_test = ((n as f64 * TEST_FRACTION).round() as usize).clamp(1, n - 1);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derived_seed(cfg.seed, 1, ci)));
            let mut is_test = vec![false; n];
            for &i in &idx[..n_test] {
                is_test[i] = true;
            }
            let (test, train): (Vec<_>, Vec<_>) = records.into_iter().zip(is_test).partition(|p| p.1);
            (
                clan,
                train.into_iter().map(|p| p.0).collect(),
                test.into_iter().map(|p| p.0).collect(),
            )
        })
        .collect();
    let trees = splits
        .par_iter()
        .map(|(clan, train, _)| Ok((clan.clone(), fit_records(train, cfg)?)))
        .collect::<Result<BTreeMap<String, ContextTree>>>()?;

    let mut per_clan = Vec::new();
    let mut predictions = Vec::new();
    for (ci, (clan, train, test)) in splits.iter().enumerate() {
        let tree = &trees[clan];
        let synthetic = generate(tree, test.len(), derived_seed(cfg.seed, 2, ci))?;
        let real: Vec<(String, Vec<Symbol>)> = test
            .iter()
            .map(|r| Ok((r.coda_id.clone(), encode_coda(r, &disc)?)))
            .collect::<Result<_>>()?;
        let mut tally = |kind: &str, items: Vec<(String, Vec<Symbol>)>| -> Result<usize> {
            let labelled = items
                .par_iter()
                .map(|(_, coda)| classify(coda, &trees))
                .collect::<Result<Vec<_>>>()?;
            let mut correct = 0;
            for ((id, _), predicted) in items.into_iter().zip(labelled) {
                correct += usize::from(&predicted == clan);
                predictions.push(Prediction {
                    coda_id: id,
                    kind: kind.to_string(),
                    clan: clan.clone(),
                    predicted,
                });
            }
            Ok(correct)
        };
        let real_correct = tally("real", real)?;
        let synthetic_items = synthetic
            .into_iter()
            .enumerate()
            .map(|(i, c)| (format!("synthetic-{clan}-{i}"), c))
            .collect();
        let synthetic_correct = tally("synthetic", synthetic_items)?;
        per_clan.push(ClanAccuracy {
            clan: clan.clone(),
            n_train: train.len(),
            n_test: test.len(),
            real_correct,
            synthetic_correct,
        });
    }
    let n_test: usize = per_clan.iter().map(|c| c.n_test).sum();
    let accuracy_real = per_clan.iter().map(|c| c.real_correct).sum::<usize>() as f64 / n_test as f64;
    let accuracy_synthetic = per_clan.iter().map(|c| c.synthetic_correct).sum::<usize>() as f64 / n_test as f64;
    Ok(GenerateClassifyReport {
        clans: per_clan,
        accuracy_real,
        accuracy_synthetic,
        predictions,
    })
}

/// Writes `predictions.csv` and `report.json`.
pub fn cmd_generate_and_classify(cfg: &RunConfig, dataset: &Path) -> Result<GenerateClassifyReport> {
    with_output(cfg, |out| {
        let data = load_dataset(dataset)?;
        let report = run_generate_and_classify(&data, cfg)?;
        write_rows(out, "predictions.csv", &report.predictions)?;
        out.write_json("report.json", &report)?;
        Ok(report)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCoda {
    pub coda_id: String,
    /// Space-separated symbols, end symbol included.
    pub symbols: String,
    /// Semicolon-separated bin-centre intervals; empty when the tree has no
    /// discretization metadata or the coda is only an end symbol.
    pub icis: String,
}

pub fn run_generate(tree: &ContextTree, n_codas: usize, seed: u64) -> Result<Vec<GeneratedCoda>> {
    let codas = generate(tree, n_codas, seed)?;
    Ok(codas
        .iter()
        .enumerate()
        .map(|(i, coda)| GeneratedCoda {
            coda_id: format!("g{i}"),
            symbols: coda.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "),
            icis: tree
                .discretization()
                .map(|d| {
                    symbols_to_icis(coda, &d)
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(";")
                })
                .unwrap_or_default(),
        })
        .collect())
}

/// Writes `generated.csv` with one row per synthetic coda.
pub fn cmd_generate(cfg: &RunConfig, tree: &Path, n_codas: usize) -> Result<Vec<GeneratedCoda>> {
    with_output(cfg, |out| {
        let tree = load_tree(tree)?;
        let codas = run_generate(&tree, n_codas, cfg.seed)?;
        write_rows(out, "generated.csv", &codas)?;
        Ok(codas)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRow {
    pub coda_id: String,
    pub sample_id: String,
    pub clan: Option<String>,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub n_codas: usize,
    pub predicted: BTreeMap<String, usize>,
    /// Share of codas whose clan equals the predicted label, over codas
    /// that carry a clan.
    pub accuracy: Option<f64>,
}

/// Labels every coda of `dataset` with the best-scoring model. Codas are
/// discretized with the models' own settings when they record them.
pub fn run_classify(
    dataset: &Dataset,
    models: Vec<(String, ContextTree)>,
    cfg: &RunConfig,
) -> Result<(Vec<ClassifyRow>, ClassifySummary)> {
    let mut disc = None;
    for (_, t) in &models {
        match (disc, t.discretization()) {
            (None, d) => disc = d,
            (Some(a), Some(b)) if a != b => {
                return Err(Error::InvalidConfig("models were fitted with different discretizations".into()))
            }
            _ => {}
        }
    }
    let disc = match disc {
        Some(d) => d,
        None => cfg.discretization()?,
    };
    let models: BTreeMap<String, ContextTree> = models.into_iter().collect();
    let records: Vec<&CodaRecord> = dataset.records().collect();
    let rows = records
        .par_iter()
        .map(|r| {
            Ok(ClassifyRow {
                coda_id: r.coda_id.clone(),
                sample_id: r.sample_id.clone(),
                clan: r.clan.clone(),
                predicted: classify(&encode_coda(r, &disc)?, &models)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut predicted = BTreeMap::new();
    for r in &rows {
        *predicted.entry(r.predicted.clone()).or_insert(0) += 1;
    }
    let labelled: Vec<&ClassifyRow> = rows.iter().filter(|r| r.clan.is_some()).collect();
    let accuracy = (!labelled.is_empty()).then(|| {
        labelled.iter().filter(|r| r.clan.as_ref() == Some(&r.predicted)).count() as f64 / labelled.len() as f64
    });
    let summary = ClassifySummary {
        n_codas: rows.len(),
        predicted,
        accuracy,
    };
    Ok((rows, summary))
}

/// Writes `predictions.csv` and `summary.json`.
pub fn cmd_classify(cfg: &RunConfig, dataset: &Path, models: &[PathBuf]) -> Result<ClassifySummary> {
    with_output(cfg, |out| {
        let models = load_models(models)?;
        if models.len() < 2 {
            return Err(Error::InsufficientData("classification needs >= 2 models".into()));
        }
        let data = load_dataset(dataset)?;
        let (rows, summary) = run_classify(&data, models, cfg)?;
        write_rows(out, "predictions.csv", &rows)?;
        out.write_json("summary.json", &summary)?;
        Ok(summary)
    })
}

// ------------------------------------------------------------------ scans

/// Whether scans run on the whole dataset as one stream or per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanScope {
    Pooled,
    Sample,
}

impl std::str::FromStr for ScanScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(ScanScope::Pooled),
            "sample" => Ok(ScanScope::Sample),
            other => Err(Error::InvalidConfig(format!(
                "scope must be `pooled` or `sample`, got `{other}`"
            ))),
        }
    }
}

fn scan_pools(dataset: &Dataset, scope: ScanScope, min_codas: usize) -> Result<Vec<(String, Vec<CodaRecord>)>> {
    let pools: Vec<(String, Vec<CodaRecord>)> = match scope {
        ScanScope::Pooled => vec![("pooled".to_string(), dataset.records().cloned().collect())],
        ScanScope::Sample => dataset
            .samples
            .iter()
            .map(|s| (s.sample_id.clone(), s.records.clone()))
            .collect(),
    };
    let kept: Vec<_> = pools
        .into_iter()
        .filter(|(label, recs)| {
            let ok = recs.len() >= min_codas && !recs.is_empty();
            if !ok {
                log::warn!("skipping {label} with {} codas", recs.len());
            }
            ok
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!("nothing with at least {min_codas} codas to scan")));
    }
    Ok(kept)
}

pub fn run_markov_scan(
    dataset: &Dataset,
    scope: ScanScope,
    h_min: usize,
    h_max: usize,
    cfg: &RunConfig,
) -> Result<Vec<(String, OrderScanReport)>> {
    let disc = cfg.discretization()?;
    scan_pools(dataset, scope, cfg.min_codas)?
        .into_par_iter()
        .map(|(label, recs)| Ok((label, scan_orders(&encode_records(&recs, &disc)?, h_min, h_max)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ScanSummary<'a> {
    group: &'a str,
    argmin_aic: usize,
    argmax_variance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct MarkovCsvRow<'a> {
    group: &'a str,
    h: usize,
    mean_probability: f64,
    variance_probability: f64,
    mean_nonzero_per_history: f64,
    n_histories: usize,
    log_likelihood: f64,
    aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ResolutionCsvRow<'a> {
    group: &'a str,
    delta_t: f64,
    alphabet_size: usize,
    aic_vlmc: f64,
    aic_order0: f64,
    difference: f64,
}

/// Writes `markov_scan.csv` (one row per group and order) and `summary.json`.
pub fn cmd_markov_scan(
    cfg: &RunConfig,
    dataset: &Path,
    scope: ScanScope,
    h_min: usize,
    h_max: usize,
) -> Result<Vec<(String, OrderScanReport)>> {
    with_output(cfg, |out| {
        let data = load_dataset(dataset)?;
        let scans = run_markov_scan(&data, scope, h_min, h_max, cfg)?;
        let rows: Vec<MarkovCsvRow> = scans
            .iter()
            .flat_map(|(group, scan)| {
                scan.rows.iter().map(move |r| MarkovCsvRow {
                    group,
                    h: r.h,
                    mean_probability: r.mean_probability,
                    variance_probability: r.variance_probability,
                    mean_nonzero_per_history: r.mean_nonzero_per_history,
                    n_histories: r.n_histories,
                    log_likelihood: r.log_likelihood,
                    aic: r.aic,
                })
            })
            .collect();
        write_rows(out, "markov_scan.csv", &rows)?;
        let summary: Vec<ScanSummary> = scans
            .iter()
            .map(|(l, s)| ScanSummary {
                group: l,
                argmin_aic: s.argmin_aic(),
                argmax_variance: s.argmax_variance(),
            })
            .collect();
        out.write_json("summary.json", &summary)?;
        Ok(scans)
    })
}

pub fn run_resolution_scan(
    dataset: &Dataset,
    scope: ScanScope,
    delta_ts: &[f64],
    cfg: &RunConfig,
) -> Result<Vec<(String, ResolutionScan)>> {
    let fit = cfg.fit_config()?;
    scan_pools(dataset, scope, cfg.min_codas)?
        .into_par_iter()
        .map(|(label, recs)| Ok((label, resolution_scan(&recs, delta_ts, cfg.t_max, &fit)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ResolutionSummary<'a> {
    group: &'a str,
    best_delta_t: f64,
}

/// Writes `resolution_scan.csv` and `summary.json`.
pub fn cmd_resolution_scan(
    cfg: &RunConfig,
    dataset: &Path,
    scope: ScanScope,
    delta_ts: &[f64],
) -> Result<Vec<(String, ResolutionScan)>> {
    with_output(cfg, |out| {
        let data = load_dataset(dataset)?;
        let scans = run_resolution_scan(&data, scope, delta_ts, cfg)?;
        let rows: Vec<ResolutionCsvRow> = scans
            .iter()
            .flat_map(|(group, scan)| {
                scan.rows.iter().map(move |r| ResolutionCsvRow {
                    group,
                    delta_t: r.delta_t,
                    alphabet_size: r.alphabet_size,
                    aic_vlmc: r.aic_vlmc,
                    aic_order0: r.aic_order0,
                    difference: r.difference,
                })
            })
            .collect();
        write_rows(out, "resolution_scan.csv", &rows)?;
        let summary: Vec<ResolutionSummary> = scans
            .iter()
            .map(|(l, s)| ResolutionSummary {
                group: l,
                best_delta_t: s.best_delta_t,
            })
            .collect();
        out.write_json("summary.json", &summary)?;
        Ok(scans)
    })
}

#[cfg(test)]
mod tests;
