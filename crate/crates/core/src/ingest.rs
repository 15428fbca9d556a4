//! Loading and partitioning of annotated coda datasets and clan-overlap tables.
//!
//! Coda CSV schema, one row per coda:
//!
//! ```text
//! coda_id,sample_id,unit_id,clan,coda_type,id_flag,icis
//! c1,s1,U1,EC1,5R1,true,0.20;0.21;0.19;0.22
//! ```
//!
//! Empty optional fields load as absent. Operations that need a field
//! (`partition_id_nonid` needs `id_flag`, clan grouping needs `clan`) fail at
//! call time rather than at load time.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CODA_HEADER: [&str; 7] = [
    "coda_id",
    "sample_id",
    "unit_id",
    "clan",
    "coda_type",
    "id_flag",
    "icis",
];

/// One coda: its inter-click intervals in seconds plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodaRecord {
    pub coda_id: String,
    pub sample_id: String,
    pub unit_id: Option<String>,
    pub clan: Option<String>,
    pub coda_type: Option<String>,
    /// `true` when this coda is an identity coda for its clan.
    pub id_flag: Option<bool>,
    pub icis: Vec<f64>,
}

impl CodaRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.icis.is_empty() {
            return Err("empty ICI list".into());
        }
        if let Some(bad) = self.icis.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(format!("ICI {bad} is not a finite positive number"));
        }
        Ok(())
    }
}

/// Codas recorded during one event.
#[derive(Debug, Clone, PartialEq)]
pub struct CodaSample {
    pub sample_id: String,
    pub clan: Option<String>,
    pub records: Vec<CodaRecord>,
}

impl CodaSample {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub loaded_at: SystemTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<CodaSample>,
    pub provenance: Provenance,
}

/// How codas are pooled before fitting one tree per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Sample,
    Unit,
    Clan,
}

impl std::str::FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(Grouping::Sample),
            "unit" => Ok(Grouping::Unit),
            "clan" => Ok(Grouping::Clan),
            other => Err(Error::InvalidConfig(format!("unknown grouping `{other}`"))),
        }
    }
}

/// A labelled pool of codas, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct CodaGroup {
    pub label: String,
    /// Reference clan for the group, when every member agrees on one.
    pub clan: Option<String>,
    pub records: Vec<CodaRecord>,
}

impl Dataset {
    /// Groups records into samples by `sample_id`, preserving first-appearance order.
    pub fn from_records(records: Vec<CodaRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut samples: Vec<CodaSample> = Vec::new();
        for (i, record) in records.into_iter().enumerate() {
            record.validate().map_err(|message| Error::MalformedRow {
                path: "<memory>".into(),
                row: i + 1,
                message,
            })?;
            if !seen.insert(record.coda_id.clone()) {
                return Err(Error::DuplicateCoda(record.coda_id));
            }
            push_record(&mut samples, &mut index, record, "<memory>", i + 1)?;
        }
        Ok(Dataset {
            samples,
            provenance: Provenance {
                source: None,
                loaded_at: SystemTime::now(),
            },
        })
    }

    pub fn n_codas(&self) -> usize {
        self.samples.iter().map(CodaSample::len).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = &CodaRecord> {
        self.samples.iter().flat_map(|s| s.records.iter())
    }

    /// Clan labels present in the dataset, sorted.
    pub fn clans(&self) -> Vec<String> {
        let set: std::collections::BTreeSet<String> =
            self.records().filter_map(|r| r.clan.clone()).collect();
        set.into_iter().collect()
    }

    /// Restricts to the records of one clan; samples left empty are dropped.
    pub fn restrict_clan(&self, clan: &str) -> Dataset {
        self.filter_records(|r| r.clan.as_deref() == Some(clan))
    }

    pub fn filter_records(&self, keep: impl Fn(&CodaRecord) -> bool) -> Dataset {
        let samples = self
            .samples
            .iter()
            .filter_map(|s| {
                let records: Vec<CodaRecord> =
                    s.records.iter().filter(|r| keep(r)).cloned().collect();
                (!records.is_empty()).then(|| CodaSample {
                    sample_id: s.sample_id.clone(),
                    clan: s.clan.clone(),
                    records,
                })
            })
            .collect();
        Dataset {
            samples,
            provenance: self.provenance.clone(),
        }
    }

    /// Pools records by the requested key. Group order is first appearance.
    pub fn groups(&self, by: Grouping) -> Result<Vec<CodaGroup>> {
        let mut order: Vec<String> = Vec::new();
        let mut pools: HashMap<String, CodaGroup> = HashMap::new();
        for record in self.records() {
            let key = match by {
                Grouping::Sample => record.sample_id.clone(),
                Grouping::Unit => record.unit_id.clone().ok_or_else(|| {
                    Error::MissingAnnotation(format!("coda {} has no unit_id", record.coda_id))
                })?,
                Grouping::Clan => record.clan.clone().ok_or_else(|| {
                    Error::MissingAnnotation(format!("coda {} has no clan", record.coda_id))
                })?,
            };
            let group = pools.entry(key.clone()).or_insert_with(|| {
                order.push(key.clone());
                CodaGroup {
                    label: key,
                    clan: record.clan.clone(),
                    records: Vec::new(),
                }
            });
            if group.clan != record.clan {
                group.clan = None;
            }
            group.records.push(record.clone());
        }
        Ok(order
            .into_iter()
            .map(|k| pools.remove(&k).expect("group recorded in order"))
            .collect())
    }
}

fn push_record(
    samples: &mut Vec<CodaSample>,
    index: &mut HashMap<String, usize>,
    record: CodaRecord,
    path: &str,
    row: usize,
) -> Result<()> {
    match index.get(&record.sample_id) {
        Some(&i) => {
            let sample = &mut samples[i];
            if sample.clan != record.clan {
                return Err(Error::MalformedRow {
                    path: path.into(),
                    row,
                    message: format!(
                        "sample {} mixes clans {:?} and {:?}",
                        record.sample_id, sample.clan, record.clan
                    ),
                });
            }
            sample.records.push(record);
        }
        None => {
            index.insert(record.sample_id.clone(), samples.len());
            samples.push(CodaSample {
                sample_id: record.sample_id.clone(),
                clan: record.clan.clone(),
                records: vec![record],
            });
        }
    }
    Ok(())
}

fn optional(field: &str) -> Option<String> {
    (!field.is_empty()).then(|| field.to_string())
}

fn parse_row(fields: &csv::StringRecord) -> std::result::Result<CodaRecord, String> {
    if fields.len() != CODA_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            CODA_HEADER.len(),
            fields.len()
        ));
    }
    let coda_id = fields[0].to_string();
    if coda_id.is_empty() {
        return Err("empty coda_id".into());
    }
    let sample_id = fields[1].to_string();
    if sample_id.is_empty() {
        return Err("empty sample_id".into());
    }
    let id_flag = match fields[5].trim() {
        "" => None,
        s if s.eq_ignore_ascii_case("true") || s == "1" => Some(true),
        s if s.eq_ignore_ascii_case("false") || s == "0" => Some(false),
        other => return Err(format!("id_flag `{other}` is not a boolean")),
    };
    let icis = fields[6]
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("ICI `{s}` is not a number"))
        })
        .collect::<std::result::Result<Vec<f64>, String>>()?;
    let record = CodaRecord {
        coda_id,
        sample_id,
        unit_id: optional(&fields[2]),
        clan: optional(&fields[3]),
        coda_type: optional(&fields[4]),
        id_flag,
        icis,
    };
    record.validate()?;
    Ok(record)
}

/// Reads a coda CSV from any reader. `origin` is used in error messages.
pub fn read_dataset<R: Read>(reader: R, origin: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Fields)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != CODA_HEADER {
        return Err(Error::MalformedRow {
            path: origin.into(),
            row: 1,
            message: format!("expected header `{}`", CODA_HEADER.join(",")),
        });
    }
    let mut seen = HashSet::new();
    let mut index = HashMap::new();
    let mut samples = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        // header is row 1
        let row_no = i + 2;
        let row = row.map_err(|e| Error::MalformedRow {
            path: origin.into(),
            row: row_no,
            message: e.to_string(),
        })?;
        let record = parse_row(&row).map_err(|message| Error::MalformedRow {
            path: origin.into(),
            row: row_no,
            message,
        })?;
        if !seen.insert(record.coda_id.clone()) {
            return Err(Error::DuplicateCoda(record.coda_id));
        }
        push_record(&mut samples, &mut index, record, origin, row_no)?;
    }
    Ok(Dataset {
        samples,
        provenance: Provenance {
            source: None,
            loaded_at: SystemTime::now(),
        },
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path)?;
    let mut dataset = read_dataset(file, &path.display().to_string())?;
    dataset.provenance.source = Some(path.to_path_buf());
    Ok(dataset)
}

/// Writes the dataset in the coda CSV schema. Reading the output back yields
/// the same records.
pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CODA_HEADER)?;
    for r in dataset.records() {
        let icis = r
            .icis
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let flag = match r.id_flag {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        wtr.write_record([
            r.coda_id.as_str(),
            r.sample_id.as_str(),
            r.unit_id.as_deref().unwrap_or(""),
            r.clan.as_deref().unwrap_or(""),
            r.coda_type.as_deref().unwrap_or(""),
            flag,
            icis.as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Keeps the samples with at least `min` codas, in order.
pub fn filter_min_codas(dataset: &Dataset, min: usize) -> Dataset {
    Dataset {
        samples: dataset
            .samples
            .iter()
            .filter(|s| s.len() >= min)
            .cloned()
            .collect(),
        provenance: dataset.provenance.clone(),
    }
}

/// Splits one clan's codas into (identity, non-identity) by `id_flag`.
pub fn partition_id_nonid(dataset: &Dataset, clan: &str) -> Result<(Dataset, Dataset)> {
    let subset = dataset.restrict_clan(clan);
    if let Some(r) = subset.records().find(|r| r.id_flag.is_none()) {
        return Err(Error::MissingAnnotation(format!(
            "coda {} of clan {clan} has no id_flag",
            r.coda_id
        )));
    }
    let id = subset.filter_records(|r| r.id_flag == Some(true));
    let nonid = subset.filter_records(|r| r.id_flag == Some(false));
    Ok((id, nonid))
}

/// Asymmetric table: entry (a, b) is the fraction of clan a's samples recorded
/// near some sample of clan b.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl OverlapMatrix {
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidOverlap("no clans".into()));
        }
        if values.len() != n || values.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidOverlap(format!("matrix is not {n}x{n}")));
        }
        let distinct: HashSet<&String> = labels.iter().collect();
        if distinct.len() != n {
            return Err(Error::InvalidOverlap("duplicate clan label".into()));
        }
        for (i, row) in values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidOverlap(format!(
                        "entry ({}, {}) = {v} outside [0, 1]",
                        labels[i], labels[j]
                    )));
                }
            }
            if row[i] != 1.0 {
                return Err(Error::InvalidOverlap(format!(
                    "diagonal entry for {} is {}, expected 1",
                    labels[i], row[i]
                )));
            }
        }
        Ok(OverlapMatrix { labels, values })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, clan: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == clan)
    }

    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        Some(self.values[self.index_of(row)?][self.index_of(col)?])
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Every ordered pair of distinct clans with its overlap value.
    pub fn directed_pairs(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        for (i, a) in self.labels.iter().enumerate() {
            for (j, b) in self.labels.iter().enumerate() {
                if i != j {
                    out.push((a.clone(), b.clone(), self.values[i][j]));
                }
            }
        }
        out
    }
}

pub fn read_overlap_matrix<R: Read>(reader: R) -> Result<OverlapMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::Fields)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::InvalidOverlap("empty file".into()))??;
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut by_label: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut row_order = Vec::new();
    for row in rows {
        let row = row?;
        let label = row
            .get(0)
            .ok_or_else(|| Error::InvalidOverlap("empty row".into()))?
            .to_string();
        let values = row
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidOverlap(format!("`{s}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        row_order.push(label.clone());
        if by_label.insert(label.clone(), values).is_some() {
            return Err(Error::InvalidOverlap(format!("duplicate row {label}")));
        }
    }
    if row_order != labels {
        return Err(Error::InvalidOverlap(
            "row labels must match the header labels in the same order".into(),
        ));
    }
    let values = labels
        .iter()
        .map(|l| by_label.remove(l).expect("row present"))
        .collect();
    OverlapMatrix::new(labels, values)
}

pub fn load_overlap_matrix(path: impl AsRef<Path>) -> Result<OverlapMatrix> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_overlap_matrix(std::fs::File::open(path)?)
}
