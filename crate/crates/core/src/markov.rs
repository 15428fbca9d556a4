//! Fixed-order Markov baselines: the memory scan over orders `h` and the
//! temporal-resolution scan that compares a fitted tree against an order-0
//! model at several bin widths.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CodaRecord;
use crate::tokenize::{encode_records, Alphabet, DiscretizationConfig, Symbol, SymbolStream};
use crate::vlmc::{self, FitConfig};

/// Maximum-likelihood transition table from length-`h` histories.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedOrderModel {
    order: usize,
    alphabet: Alphabet,
    /// Observed histories only; counts sorted by symbol.
    table: BTreeMap<Vec<Symbol>, Vec<(Symbol, u64)>>,
}

impl FixedOrderModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_histories(&self) -> usize {
        self.table.len()
    }

    pub fn histories(&self) -> impl Iterator<Item = (&Vec<Symbol>, &Vec<(Symbol, u64)>)> {
        self.table.iter()
    }

    /// p(x | history); `None` for a history never observed.
    pub fn probability(&self, history: &[Symbol], x: Symbol) -> Option<f64> {
        let row = self.table.get(history)?;
        let total: u64 = row.iter().map(|r| r.1).sum();
        let c = row.iter().find(|r| r.0 == x).map_or(0, |r| r.1);
        Some(c as f64 / total as f64)
    }

    /// Every nonzero transition probability, history by history.
    pub fn nonzero_probabilities(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for row in self.table.values() {
            let total: u64 = row.iter().map(|r| r.1).sum();
            out.extend(row.iter().map(|r| r.1 as f64 / total as f64));
        }
        out
    }

    /// Log-likelihood of the training positions `h..len` under the MLE table.
    pub fn log_likelihood(&self) -> f64 {
        self.table
            .values()
            .map(|row| {
                let total: u64 = row.iter().map(|r| r.1).sum();
                row.iter()
                    .map(|&(_, c)| c as f64 * (c as f64 / total as f64).ln())
                    .sum::<f64>()
            })
            .sum()
    }

    /// (n - 1) free parameters per observed history.
    pub fn parameter_count(&self) -> usize {
        (self.alphabet.size() - 1) * self.table.len()
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.parameter_count() as f64 - 2.0 * self.log_likelihood()
    }
}

pub fn fit_fixed(stream: &SymbolStream, order: usize) -> Result<FixedOrderModel> {
    let s = stream.symbols();
    if s.len() <= order {
        return Err(Error::InsufficientData(format!(
            "stream of length {} for order {order}",
            s.len()
        )));
    }
    let mut table: BTreeMap<Vec<Symbol>, Vec<(Symbol, u64)>> = BTreeMap::new();
    for i in order..s.len() {
        let row = table.entry(s[i - order..i].to_vec()).or_default();
        match row.binary_search_by_key(&s[i], |r| r.0) {
            Ok(j) => row[j].1 += 1,
            Err(j) => row.insert(j, (s[i], 1)),
        }
    }
    Ok(FixedOrderModel {
        order,
        alphabet: stream.alphabet(),
        table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScanRow {
    pub h: usize,
    pub mean_probability: f64,
    pub variance_probability: f64,
    pub mean_nonzero_per_history: f64,
    pub n_histories: usize,
    pub log_likelihood: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScanReport {
    pub rows: Vec<OrderScanRow>,
}

impl OrderScanReport {
    pub fn argmin_aic(&self) -> usize {
        self.rows
            .iter()
            .min_by(|a, b| a.aic.total_cmp(&b.aic))
            .expect("non-empty scan")
            .h
    }

    pub fn argmax_variance(&self) -> usize {
        self.rows
            .iter()
            .max_by(|a, b| a.variance_probability.total_cmp(&b.variance_probability))
            .expect("non-empty scan")
            .h
    }
}

/// Fits every order in `h_min..=h_max`. Mean and (population) variance are
/// taken over nonzero transition probabilities only.
pub fn scan_orders(stream: &SymbolStream, h_min: usize, h_max: usize) -> Result<OrderScanReport> {
    if h_min > h_max {
        return Err(Error::InvalidConfig(format!(
            "empty order range {h_min}..={h_max}"
        )));
    }
    let rows = (h_min..=h_max)
        .map(|h| {
            let model = fit_fixed(stream, h)?;
            let probs = model.nonzero_probabilities();
            let n = probs.len() as f64;
            let mean = probs.iter().sum::<f64>() / n;
            let var = probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
            Ok(OrderScanRow {
                h,
                mean_probability: mean,
                variance_probability: var,
                mean_nonzero_per_history: n / model.n_histories() as f64,
                n_histories: model.n_histories(),
                log_likelihood: model.log_likelihood(),
                aic: model.aic(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderScanReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRow {
    pub delta_t: f64,
    pub alphabet_size: usize,
    pub aic_vlmc: f64,
    pub aic_order0: f64,
    /// `aic_vlmc - aic_order0`; more negative is better.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionScan {
    pub rows: Vec<ResolutionRow>,
    pub best_delta_t: f64,
}

/// AIC gain of a fitted tree over an order-0 model, per bin width.
///
/// The order-0 model is the root-only tree on the same stream, scored with
/// the same smoothed likelihood as the fitted tree, so the two differ only in
/// the contexts the fit kept.
pub fn resolution_scan(
    records: &[CodaRecord],
    delta_ts: &[f64],
    t_max: f64,
    fit: &FitConfig,
) -> Result<ResolutionScan> {
    if delta_ts.is_empty() {
        return Err(Error::InvalidConfig("no delta_t values".into()));
    }
    let rows = delta_ts
        .iter()
        .map(|&delta_t| {
            let disc = DiscretizationConfig::new(delta_t, t_max)?;
            let stream = encode_records(records, &disc)?;
            let cfg = FitConfig {
                discretization: Some(disc),
                ..*fit
            };
            let tree = vlmc::fit(&stream, &cfg)?;
            let order0 = vlmc::fit(&stream, &cfg.with_threshold(f64::INFINITY))?;
            let aic_vlmc = vlmc::aic(&tree, &stream)?;
            let aic_order0 = vlmc::aic(&order0, &stream)?;
            Ok(ResolutionRow {
                delta_t,
                alphabet_size: disc.alphabet().size(),
                aic_vlmc,
                aic_order0,
                difference: aic_vlmc - aic_order0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_delta_t = rows
        .iter()
        .min_by(|a, b| a.difference.total_cmp(&b.difference))
        .expect("non-empty")
        .delta_t;
    Ok(ResolutionScan { rows, best_delta_t })
}
