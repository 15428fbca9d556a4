//! Discretization of inter-click intervals into a finite symbol alphabet.
//!
//! An interval `ici` maps to `floor(min(ici, t_max) / delta_t)`. The largest
//! symbol, `floor(t_max / delta_t)`, doubles as the end-of-coda marker: every
//! encoded coda is terminated by it, and any interval at or above `t_max`
//! lands on it too.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CodaRecord, CodaSample};

pub type Symbol = u16;

pub const DEFAULT_DELTA_T: f64 = 0.05;
pub const DEFAULT_T_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    pub delta_t: f64,
    pub t_max: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            delta_t: DEFAULT_DELTA_T,
            t_max: DEFAULT_T_MAX,
        }
    }
}

impl DiscretizationConfig {
    pub fn new(delta_t: f64, t_max: f64) -> Result<Self> {
        let cfg = DiscretizationConfig { delta_t, t_max };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta_t must be > 0, got {}",
                self.delta_t
            )));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.delta_t) {
            return Err(Error::InvalidConfig(format!(
                "t_max must be >= delta_t, got t_max={} delta_t={}",
                self.t_max, self.delta_t
            )));
        }
        let top = (self.t_max / self.delta_t).floor();
        if top >= Symbol::MAX as f64 {
            return Err(Error::InvalidConfig(format!(
                "t_max/delta_t = {top} exceeds the supported alphabet size"
            )));
        }
        Ok(())
    }

    pub fn alphabet(&self) -> Alphabet {
        let top = (self.t_max / self.delta_t).floor() as usize;
        Alphabet::new(top + 1)
    }

    pub fn discretize(&self, ici: f64) -> Result<Symbol> {
        discretize_ici(ici, self)
    }
}

/// The symbol set `{0, .., size-1}`; `size-1` marks the end of a coda.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Self {
        assert!(size >= 2, "alphabet needs at least two symbols");
        assert!(size <= Symbol::MAX as usize, "alphabet too large");
        Alphabet { size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn end_symbol(&self) -> Symbol {
        (self.size - 1) as Symbol
    }

    pub fn contains(&self, s: Symbol) -> bool {
        (s as usize) < self.size
    }

    pub fn check(&self, symbols: &[Symbol]) -> Result<()> {
        match symbols.iter().find(|&&s| !self.contains(s)) {
            Some(&s) => Err(Error::SymbolOutOfRange {
                symbol: s as usize,
                size: self.size,
            }),
            None => Ok(()),
        }
    }
}

/// A tokenized symbol sequence with the positions of coda terminators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolStream {
    alphabet: Alphabet,
    symbols: Vec<Symbol>,
    boundaries: Vec<usize>,
}

impl SymbolStream {
    /// Wraps raw symbols; boundaries are recomputed from end-symbol positions.
    pub fn new(alphabet: Alphabet, symbols: Vec<Symbol>) -> Result<Self> {
        alphabet.check(&symbols)?;
        let end = alphabet.end_symbol();
        let boundaries = symbols
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == end)
            .map(|(i, _)| i)
            .collect();
        Ok(SymbolStream {
            alphabet,
            symbols,
            boundaries,
        })
    }

    /// Concatenates codas that are already symbol sequences.
    pub fn from_codas<'a>(
        alphabet: Alphabet,
        codas: impl IntoIterator<Item = &'a [Symbol]>,
    ) -> Result<Self> {
        let mut symbols = Vec::new();
        for c in codas {
            symbols.extend_from_slice(c);
        }
        SymbolStream::new(alphabet, symbols)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// Indices of end-symbol occurrences.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Splits the stream into codas, each ending with the end symbol. A
    /// trailing run without a terminator is returned as-is.
    pub fn codas(&self) -> Vec<&[Symbol]> {
        let mut out = Vec::with_capacity(self.boundaries.len() + 1);
        let mut start = 0;
        for &b in &self.boundaries {
            out.push(&self.symbols[start..=b]);
            start = b + 1;
        }
        if start < self.symbols.len() {
            out.push(&self.symbols[start..]);
        }
        out
    }

    /// Concatenation of two streams over the same alphabet.
    pub fn concat(&self, other: &SymbolStream) -> Result<SymbolStream> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch(
                self.alphabet.size(),
                other.alphabet.size(),
            ));
        }
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&other.symbols);
        SymbolStream::new(self.alphabet, symbols)
    }
}

pub fn discretize_ici(ici: f64, cfg: &DiscretizationConfig) -> Result<Symbol> {
    if !(ici.is_finite() && ici > 0.0) {
        return Err(Error::InvalidInterval(ici));
    }
    // raw quotient, no epsilon nudging
    let bin = (ici.min(cfg.t_max) / cfg.delta_t).floor() as usize;
    Ok(bin.min(cfg.alphabet().size() - 1) as Symbol)
}

/// One symbol per interval followed by the end symbol.
pub fn encode_coda(coda: &CodaRecord, cfg: &DiscretizationConfig) -> Result<Vec<Symbol>> {
    encode_icis(&coda.icis, cfg)
}

pub fn encode_icis(icis: &[f64], cfg: &DiscretizationConfig) -> Result<Vec<Symbol>> {
    let mut out = Vec::with_capacity(icis.len() + 1);
    for &ici in icis {
        out.push(discretize_ici(ici, cfg)?);
    }
    out.push(cfg.alphabet().end_symbol());
    Ok(out)
}

pub fn encode_records<'a>(
    records: impl IntoIterator<Item = &'a CodaRecord>,
    cfg: &DiscretizationConfig,
) -> Result<SymbolStream> {
    let mut symbols = Vec::new();
    for r in records {
        symbols.extend(encode_coda(r, cfg)?);
    }
    SymbolStream::new(cfg.alphabet(), symbols)
}

/// Concatenates the sample's codas, in record order, into one stream.
pub fn encode_sample(sample: &CodaSample, cfg: &DiscretizationConfig) -> Result<SymbolStream> {
    if sample.is_empty() {
        return Err(Error::InsufficientData(format!(
            "sample {} has no codas",
            sample.sample_id
        )));
    }
    encode_records(&sample.records, cfg)
}
