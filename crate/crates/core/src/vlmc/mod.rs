//! Variable-length Markov chains ("subcoda trees").
//!
//! Fitting has two stages. [`count_subsequences`] builds the saturated tree of
//! every history up to depth `D` with its next-symbol counts, and [`prune`]
//! keeps a history `w` when its information gain over its parent suffix `u`,
//! `N(w) * KL(q_w || q_u)`, exceeds a threshold `K`, closing the kept set
//! under suffixes. The default `K` is half the 0.95 quantile of a chi-square
//! with `|alphabet| - 1` degrees of freedom.
//!
//! Fitting and pruning use raw maximum-likelihood distributions. Scoring
//! ([`log_likelihood`], [`classify`]) and cross-tree divergence use additive
//! smoothing with [`SMOOTHING_ALPHA`] so that no probability is zero.

mod generate;
mod io;
mod score;
mod tree;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::tokenize::DiscretizationConfig;

pub use generate::{generate, GENERATION_CAP};
pub use io::{load_tree, read_tree, save_tree, write_tree, TreeDocument};
pub use score::{aic, classify, log_likelihood, log_likelihood_after, parameter_count};
pub use tree::{count_subsequences, fit, information_gain, prune, ContextNode, ContextTree};

/// Pseudo-count added to every symbol when a distribution is smoothed.
pub const SMOOTHING_ALPHA: f64 = 0.5;

pub const DEFAULT_MAX_DEPTH: usize = 10;

/// K = chi2_{n-1}(0.95) / 2.
pub fn default_threshold(alphabet_size: usize) -> f64 {
    assert!(alphabet_size >= 2, "alphabet needs at least two symbols");
    let chi2 = ChiSquared::new((alphabet_size - 1) as f64).expect("positive degrees of freedom");
    0.5 * chi2.inverse_cdf(0.95)
}

/// Pruning threshold K; serialized as `"auto"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "ThresholdRepr", try_from = "ThresholdRepr")]
pub enum Threshold {
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ThresholdRepr {
    Number(f64),
    Text(String),
}

impl From<Threshold> for ThresholdRepr {
    fn from(t: Threshold) -> Self {
        match t {
            Threshold::Auto => ThresholdRepr::Text("auto".into()),
            Threshold::Value(k) => ThresholdRepr::Number(k),
        }
    }
}

impl TryFrom<ThresholdRepr> for Threshold {
    type Error = crate::Error;

    fn try_from(r: ThresholdRepr) -> crate::Result<Self> {
        match r {
            ThresholdRepr::Number(k) => k.to_string().parse(),
            ThresholdRepr::Text(s) => s.parse(),
        }
    }
}

impl Threshold {
    pub fn resolve(self, alphabet_size: usize) -> f64 {
        match self {
            Threshold::Auto => default_threshold(alphabet_size),
            Threshold::Value(k) => k,
        }
    }
}

impl std::str::FromStr for Threshold {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threshold::Auto);
        }
        match s.parse::<f64>() {
            Ok(k) if k >= 0.0 && !k.is_nan() => Ok(Threshold::Value(k)),
            _ => Err(crate::Error::InvalidConfig(format!(
                "threshold must be `auto` or a non-negative number, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_depth: usize,
    pub threshold: Threshold,
    /// Recorded in the fitted tree's metadata.
    pub discretization: Option<DiscretizationConfig>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_depth: DEFAULT_MAX_DEPTH,
            threshold: Threshold::Auto,
            discretization: Some(DiscretizationConfig::default()),
        }
    }
}

impl FitConfig {
    pub fn with_threshold(mut self, k: f64) -> Self {
        self.threshold = Threshold::Value(k);
        self
    }

    pub fn with_max_depth(mut self, d: usize) -> Self {
        self.max_depth = d;
        self
    }
}

#[cfg(test)]
mod tests;
