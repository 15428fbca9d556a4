//! Variable-length Markov chain models of click-interval sequences.
//!
//! Coda intervals are binned into a finite alphabet ([`tokenize`]), each
//! sample is fitted with a pruned context tree ([`vlmc`]), trees are compared
//! with an averaged KL divergence ([`metric`]) and clustered ([`cluster`]).
//! [`stats`] holds the test battery used on the resulting distances and
//! [`pipeline`] wires everything into file-in, file-out commands.

pub mod cluster;
pub mod error;
pub mod ingest;
pub mod markov;
pub mod metric;
pub mod pipeline;
pub mod planted;
pub mod stats;
pub mod tokenize;
pub mod vlmc;

pub use error::{Error, Result};
