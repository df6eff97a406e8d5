//! Supervised ancestral causal learning.

pub mod classify;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod featurize;
pub mod fingerprint;
pub mod graph;
pub mod linalg;
pub mod pairspace;
pub mod seed;
pub mod simgen;

mod binio;

pub use error::{Error, Result};
