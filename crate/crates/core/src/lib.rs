//! Constraint-aware adversarial examples for tabular classifiers.

pub mod attack;
pub mod constraints;
pub mod data;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod sketch;
pub mod surrogates;

pub use error::{Error, Result};
