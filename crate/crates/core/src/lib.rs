//! Lexicon-informed text severity classification: corpus handling, AFINN
//! sentiment features, TF-IDF and embedding features, a family of base
//! learners, a stacking ensemble over them, and weighted evaluation.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod learners;
pub mod rng;
pub mod sentiment;
pub mod stacking;
pub mod vectorize;

pub use error::{Error, Result};
