//! Knowledge-base embeddings combining a 2-way (bigram) and a 3-way
//! (trigram) interaction term for link prediction.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod kbdata;
pub mod lincomb;
pub mod pipeline;
pub mod scoring;
pub mod training;

pub use error::{Error, Result};
