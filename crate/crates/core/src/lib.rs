//! Dialect adaptation of standard-language text with a character-level
//! encoder-decoder.

pub mod adapt;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod synth;
pub mod textcodec;
pub mod training;

pub use error::{Error, Result};
