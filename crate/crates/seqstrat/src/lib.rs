//! File formats, dataset ingestion and the `seqstrat` command line on top of
//! [`seqstrat_core`].

pub mod cli;
mod config;
mod error;
pub mod formats;
pub mod ingest;
pub mod parallel;
pub mod synth;

pub use error::{Error, Result};
pub use seqstrat_core as core;
