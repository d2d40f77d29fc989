//! Core algorithms for splitting sequential (LiDAR scan) datasets.
//!
//! Everything here is pure and allocation-only: the crate builds without
//! `std`. File formats, directory ingestion and the command line live in
//! the companion `seqstrat` crate.
//!
//! The pipeline is:
//!
//! 1. [`manifest`]: per-scan metadata (pose, label counts, intensity histogram)
//!    built from decoded scan files.
//! 2. [`segment`]: consecutive scans grouped into segments of a granularity.
//! 3. [`stratify`]: segments assigned to subsets (random or iterative
//!    multi-label stratification).
//! 4. [`metrics`]: split quality scores.
//! 5. [`pool`]: many candidate splits scored and ranked.
//! 6. [`coreset`]: ego-pose distance sampling for active learning.

#![no_std]
#![warn(rust_2018_idioms, missing_debug_implementations)]

extern crate alloc;

mod error;
pub mod coreset;
pub mod manifest;
pub mod metrics;
pub mod parse;
pub mod pool;
pub mod rng;
pub mod segment;
pub mod spatial;
pub mod stratify;

pub use error::{Error, Result};

/// Semantic label identifier (lower 16 bits of a label word, or a remapped target id).
pub type LabelId = u32;
