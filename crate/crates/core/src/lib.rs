//! Core algorithms for reducing radial fan sensor runs and modelling their
//! rotational speed.
//!
//! The pipeline is: [`synth::generate_run`] produces a multi-rate
//! [`model::RawRecording`]; [`preprocess::forward_fill_align`] and
//! [`preprocess::remove_ascends`] turn it into an [`model::AlignedTable`];
//! the table is reduced by [`preprocess::downsample`] or [`preprocess::bin`],
//! split by [`splits`], fitted by [`linreg`] or [`forest`], and scored by
//! [`eval`].
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `fanwatch` crate.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod forest;
pub mod linreg;
pub mod matrix;
pub mod model;
pub mod preprocess;
pub mod rng;
pub mod splits;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{AlignedTable, Channel, Dataset, Impeller, RawRecording, Segment, SplitPair};
