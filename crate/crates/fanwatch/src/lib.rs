//! Command-line tool and file formats for the fanwatch study pipeline.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod modelio;
pub mod parallel;
