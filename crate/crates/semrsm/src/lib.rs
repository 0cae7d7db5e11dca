//! Command-line front end and std-side tooling for `semrsm-core`: NPY/CSV/JSON
//! interchange, a thread pool that runs RSM plans in parallel, and matcher
//! benchmarks.

pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod npy;
pub mod parallel;

pub use error::{Error, Result};
