//! Plain PBM images, JSON sentence and pattern documents, parallel runners
//! and the `zolab` command line on top of `zolab-core`.

pub mod cli;
pub mod formats;
pub mod parallel;
pub mod pbm;
