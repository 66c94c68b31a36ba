//! File formats, dataset readers, the experiment runner and reporting for
//! heterogeneity bias audits. The algorithms live in [`harbias_core`].

pub mod cache;
pub mod characteristics;
pub mod checkpoint;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod report;
pub mod runner;

mod blob;

pub use error::{AuditError, Result};
pub use harbias_core as core;
