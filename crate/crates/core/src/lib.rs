//! Core algorithms for auditing how the soft-biometric make-up of a training
//! population biases multi-channel activity recognition.
//!
//! The crate is `no_std` and only needs an allocator. Everything that touches
//! the file system, threads or the clock lives in the `harbias` crate.
//!
//! Pipeline, leaf to root:
//!
//! - [`model`]: subjects, recordings and labeled datasets.
//! - [`resample`]: frame decimation.
//! - [`synthetic`]: subject-dependent synthetic recordings.
//! - [`curation`]: median binarization, contingency tables, the
//!   heterogeneity measure and split enumeration.
//! - [`segmentation`]: sliding windows, normalization and noise.
//! - [`nn`]: the late-fusion convolutional classifier and its training loop.
//! - [`metrics`]: confusion matrices, accuracy, weighted F1 and summaries.
//! - [`trial`]: one train and evaluate cycle on a subject split.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod curation;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod resample;
pub mod rng;
pub mod segmentation;
pub mod stats;
pub mod synthetic;
pub mod trial;

pub use error::{Error, Result};
