//! Frame-level anomaly detection for surveillance video from pretrained
//! CNN patch features.
//!
//! Pipeline: per-patch feature stores ([`featio`]) are normalized
//! ([`normlib`]), reduced with incremental PCA ([`ipca`]), and every test
//! patch is scored by its Euclidean distance to the nearest training
//! patch ([`annindex`]). A frame scores the max over its patches and the
//! pooled frame scores are evaluated with ROC AUC and EER ([`evalkit`]).
//! [`runner`] wires the stages together and sweeps experiment grids.

pub mod annindex;
pub mod dataman;
pub mod error;
pub mod evalkit;
pub mod featio;
pub mod ipca;
pub mod normlib;
pub mod registry;
pub mod runner;
pub mod synth;

pub use error::{Error, Result};
