//! Hardware Trojan detection from ring-oscillator-network (RON) frequency
//! fingerprints.
//!
//! A Trojan switching inside an IC loads the power grid and depresses the
//! frequencies of ring oscillators embedded in it. This crate provides the
//! full supervised pipeline around that signal:
//!
//! - [`dataset`]: the labeled fingerprint data model, CSV ingestion,
//!   feature standardization, and chip-level train/test splitting.
//! - [`synth`]: a deterministic generator for synthetic RON corpora
//!   (process variation, averaged measurement noise, localized
//!   Trojan-induced frequency depression).
//! - [`classifiers`]: KNN, RBF-kernel SVM trained by an SMO-style dual
//!   solver, Gaussian Naive Bayes, and majority-vote ensembles, all built
//!   from first principles.
//! - [`tuning`]: k-sweeps and exhaustive (C, gamma) grid search with
//!   chip-level validation resplits.
//! - [`eval`]: confusion counts, the TPR/TNR/FPR/FNR rate metrics, and a
//!   seeded trial harness that reports mean metrics per training size.
//! - [`model_io`]: a versioned plain-text serialization format for trained
//!   models and scalers.
//!
//! Every seeded operation is a pure function of its inputs: reruns and
//! parallel schedules produce identical results.

pub mod classifiers;
pub mod dataset;
mod error;
pub mod eval;
pub mod model_io;
pub mod seeding;
pub mod synth;
#[cfg(test)]
pub(crate) mod test_util;
pub mod tuning;

pub use error::{Error, Result};
