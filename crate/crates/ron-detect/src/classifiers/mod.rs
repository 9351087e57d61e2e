//! From-scratch classifiers over standardized RO fingerprints: KNN,
//! RBF-kernel SVM (SMO-trained), Gaussian Naive Bayes, and majority-vote
//! ensembles.
//!
//! All classifiers consume features standardized by
//! [`Scaler`](crate::dataset::Scaler); the distance and kernel computations
//! are scale-sensitive. Trained models are immutable and classification is
//! pure, so models are safe to share across threads.

mod ensemble;
mod gnb;
mod knn;
mod svm;

pub use ensemble::{EnsembleMember, TrainedEnsemble};
pub use gnb::{ClassStats, GnbParams, TrainedGnb};
pub use knn::TrainedKnn;
pub use svm::{balanced_class_weights, rbf_kernel, SvmParams, SvmTrace, TrainedSvm};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

/// Resolution of exact decision ties: an SVM decision value of exactly 0, a
/// Naive Bayes posterior of exactly 0.5, or a split vote in a 2-member
/// ensemble.
///
/// The default treats ties as Trojan: in a supply-chain screen a false
/// alarm costs one discarded IC, a miss ships a compromised part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    PreferPositive,
    PreferNegative,
}

impl TieBreak {
    pub fn label(self) -> Label {
        match self {
            TieBreak::PreferPositive => Label::Trojan,
            TieBreak::PreferNegative => Label::Golden,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TieBreak::PreferPositive => "prefer_positive",
            TieBreak::PreferNegative => "prefer_negative",
        }
    }
}

impl std::str::FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prefer_positive" => Ok(TieBreak::PreferPositive),
            "prefer_negative" => Ok(TieBreak::PreferNegative),
            other => Err(Error::Argument(format!(
                "unknown tie-break {other:?}; expected prefer_positive or prefer_negative"
            ))),
        }
    }
}

/// Common labeling interface over all trained model kinds.
pub trait Classifier {
    /// Predict the label of one standardized feature vector.
    fn classify_point(&self, query: &[f64]) -> Result<Label>;

    fn n_features(&self) -> usize;

    /// Predict every sample of a (standardized) dataset in order.
    fn classify_dataset(&self, data: &LabeledDataset) -> Result<Vec<Label>> {
        data.samples()
            .iter()
            .map(|s| self.classify_point(s.features()))
            .collect()
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Argument(format!(
            "dimension mismatch: model has {expected} features, query has {got}"
        )));
    }
    Ok(())
}

pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(squared_distance(x, y).sqrt())
}

/// Copy a dataset's features and labels for model storage.
pub(crate) fn points_and_labels(data: &LabeledDataset) -> (Vec<Vec<f64>>, Vec<Label>) {
    let points = data.samples().iter().map(|s| s.features().to_vec()).collect();
    (points, data.labels())
}
