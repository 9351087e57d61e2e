//! k-nearest-neighbors classifier.
//!
//! Lazy: training stores the standardized points and labels, classification
//! votes among the k nearest under Euclidean distance. Distance ties break
//! toward the lower training index; an even-k split vote goes to the class
//! of the single nearest neighbor (small k is preferred over odd k here, so
//! the even case needs a deterministic rule).

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

use super::{check_dims, points_and_labels, squared_distance, Classifier};

#[derive(Debug, Clone)]
pub struct TrainedKnn {
    k: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl TrainedKnn {
    pub fn fit(train: &LabeledDataset, k: usize) -> Result<Self> {
        let (points, labels) = points_and_labels(train);
        Self::from_parts(k, points, labels)
    }

    /// Assemble a model from stored fields (deserialization path).
    pub fn from_parts(k: usize, points: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if k < 1 || k > points.len() {
            return Err(Error::Argument(format!(
                "k = {k} outside 1..={}",
                points.len()
            )));
        }
        if points.len() != labels.len() {
            return Err(Error::Argument("points/labels length mismatch".into()));
        }
        let dim = points.first().map_or(0, Vec::len);
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::Argument("inconsistent point dimensions".into()));
        }
        Ok(Self { k, points, labels })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Majority vote among the k nearest training points.
    pub fn classify(&self, query: &[f64]) -> Result<Label> {
        check_dims(self.points[0].len(), query.len())?;
        let mut order: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, query), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        // partition the k nearest to the front, then order just that prefix
        if self.k < order.len() {
            order.select_nth_unstable_by(self.k - 1, cmp);
        }
        let prefix = &mut order[..self.k];
        prefix.sort_unstable_by(cmp);

        let trojan_votes = prefix
            .iter()
            .filter(|&&(_, i)| self.labels[i].is_trojan())
            .count();
        let golden_votes = self.k - trojan_votes;
        Ok(match trojan_votes.cmp(&golden_votes) {
            std::cmp::Ordering::Greater => Label::Trojan,
            std::cmp::Ordering::Less => Label::Golden,
            std::cmp::Ordering::Equal => self.labels[prefix[0].1],
        })
    }

    /// Fraction of the k nearest neighbors voting Trojan.
    pub fn trojan_vote_fraction(&self, query: &[f64]) -> Result<f64> {
        check_dims(self.points[0].len(), query.len())?;
        let mut order: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, query), i))
            .collect();
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let trojan = order[..self.k]
            .iter()
            .filter(|&&(_, i)| self.labels[i].is_trojan())
            .count();
        Ok(trojan as f64 / self.k as f64)
    }
}

impl Classifier for TrainedKnn {
    fn classify_point(&self, query: &[f64]) -> Result<Label> {
        self.classify(query)
    }

    fn n_features(&self) -> usize {
        self.points[0].len()
    }
}
