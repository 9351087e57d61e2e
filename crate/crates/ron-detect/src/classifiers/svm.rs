//! Soft-margin SVM with a Gaussian RBF kernel, trained by SMO-style
//! pairwise coordinate ascent on the kernelized dual.
//!
//! The dual problem:
//!
//! ```text
//! maximize  W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! subject to 0 <= a_i <= C_i,  sum_i a_i y_i = 0
//! ```
//!
//! Each iteration picks the maximal violating pair (the index pair with the
//! largest KKT gap), solves the two-variable subproblem analytically, and
//! updates the cached gradient with two kernel rows. The decision function
//! is `f(x) = sum_i a_i y_i K(x_i, x) + b`; Trojan iff `f(x) > 0`.
//!
//! Per-class penalties `C_neg`, `C_pos` counteract the golden/Trojan class
//! imbalance; see [`balanced_class_weights`].

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

use super::{check_dims, points_and_labels, squared_distance, Classifier, TieBreak};

/// Gaussian radial basis kernel: exp(-gamma * ||x - y||^2).
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Argument(format!("gamma {gamma} must be > 0")));
    }
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok((-gamma * squared_distance(x, y)).exp())
}

/// Inverse-frequency class weights `(w_golden, w_trojan)` with
/// `w_k = n_total / (2 * n_k)`: each class contributes equal total penalty
/// mass, counteracting the 2:23 golden/Trojan imbalance.
pub fn balanced_class_weights(train: &LabeledDataset) -> Result<(f64, f64)> {
    let n_pos = train.labels().iter().filter(|l| l.is_trojan()).count();
    let n_neg = train.n_samples() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Argument(
            "balanced weights need both classes present".into(),
        ));
    }
    let n = train.n_samples() as f64;
    Ok((n / (2.0 * n_neg as f64), n / (2.0 * n_pos as f64)))
}

/// Training parameters.
#[derive(Debug, Clone)]
pub struct SvmParams {
    /// Penalty weight of misclassification against margin width.
    pub c: f64,
    /// RBF kernel width (inverse of the Gaussian variance).
    pub gamma: f64,
    /// Optional per-class weight multipliers `(w_golden, w_trojan)`;
    /// effective penalties are `C * w`. `None` means uniform.
    pub class_weights: Option<(f64, f64)>,
    pub tie_break: TieBreak,
    /// KKT gap below which the solver stops.
    pub tol: f64,
    /// Cap on optimization passes before reporting non-convergence; one
    /// pass is up to one pair update per training point.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 0.1,
            class_weights: None,
            tie_break: TieBreak::default(),
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

/// Solver telemetry (dual objective is non-decreasing).
#[derive(Debug, Clone)]
pub struct SvmTrace {
    /// Dual objective after each accepted pair update, starting at W(0)=0.
    pub objectives: Vec<f64>,
    /// Pair updates performed.
    pub updates: usize,
    pub final_gap: f64,
}

/// A fitted SVM. The decision function is reproducible from the stored
/// fields alone.
#[derive(Debug, Clone)]
pub struct TrainedSvm {
    points: Vec<Vec<f64>>,
    labels: Vec<Label>,
    /// Dual coefficient per training point; support vectors have alpha > 0.
    alphas: Vec<f64>,
    bias: f64,
    gamma: f64,
    c_neg: f64,
    c_pos: f64,
    tie_break: TieBreak,
}

impl TrainedSvm {
    pub fn fit(train: &LabeledDataset, params: &SvmParams) -> Result<Self> {
        Ok(Self::fit_traced(train, params, false)?.0)
    }

    /// Like [`fit`](Self::fit) but records the dual objective after every
    /// pass (quadratic cost per pass; intended for small problems).
    pub fn fit_traced(
        train: &LabeledDataset,
        params: &SvmParams,
        trace: bool,
    ) -> Result<(Self, SvmTrace)> {
        if !(params.c > 0.0) || !params.c.is_finite() {
            return Err(Error::Argument(format!("C = {} must be > 0", params.c)));
        }
        if !(params.gamma > 0.0) || !params.gamma.is_finite() {
            return Err(Error::Argument(format!(
                "gamma = {} must be > 0",
                params.gamma
            )));
        }
        let (points, labels) = points_and_labels(train);
        let n = points.len();
        let has_pos = labels.iter().any(|l| l.is_trojan());
        let has_neg = labels.iter().any(|l| !l.is_trojan());
        if !has_pos || !has_neg {
            return Err(Error::Argument(
                "training set must contain both classes".into(),
            ));
        }
        let (w_neg, w_pos) = params.class_weights.unwrap_or((1.0, 1.0));
        if !(w_neg > 0.0) || !(w_pos > 0.0) {
            return Err(Error::Argument("class weights must be > 0".into()));
        }
        let c_neg = params.c * w_neg;
        let c_pos = params.c * w_pos;
        let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let cbox: Vec<f64> = labels
            .iter()
            .map(|l| if l.is_trojan() { c_pos } else { c_neg })
            .collect();

        // full Gram matrix; problem sizes here are a few hundred points
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            kernel[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let v = (-params.gamma * squared_distance(&points[i], &points[j])).exp();
                kernel[i * n + j] = v;
                kernel[j * n + i] = v;
            }
        }

        let mut alphas = vec![0.0_f64; n];
        let mut grad = vec![-1.0_f64; n]; // d/da_i of (1/2 aQa - sum a)
        let mut objectives = if trace { vec![0.0] } else { Vec::new() };
        let mut updates = 0usize;
        let max_updates = params.max_passes.saturating_mul(n);

        let final_gap = loop {
            // maximal violating pair
            let mut m_val = f64::NEG_INFINITY;
            let mut m_idx = usize::MAX;
            let mut big_m_val = f64::INFINITY;
            let mut big_m_idx = usize::MAX;
            for k in 0..n {
                let v = -y[k] * grad[k];
                let positive = y[k] > 0.0;
                let in_up = (positive && alphas[k] < cbox[k]) || (!positive && alphas[k] > 0.0);
                let in_low = (positive && alphas[k] > 0.0) || (!positive && alphas[k] < cbox[k]);
                if in_up && v > m_val {
                    m_val = v;
                    m_idx = k;
                }
                if in_low && v < big_m_val {
                    big_m_val = v;
                    big_m_idx = k;
                }
            }
            if m_idx == usize::MAX || big_m_idx == usize::MAX {
                return Err(Error::Data(
                    "dual feasible set collapsed; class weights or C invalid".into(),
                ));
            }
            let gap = m_val - big_m_val;
            if gap <= params.tol {
                break gap;
            }
            if updates >= max_updates {
                return Err(Error::Convergence { max_violation: gap });
            }
            updates += 1;

            let (i, j) = (m_idx, big_m_idx);
            // W(t) = W(0) + gap*t - quad/2 * t^2 along a_i += y_i t, a_j -= y_j t
            let quad = (kernel[i * n + i] + kernel[j * n + j] - 2.0 * kernel[i * n + j]).max(1e-12);
            let upper_i = if y[i] > 0.0 {
                cbox[i] - alphas[i]
            } else {
                alphas[i]
            };
            let upper_j = if y[j] > 0.0 {
                alphas[j]
            } else {
                cbox[j] - alphas[j]
            };
            let t = (gap / quad).min(upper_i).min(upper_j);

            if t >= upper_i {
                // pin exactly on the box bound
                alphas[i] = if y[i] > 0.0 { cbox[i] } else { 0.0 };
            } else {
                alphas[i] += y[i] * t;
            }
            if t >= upper_j {
                alphas[j] = if y[j] > 0.0 { 0.0 } else { cbox[j] };
            } else {
                alphas[j] -= y[j] * t;
            }
            for k in 0..n {
                grad[k] += y[k] * t * (kernel[k * n + i] - kernel[k * n + j]);
            }
            if trace {
                objectives.push(dual_objective_dense(&alphas, &y, &kernel, n));
            }
        };

        // bias from free support vectors, else the midpoint of the KKT box
        let mut b_sum = 0.0;
        let mut b_count = 0usize;
        for k in 0..n {
            if alphas[k] > 0.0 && alphas[k] < cbox[k] {
                b_sum += -y[k] * grad[k];
                b_count += 1;
            }
        }
        let bias = if b_count > 0 {
            b_sum / b_count as f64
        } else {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for k in 0..n {
                let v = -y[k] * grad[k];
                let positive = y[k] > 0.0;
                if (positive && alphas[k] < cbox[k]) || (!positive && alphas[k] > 0.0) {
                    lo = lo.max(v);
                }
                if (positive && alphas[k] > 0.0) || (!positive && alphas[k] < cbox[k]) {
                    hi = hi.min(v);
                }
            }
            0.5 * (lo + hi)
        };

        let model = Self {
            points,
            labels,
            alphas,
            bias,
            gamma: params.gamma,
            c_neg,
            c_pos,
            tie_break: params.tie_break,
        };
        let trace = SvmTrace {
            objectives,
            updates,
            final_gap,
        };
        Ok((model, trace))
    }

    /// Assemble a model from stored fields (deserialization path).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        points: Vec<Vec<f64>>,
        labels: Vec<Label>,
        alphas: Vec<f64>,
        bias: f64,
        gamma: f64,
        c_neg: f64,
        c_pos: f64,
        tie_break: TieBreak,
    ) -> Result<Self> {
        if points.is_empty() || points.len() != labels.len() || points.len() != alphas.len() {
            return Err(Error::Argument("points/labels/alphas length mismatch".into()));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::Argument("inconsistent point dimensions".into()));
        }
        if !(gamma > 0.0) || !(c_neg > 0.0) || !(c_pos > 0.0) {
            return Err(Error::Argument("gamma and penalties must be > 0".into()));
        }
        Ok(Self {
            points,
            labels,
            alphas,
            bias,
            gamma,
            c_neg,
            c_pos,
            tie_break,
        })
    }

    /// Raw decision value `sum_i a_i y_i K(x_i, query) + b`.
    pub fn decision(&self, query: &[f64]) -> Result<f64> {
        check_dims(self.points[0].len(), query.len())?;
        let mut acc = 0.0;
        for ((p, l), &a) in self.points.iter().zip(&self.labels).zip(&self.alphas) {
            if a > 0.0 {
                acc += a * l.sign() * (-self.gamma * squared_distance(p, query)).exp();
            }
        }
        Ok(acc + self.bias)
    }

    /// Trojan iff the decision value is positive; exactly 0 resolves by the
    /// tie rule.
    pub fn classify(&self, query: &[f64]) -> Result<Label> {
        let v = self.decision(query)?;
        Ok(if v > 0.0 {
            Label::Trojan
        } else if v < 0.0 {
            Label::Golden
        } else {
            self.tie_break.label()
        })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn penalty(&self, label: Label) -> f64 {
        match label {
            Label::Golden => self.c_neg,
            Label::Trojan => self.c_pos,
        }
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    pub fn support_vector_count(&self) -> usize {
        self.alphas.iter().filter(|&&a| a > 0.0).count()
    }

    /// Dual objective of the stored coefficients.
    pub fn dual_objective(&self) -> f64 {
        let n = self.points.len();
        let mut quad = 0.0;
        for i in 0..n {
            if self.alphas[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if self.alphas[j] == 0.0 {
                    continue;
                }
                let k = (-self.gamma * squared_distance(&self.points[i], &self.points[j])).exp();
                quad += self.alphas[i] * self.alphas[j] * self.labels[i].sign()
                    * self.labels[j].sign()
                    * k;
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    /// Largest remaining KKT gap of the stored solution (0 at the exact
    /// optimum).
    pub fn kkt_violation(&self) -> f64 {
        let mut m_val = f64::NEG_INFINITY;
        let mut big_m_val = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let u = self.decision(p).unwrap() - self.bias;
            let y = self.labels[k].sign();
            let grad = y * u - 1.0;
            let v = -y * grad;
            let cbox = self.penalty(self.labels[k]);
            let positive = y > 0.0;
            let a = self.alphas[k];
            if (positive && a < cbox) || (!positive && a > 0.0) {
                m_val = m_val.max(v);
            }
            if (positive && a > 0.0) || (!positive && a < cbox) {
                big_m_val = big_m_val.min(v);
            }
        }
        (m_val - big_m_val).max(0.0)
    }
}

impl Classifier for TrainedSvm {
    fn classify_point(&self, query: &[f64]) -> Result<Label> {
        self.classify(query)
    }

    fn n_features(&self) -> usize {
        self.points[0].len()
    }
}

fn dual_objective_dense(alphas: &[f64], y: &[f64], kernel: &[f64], n: usize) -> f64 {
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * kernel[i * n + j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}
