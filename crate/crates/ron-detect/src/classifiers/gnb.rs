//! Gaussian Naive Bayes with a maximum-a-posteriori decision rule.
//!
//! Per class: prior = class frequency, per-feature Gaussian with the
//! maximum-likelihood (divide-by-n) variance, floored to keep densities
//! finite. Scores are computed in log space; the literal product of eight
//! densities underflows long before it ties.

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

use super::{check_dims, Classifier, TieBreak};

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone)]
pub struct GnbParams {
    /// Lower bound on per-feature class variances (standardized units).
    pub var_floor: f64,
    pub tie_break: TieBreak,
}

impl Default for GnbParams {
    fn default() -> Self {
        Self {
            var_floor: 1e-9,
            tie_break: TieBreak::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassStats {
    pub prior: f64,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedGnb {
    golden: ClassStats,
    trojan: ClassStats,
    var_floor: f64,
    tie_break: TieBreak,
}

impl TrainedGnb {
    pub fn fit(train: &LabeledDataset) -> Result<Self> {
        Self::fit_with(train, &GnbParams::default())
    }

    pub fn fit_with(train: &LabeledDataset, params: &GnbParams) -> Result<Self> {
        if !(params.var_floor > 0.0) {
            return Err(Error::Argument("var_floor must be > 0".into()));
        }
        let d = train.n_features();
        let n = train.n_samples();
        let mut by_class: [Vec<&[f64]>; 2] = [Vec::new(), Vec::new()];
        for s in train.samples() {
            by_class[s.label().is_trojan() as usize].push(s.features());
        }
        for (rows, name) in by_class.iter().zip(["golden", "trojan"]) {
            if rows.len() < 2 {
                return Err(Error::Argument(format!(
                    "class {name} has {} samples; need at least 2",
                    rows.len()
                )));
            }
        }
        let stats = |rows: &[&[f64]]| -> ClassStats {
            let nk = rows.len() as f64;
            let mut means = vec![0.0; d];
            for r in rows {
                for (m, &x) in means.iter_mut().zip(*r) {
                    *m += x;
                }
            }
            for m in &mut means {
                *m /= nk;
            }
            let mut vars = vec![0.0; d];
            for r in rows {
                for ((v, &m), &x) in vars.iter_mut().zip(&means).zip(*r) {
                    *v += (x - m) * (x - m);
                }
            }
            for v in &mut vars {
                // maximum-likelihood estimate, floored
                *v = (*v / nk).max(params.var_floor);
            }
            ClassStats {
                prior: nk / n as f64,
                means,
                vars,
            }
        };
        Ok(Self {
            golden: stats(&by_class[0]),
            trojan: stats(&by_class[1]),
            var_floor: params.var_floor,
            tie_break: params.tie_break,
        })
    }

    pub fn from_parts(
        golden: ClassStats,
        trojan: ClassStats,
        var_floor: f64,
        tie_break: TieBreak,
    ) -> Result<Self> {
        let d = golden.means.len();
        if d == 0
            || golden.vars.len() != d
            || trojan.means.len() != d
            || trojan.vars.len() != d
        {
            return Err(Error::Argument("class stats dimension mismatch".into()));
        }
        for v in golden.vars.iter().chain(&trojan.vars) {
            if !(*v > 0.0) {
                return Err(Error::Argument("variances must be > 0".into()));
            }
        }
        if !(golden.prior > 0.0) || !(trojan.prior > 0.0) {
            return Err(Error::Argument("priors must be > 0".into()));
        }
        Ok(Self {
            golden,
            trojan,
            var_floor,
            tie_break,
        })
    }

    pub fn golden_stats(&self) -> &ClassStats {
        &self.golden
    }

    pub fn trojan_stats(&self) -> &ClassStats {
        &self.trojan
    }

    pub fn var_floor(&self) -> f64 {
        self.var_floor
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    fn log_score(stats: &ClassStats, query: &[f64]) -> f64 {
        let mut s = stats.prior.ln();
        for ((&x, &m), &v) in query.iter().zip(&stats.means).zip(&stats.vars) {
            s += -0.5 * (LN_2PI + v.ln()) - (x - m) * (x - m) / (2.0 * v);
        }
        s
    }

    /// Log of prior times likelihood product for (golden, trojan).
    pub fn log_scores(&self, query: &[f64]) -> Result<(f64, f64)> {
        check_dims(self.golden.means.len(), query.len())?;
        Ok((
            Self::log_score(&self.golden, query),
            Self::log_score(&self.trojan, query),
        ))
    }

    /// MAP label and the normalized posterior of that label.
    pub fn classify(&self, query: &[f64]) -> Result<(Label, f64)> {
        let (lg, lt) = self.log_scores(query)?;
        let mx = lg.max(lt);
        let (eg, et) = ((lg - mx).exp(), (lt - mx).exp());
        let post_trojan = et / (eg + et);
        Ok(if lt > lg {
            (Label::Trojan, post_trojan)
        } else if lt < lg {
            (Label::Golden, 1.0 - post_trojan)
        } else {
            (self.tie_break.label(), 0.5)
        })
    }

    /// Normalized posterior probability of the Trojan class.
    pub fn posterior_trojan(&self, query: &[f64]) -> Result<f64> {
        let (lg, lt) = self.log_scores(query)?;
        let mx = lg.max(lt);
        let (eg, et) = ((lg - mx).exp(), (lt - mx).exp());
        Ok(et / (eg + et))
    }
}

impl Classifier for TrainedGnb {
    fn classify_point(&self, query: &[f64]) -> Result<Label> {
        Ok(self.classify(query)?.0)
    }

    fn n_features(&self) -> usize {
        self.golden.means.len()
    }
}
